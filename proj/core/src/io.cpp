#include "gridflux/io.hpp"

#include <iomanip>
#include <ostream>

#include <json.hpp>

namespace gridflux {
namespace {

const char* optimizer_name(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::Sgd: return "sgd";
        case OptimizerKind::RmsProp: return "rmsprop";
    }
    return "?";
}

const char* scheduler_name(SchedulerKind k) {
    switch (k) {
        case SchedulerKind::Constant: return "constant";
        case SchedulerKind::StepLr: return "step_lr";
        case SchedulerKind::MultiStepLr: return "multi_step_lr";
        case SchedulerKind::ReduceOnPlateau: return "reduce_on_plateau";
    }
    return "?";
}

nlohmann::json config_echo(const RunMetadata& meta) {
    nlohmann::json config = nlohmann::json::object();
    if (meta.method == "dpf" && meta.dpf != nullptr) {
        const DpfConfig& c = *meta.dpf;
        config["optimizer"] = {{"kind", optimizer_name(c.optimizer.kind)},
                               {"lr", c.optimizer.lr},
                               {"beta1", c.optimizer.beta1},
                               {"beta2", c.optimizer.beta2},
                               {"momentum", c.optimizer.momentum},
                               {"alpha", c.optimizer.alpha},
                               {"eps", c.optimizer.eps}};
        config["scheduler"] = {{"kind", scheduler_name(c.scheduler.kind)},
                               {"step_size", c.scheduler.step_size},
                               {"gamma", c.scheduler.gamma},
                               {"milestones", c.scheduler.milestones},
                               {"factor", c.scheduler.factor},
                               {"patience", c.scheduler.patience},
                               {"threshold", c.scheduler.threshold},
                               {"cooldown", c.scheduler.cooldown},
                               {"min_lr", c.scheduler.min_lr}};
        config["max_iter"] = c.max_iter;
        config["loss_tol"] = c.loss_tol;
        config["mismatch_tol"] = c.mismatch_tol;
        config["early_stop_lr"] = c.early_stop_lr;
    } else if (meta.method == "nr") {
        config["tol"] = meta.nr_tol;
        config["max_iter"] = meta.nr_max_iter;
    }
    return config;
}

}  // namespace

void write_solution_csv(std::ostream& out, const PowerFlowProblem& p,
                        const VoltageState& v) {
    const std::vector<cxd> s = calc_power(v, p.y_bus);
    out << std::setprecision(17);
    out << "bus_id,vm_pu,va_rad,p_calc_pu,q_calc_pu\n";
    for (std::size_t i = 0; i < p.n_buses(); ++i)
        out << p.external_ids[i] << ',' << v.vm[i] << ',' << v.va[i] << ','
            << s[i].real() << ',' << s[i].imag() << '\n';
}

void write_metadata_json(std::ostream& out, const RunMetadata& meta,
                         const Solution& sol) {
    nlohmann::json j;
    j["grid"] = meta.grid_name;
    j["method"] = meta.method;
    if (!meta.preset.empty()) j["preset"] = meta.preset;
    j["init"] = meta.init;
    j["seed"] = meta.seed;
    j["config"] = config_echo(meta);
    j["converged"] = sol.converged;
    j["iterations"] = sol.iterations;
    j["final_loss"] = sol.final_loss;
    j["max_mismatch"] = sol.max_mismatch;
    j["wall_time_ms"] = sol.wall_time_ms;
    j["loss_history"] = sol.loss_history;
    out << j.dump(2) << '\n';
}

void write_record_header(std::ostream& out, TableFormat format) {
    if (format == TableFormat::Csv)
        out << "label,grid,n_buses,nnz,solver,batch,iterations,wall_ms,per_iter_ms,"
               "final_loss,max_mismatch,seed\n";
    else
        out << "# label grid n_buses nnz solver batch iterations wall_ms per_iter_ms "
               "final_loss max_mismatch seed\n";
}

void write_record(std::ostream& out, const RunRecord& rec, TableFormat format) {
    const char sep = format == TableFormat::Csv ? ',' : ' ';
    out << std::setprecision(17);
    out << rec.label << sep << rec.grid_name << sep << rec.n_buses << sep << rec.nnz
        << sep << rec.solver << sep << rec.batch_size << sep << rec.iterations << sep
        << rec.wall_time_ms << sep << rec.time_per_iter_ms << sep << rec.final_loss
        << sep << rec.max_mismatch << sep << rec.seed << '\n';
}

void write_records(std::ostream& out, const std::vector<RunRecord>& records,
                   TableFormat format) {
    write_record_header(out, format);
    for (const RunRecord& rec : records) write_record(out, rec, format);
}

void export_problem_dump(std::ostream& out, const PowerFlowProblem& p) {
    out << std::setprecision(17);
    out << "N " << p.n_buses() << '\n';
    out << "M " << p.edges.size() << '\n';
    out << "slack " << p.slack << '\n';
    out << "pv";
    for (std::size_t i : p.pv) out << ' ' << i;
    out << '\n';
    out << "pq";
    for (std::size_t i : p.pq) out << ' ' << i;
    out << '\n';
    out << "ybus " << p.y_bus.nnz() << '\n';
    for (std::size_t i = 0; i < p.y_bus.n_rows; ++i)
        for (std::size_t k = p.y_bus.row_offsets[i]; k < p.y_bus.row_offsets[i + 1];
             ++k)
            out << i << ' ' << p.y_bus.col_indices[k] << ' '
                << p.y_bus.values[k].real() << ' ' << p.y_bus.values[k].imag()
                << '\n';
}

}  // namespace gridflux
