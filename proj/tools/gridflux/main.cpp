#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridflux/bench.hpp"
#include "gridflux/io.hpp"
#include "gridflux/series.hpp"
#include "gridflux/solve.hpp"

namespace gf = gridflux;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("GRIDFLUX_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end != env && *end == '\0') return v;
    }
    return 1;
}

gf::DpfConfig preset_or_default(const std::string& name) {
    if (name.empty()) return gf::DpfConfig{};
    const auto p = gf::find_preset(name);
    if (!p) throw gf::ValidationError("unknown preset '" + name + "'");
    return gf::config_from_preset(*p);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw gf::Error("cannot open output file '" + path + "'");
    return out;
}

void write_solution_files(const std::string& stem, const gf::PowerFlowProblem& p,
                          const gf::RunMetadata& meta, const gf::Solution& sol) {
    auto csv = open_out(stem + ".csv");
    gf::write_solution_csv(csv, p, sol.V);
    auto json = open_out(stem + ".json");
    gf::write_metadata_json(json, meta, sol);
}

gf::Solution run_dc_as_solution(const gf::PowerFlowProblem& p) {
    const auto t0 = std::chrono::steady_clock::now();
    gf::VoltageState v = gf::solve_dc(p);
    const double wall = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    gf::Solution sol;
    const gf::Mismatch mm = gf::mismatch(v, p);
    sol.V = std::move(v);
    sol.converged = true;  // direct method: always produces its answer
    sol.iterations = 1;
    sol.final_loss = gf::loss(mm);
    sol.max_mismatch = mm.max_abs();
    sol.wall_time_ms = wall;
    return sol;
}

struct SolveArgs {
    std::string case_path;
    std::string method = "dpf";
    std::string preset;
    std::string init = "flat";
    double tol = 0.0;
    int max_iter = 0;
    std::string out = "run";
    std::uint64_t seed = default_seed();
};

int run_solve(const SolveArgs& a) {
    const gf::GridCase grid = gf::parse_matpower_file(a.case_path);
    const gf::PowerFlowProblem p = gf::build_problem(grid);

    gf::RunMetadata meta;
    meta.grid_name = grid.name;
    meta.method = a.method;
    meta.preset = a.preset;
    meta.init = a.init;
    meta.seed = a.seed;

    gf::Solution sol;
    gf::DpfConfig cfg;
    if (a.method == "dpf") {
        cfg = preset_or_default(a.preset);
        if (a.tol > 0) cfg.mismatch_tol = a.tol;
        if (a.max_iter > 0) cfg.max_iter = a.max_iter;
        meta.dpf = &cfg;
        if (a.init == "dc") {
            const gf::VoltageState start = gf::solve_dc(p);
            sol = gf::solve_dpf(p, cfg, &start);
        } else {
            sol = gf::solve_dpf(p, cfg);
        }
    } else if (a.method == "nr") {
        meta.nr_tol = a.tol > 0 ? a.tol : 1e-8;
        meta.nr_max_iter = a.max_iter > 0 ? a.max_iter : 20;
        meta.init = "dc";
        sol = gf::solve_nr(p, meta.nr_tol, meta.nr_max_iter);
    } else {  // dc
        meta.init = "n/a";
        sol = run_dc_as_solution(p);
    }

    write_solution_files(a.out, p, meta, sol);
    return sol.converged ? kOk : kNotConverged;
}

struct CompareArgs {
    std::string case_path;
    std::vector<std::string> methods{"dpf", "nr", "dc"};
    std::string preset;
    std::string out = "compare";
    std::uint64_t seed = default_seed();
};

int run_compare(const CompareArgs& a) {
    if (a.methods.size() < 2)
        throw gf::ValidationError("compare needs at least two methods");
    const gf::GridCase grid = gf::parse_matpower_file(a.case_path);
    const gf::PowerFlowProblem p = gf::build_problem(grid);

    auto summary = open_out(a.out + "_summary.csv");
    summary << "method,converged,iterations,wall_time_ms,final_loss,max_mismatch\n";
    summary << std::setprecision(17);

    bool any_converged = false;
    for (const std::string& method : a.methods) {
        gf::RunMetadata meta;
        meta.grid_name = grid.name;
        meta.method = method;
        meta.seed = a.seed;

        gf::Solution sol;
        gf::DpfConfig cfg;
        bool ran = true;
        try {
            if (method == "dpf") {
                cfg = preset_or_default(a.preset);
                meta.dpf = &cfg;
                sol = gf::solve_dpf(p, cfg);
            } else if (method == "nr") {
                meta.nr_tol = 1e-8;
                meta.nr_max_iter = 20;
                meta.init = "dc";
                sol = gf::solve_nr(p);
            } else if (method == "dc") {
                meta.init = "n/a";
                sol = run_dc_as_solution(p);
            } else {
                throw gf::ValidationError("unknown method '" + method + "'");
            }
        } catch (const gf::DivergenceError&) {
            ran = false;
        } catch (const gf::SingularMatrixError&) {
            ran = false;
        }
        if (ran) {
            write_solution_files(a.out + "_" + method, p, meta, sol);
            summary << method << ',' << (sol.converged ? 1 : 0) << ','
                    << sol.iterations << ',' << sol.wall_time_ms << ','
                    << sol.final_loss << ',' << sol.max_mismatch << '\n';
            any_converged = any_converged || sol.converged;
        } else {
            summary << method << ",0,0,nan,nan,nan\n";
        }
    }
    return any_converged ? kOk : kNotConverged;
}

struct BatchArgs {
    std::string case_path;
    std::size_t copies = 1;
    std::string preset;
    std::string out = "batch";
    std::uint64_t seed = default_seed();
};

int run_batch(const BatchArgs& a) {
    if (a.copies < 1) throw gf::ValidationError("--copies must be >= 1");
    const gf::GridCase grid = gf::parse_matpower_file(a.case_path);
    const gf::PowerFlowProblem p = gf::build_problem(grid);
    const gf::DpfConfig cfg = preset_or_default(a.preset);

    const std::vector<const gf::PowerFlowProblem*> copies(a.copies, &p);
    const gf::BatchedProblem batch = gf::make_batch(copies);
    const std::vector<gf::Solution> sols = gf::solve_batch(batch, cfg);

    bool all_converged = true;
    for (std::size_t c = 0; c < sols.size(); ++c) {
        gf::RunMetadata meta;
        meta.grid_name = grid.name;
        meta.method = "dpf";
        meta.preset = a.preset;
        meta.seed = a.seed;
        meta.dpf = &cfg;
        write_solution_files(a.out + "_case" + std::to_string(c), p, meta, sols[c]);
        all_converged = all_converged && sols[c].converged;
    }
    return all_converged ? kOk : kNotConverged;
}

struct SeriesArgs {
    std::string case_path;
    int steps = 20;
    double amplitude = 0.02;
    std::uint64_t seed = default_seed();
    std::string preset_first = "ts-first";
    std::string preset_warm = "ts-warm";
    std::string out = "series";
};

int run_series(const SeriesArgs& a) {
    const gf::GridCase grid = gf::parse_matpower_file(a.case_path);
    const gf::PowerFlowProblem p = gf::build_problem(grid);
    const gf::DpfConfig first = preset_or_default(a.preset_first);
    const gf::DpfConfig warm = preset_or_default(a.preset_warm);

    const gf::InjectionSeries series =
        gf::generate_series(p, a.steps, a.amplitude, a.seed);
    const std::vector<gf::Solution> sols = gf::solve_series(series, first, warm);

    auto summary = open_out(a.out + "_series.csv");
    summary << "step,converged,iterations,final_loss,max_mismatch,wall_ms\n";
    summary << std::setprecision(17);
    bool all_converged = true;
    gf::PowerFlowProblem step_problem = p;
    for (std::size_t t = 0; t < sols.size(); ++t) {
        step_problem.s_bus = series.steps[t];
        auto csv = open_out(a.out + "_step" + std::to_string(t) + ".csv");
        gf::write_solution_csv(csv, step_problem, sols[t].V);
        summary << t << ',' << (sols[t].converged ? 1 : 0) << ','
                << sols[t].iterations << ',' << sols[t].final_loss << ','
                << sols[t].max_mismatch << ',' << sols[t].wall_time_ms << '\n';
        all_converged = all_converged && sols[t].converged;
    }
    return all_converged ? kOk : kNotConverged;
}

struct BenchArgs {
    std::string suite_path;
    std::string out = "bench.csv";
    std::string format = "csv";
};

int run_bench(const BenchArgs& a) {
    std::ifstream in(a.suite_path);
    if (!in) throw gf::Error("cannot open suite file '" + a.suite_path + "'");
    const gf::BenchSuite suite = gf::load_suite(in);

    const gf::TableFormat fmt =
        a.format == "plain" ? gf::TableFormat::Plain : gf::TableFormat::Csv;
    auto out = open_out(a.out);
    gf::write_record_header(out, fmt);
    gf::run_benchmark(suite, [&](const gf::RunRecord& rec) {
        gf::write_record(out, rec, fmt);
        out.flush();  // records land on disk as they are produced
    });
    return kOk;
}

struct ExportArgs {
    std::string case_path;
    std::string out;
};

int run_export(const ExportArgs& a) {
    const gf::GridCase grid = gf::parse_matpower_file(a.case_path);
    const gf::PowerFlowProblem p = gf::build_problem(grid);
    if (a.out.empty()) {
        gf::export_problem_dump(std::cout, p);
    } else {
        auto out = open_out(a.out);
        gf::export_problem_dump(out, p);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GridFlux: sparse AC power-flow toolkit"};
    app.require_subcommand(1);

    SolveArgs solve_args;
    CLI::App* solve = app.add_subcommand("solve", "Solve one case");
    solve->add_option("case", solve_args.case_path, "MATPOWER case file")->required();
    solve->add_option("--method", solve_args.method, "dpf | nr | dc")
        ->check(CLI::IsMember({"dpf", "nr", "dc"}));
    solve->add_option("--preset", solve_args.preset, "named DPF preset");
    solve->add_option("--init", solve_args.init, "flat | dc")
        ->check(CLI::IsMember({"flat", "dc"}));
    solve->add_option("--tol", solve_args.tol, "mismatch tolerance (p.u.)");
    solve->add_option("--max-iter", solve_args.max_iter, "iteration budget");
    solve->add_option("--out", solve_args.out, "output stem (.csv/.json added)");
    solve->add_option("--seed", solve_args.seed, "seed recorded in metadata");

    CompareArgs compare_args;
    CLI::App* compare = app.add_subcommand("compare", "Run several methods");
    compare->add_option("case", compare_args.case_path, "MATPOWER case file")
        ->required();
    compare->add_option("--methods", compare_args.methods, "two or more methods")
        ->delimiter(',');
    compare->add_option("--preset", compare_args.preset, "DPF preset");
    compare->add_option("--out", compare_args.out, "output stem");
    compare->add_option("--seed", compare_args.seed, "seed recorded in metadata");

    BatchArgs batch_args;
    CLI::App* batch = app.add_subcommand("batch", "Solve B copies as one batch");
    batch->add_option("case", batch_args.case_path, "MATPOWER case file")->required();
    batch->add_option("--copies", batch_args.copies, "batch size")->required();
    batch->add_option("--preset", batch_args.preset, "DPF preset");
    batch->add_option("--out", batch_args.out, "output stem");
    batch->add_option("--seed", batch_args.seed, "seed recorded in metadata");

    SeriesArgs series_args;
    CLI::App* series = app.add_subcommand("series", "Warm-started injection series");
    series->add_option("case", series_args.case_path, "MATPOWER case file")
        ->required();
    series->add_option("--steps", series_args.steps, "number of steps");
    series->add_option("--amplitude", series_args.amplitude, "relative walk size");
    series->add_option("--seed", series_args.seed, "series seed");
    series->add_option("--preset-first", series_args.preset_first, "cold preset");
    series->add_option("--preset-warm", series_args.preset_warm, "warm preset");
    series->add_option("--out", series_args.out, "output stem");

    BenchArgs bench_args;
    CLI::App* bench = app.add_subcommand("bench", "Run a benchmark suite");
    bench->add_option("--suite", bench_args.suite_path, "suite JSON file")
        ->required();
    bench->add_option("--out", bench_args.out, "record table file");
    bench->add_option("--format", bench_args.format, "csv | plain")
        ->check(CLI::IsMember({"csv", "plain"}));

    ExportArgs export_args;
    CLI::App* exp = app.add_subcommand("export-problem", "Dump the numeric problem");
    exp->add_option("case", export_args.case_path, "MATPOWER case file")->required();
    exp->add_option("--out", export_args.out, "dump file (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (solve->parsed()) return run_solve(solve_args);
        if (compare->parsed()) return run_compare(compare_args);
        if (batch->parsed()) return run_batch(batch_args);
        if (series->parsed()) return run_series(series_args);
        if (bench->parsed()) return run_bench(bench_args);
        if (exp->parsed()) return run_export(export_args);
    } catch (const gf::DivergenceError& e) {
        std::cerr << "error: " << e.what() << " (iteration " << e.iteration << ")\n";
        return kNotConverged;
    } catch (const gf::SeriesStepError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNotConverged;
    } catch (const gf::SingularMatrixError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNotConverged;
    } catch (const gf::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kInputError;
}
