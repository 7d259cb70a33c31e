#include "gridflux/solve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

namespace gridflux {

DpfConfig config_from_preset(const Preset& preset) {
    DpfConfig c;
    c.optimizer = preset.optimizer;
    c.scheduler = preset.scheduler;
    c.max_iter = preset.max_iter;
    return c;
}

namespace {

using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

void check_config(const DpfConfig& config) {
    if (config.max_iter < 1) throw ValidationError("max_iter must be at least 1");
    if (config.loss_tol < 0 || config.mismatch_tol < 0 || config.early_stop_lr < 0)
        throw ValidationError("tolerances must be non-negative");
}

/// One-or-many cases flattened into a single numerical problem. The per-case
/// ranges index into pv/pq (which are grouped by case, ascending).
struct StackedView {
    const SparseComplexMatrix& y;
    const std::vector<cxd>& s_bus;
    const std::vector<std::size_t>& pv;
    const std::vector<std::size_t>& pq;
    const std::vector<double>& vm_setpoint;
    const std::vector<std::size_t>& slacks;
    const std::vector<double>& slack_va;
    std::vector<std::size_t> bus_off, pv_off, pq_off;  // size n_cases + 1

    [[nodiscard]] std::size_t n_cases() const { return bus_off.size() - 1; }
};

/// The shared gradient-descent loop. A batch of one runs through exactly the
/// same statements as a single solve, which is what makes the two entry
/// points bitwise-equivalent.
std::vector<Solution> run_dpf(const StackedView& sv, const DpfConfig& config,
                              const std::vector<const VoltageState*>& inits) {
    check_config(config);
    const auto t0 = clock_type::now();
    const std::size_t n = sv.s_bus.size();
    const std::size_t C = sv.n_cases();
    const std::size_t npv = sv.pv.size(), npq = sv.pq.size();
    const std::size_t n_va = npv + npq;
    const std::size_t dim = n_va + npq;

    // state, from the per-case init or the flat start, with the fixed
    // components projected back onto their setpoints
    std::vector<double> vm(sv.vm_setpoint), va(n, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        va[sv.slacks[c]] = sv.slack_va[c];
        if (inits[c] == nullptr) continue;
        const VoltageState& in = *inits[c];
        const std::size_t lo = sv.bus_off[c], hi = sv.bus_off[c + 1];
        if (in.vm.size() != hi - lo || in.va.size() != hi - lo)
            throw DimensionError("init state length does not match case size");
        std::copy(in.vm.begin(), in.vm.end(), vm.begin() + lo);
        std::copy(in.va.begin(), in.va.end(), va.begin() + lo);
        va[sv.slacks[c]] = sv.slack_va[c];
        vm[sv.slacks[c]] = sv.vm_setpoint[sv.slacks[c]];
        for (std::size_t k = sv.pv_off[c]; k < sv.pv_off[c + 1]; ++k)
            vm[sv.pv[k]] = sv.vm_setpoint[sv.pv[k]];
    }

    std::vector<double> params(dim), grad(dim, 0.0);
    auto pack = [&] {
        for (std::size_t k = 0; k < npv; ++k) params[k] = va[sv.pv[k]];
        for (std::size_t k = 0; k < npq; ++k) params[npv + k] = va[sv.pq[k]];
        for (std::size_t k = 0; k < npq; ++k) params[n_va + k] = vm[sv.pq[k]];
    };
    auto unpack = [&] {
        for (std::size_t k = 0; k < npv; ++k) va[sv.pv[k]] = params[k];
        for (std::size_t k = 0; k < npq; ++k) va[sv.pq[k]] = params[npv + k];
        for (std::size_t k = 0; k < npq; ++k) vm[sv.pq[k]] = params[n_va + k];
    };
    pack();

    PfWorkspace ws(sv.y);
    OptimizerState opt;
    SchedulerState sched;
    sched.current_lr = config.optimizer.lr;

    std::vector<std::uint8_t> frozen_coord(dim, 0);
    std::vector<std::uint8_t> frozen(C, 0);
    std::vector<int> iterations(C, 0);
    std::vector<double> case_loss(C, 0.0), case_mm(C, 0.0), case_m(C, 0.0);
    std::vector<std::vector<double>> history(C);
    for (std::size_t c = 0; c < C; ++c)
        case_m[c] = static_cast<double>((sv.pv_off[c + 1] - sv.pv_off[c]) +
                                        2 * (sv.pq_off[c + 1] - sv.pq_off[c]));
    const double m_total = static_cast<double>(npv + 2 * npq);
    const double scale = m_total > 0 ? 2.0 / m_total : 0.0;

    std::vector<double> snap_vm(vm), snap_va(va);  // last state with finite loss
    std::size_t n_frozen = 0;
    int iter = 0;
    bool lr_stop = false;

    for (;;) {
        ws.forward(sv.y, vm.data(), va.data());

        double global_acc = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            double acc = 0.0, mm = 0.0;
            for (std::size_t k = sv.pv_off[c]; k < sv.pv_off[c + 1]; ++k) {
                const std::size_t i = sv.pv[k];
                const double d = ws.S[i].real() - sv.s_bus[i].real();
                acc += d * d;
                mm = std::max(mm, std::abs(d));
            }
            for (std::size_t k = sv.pq_off[c]; k < sv.pq_off[c + 1]; ++k) {
                const std::size_t i = sv.pq[k];
                const double dp = ws.S[i].real() - sv.s_bus[i].real();
                const double dq = ws.S[i].imag() - sv.s_bus[i].imag();
                acc += dp * dp + dq * dq;
                mm = std::max({mm, std::abs(dp), std::abs(dq)});
            }
            case_loss[c] = case_m[c] > 0 ? acc / case_m[c] : 0.0;
            case_mm[c] = mm;
            global_acc += acc;
            if (!frozen[c] && config.record_history) history[c].push_back(case_loss[c]);
        }
        const double global_loss = m_total > 0 ? global_acc / m_total : 0.0;

        for (std::size_t c = 0; c < C; ++c) {
            if (frozen[c]) continue;
            if (case_loss[c] < config.loss_tol || case_mm[c] < config.mismatch_tol) {
                frozen[c] = 1;
                iterations[c] = iter;
                ++n_frozen;
                for (std::size_t k = sv.pv_off[c]; k < sv.pv_off[c + 1]; ++k)
                    frozen_coord[k] = 1;
                for (std::size_t k = sv.pq_off[c]; k < sv.pq_off[c + 1]; ++k) {
                    frozen_coord[npv + k] = 1;
                    frozen_coord[n_va + k] = 1;
                }
            }
        }

        if (n_frozen == C || iter >= config.max_iter || lr_stop) break;

        if (!std::isfinite(global_loss) || global_loss > 1e12) {
            VoltageState last{std::move(snap_vm), std::move(snap_va)};
            throw DivergenceError("power-flow loss diverged", std::move(last), iter);
        }
        snap_vm = vm;
        snap_va = va;

        // gradient of the global mean loss, masked to zero at frozen cases
        ws.refresh_partials(sv.y, vm.data());
        std::fill(ws.wbar.begin(), ws.wbar.end(), cxd{0.0, 0.0});
        for (std::size_t c = 0; c < C; ++c) {
            if (frozen[c]) continue;
            for (std::size_t k = sv.pv_off[c]; k < sv.pv_off[c + 1]; ++k) {
                const std::size_t i = sv.pv[k];
                ws.wbar[i] = cxd{ws.S[i].real() - sv.s_bus[i].real(), 0.0};
            }
            for (std::size_t k = sv.pq_off[c]; k < sv.pq_off[c + 1]; ++k) {
                const std::size_t i = sv.pq[k];
                ws.wbar[i] = std::conj(ws.S[i] - sv.s_bus[i]);
            }
        }
        transpose_apply(ws.dS_dva, ws.wbar.data(), ws.ty.data());
        for (std::size_t k = 0; k < npv; ++k) grad[k] = scale * ws.ty[sv.pv[k]].real();
        for (std::size_t k = 0; k < npq; ++k)
            grad[npv + k] = scale * ws.ty[sv.pq[k]].real();
        transpose_apply(ws.dS_dvm, ws.wbar.data(), ws.ty.data());
        for (std::size_t k = 0; k < npq; ++k)
            grad[n_va + k] = scale * ws.ty[sv.pq[k]].real();

        try {
            optimizer_step(opt, config.optimizer, params, grad, sched.current_lr,
                           frozen_coord.data());
        } catch (const NonFiniteError& e) {
            VoltageState last{std::move(snap_vm), std::move(snap_va)};
            throw DivergenceError(e.what(), std::move(last), iter);
        }
        const double lr = scheduler_step(sched, config.scheduler, global_loss);
        unpack();
        ++iter;
        if (config.early_stop_lr > 0 && lr < config.early_stop_lr) lr_stop = true;
    }

    const double wall = ms_since(t0);
    std::vector<Solution> out(C);
    for (std::size_t c = 0; c < C; ++c) {
        Solution& s = out[c];
        const std::size_t lo = sv.bus_off[c], hi = sv.bus_off[c + 1];
        s.V.vm.assign(vm.begin() + lo, vm.begin() + hi);
        s.V.va.assign(va.begin() + lo, va.begin() + hi);
        s.converged = frozen[c] != 0;
        s.iterations = frozen[c] ? iterations[c] : iter;
        s.final_loss = case_loss[c];
        s.max_mismatch = case_mm[c];
        s.loss_history = std::move(history[c]);
        s.wall_time_ms = wall;
    }
    return out;
}

}  // namespace

Solution solve_dpf(const PowerFlowProblem& p, const DpfConfig& config,
                   const VoltageState* init) {
    const std::vector<std::size_t> slacks{p.slack};
    const std::vector<double> slack_va{p.slack_angle};
    StackedView sv{p.y_bus,
                   p.s_bus,
                   p.pv,
                   p.pq,
                   p.vm_setpoint,
                   slacks,
                   slack_va,
                   {0, p.n_buses()},
                   {0, p.pv.size()},
                   {0, p.pq.size()}};
    std::vector<Solution> sols = run_dpf(sv, config, {init});
    return std::move(sols[0]);
}

BatchedProblem make_batch(const std::vector<const PowerFlowProblem*>& ps) {
    if (ps.empty()) throw ValidationError("make_batch: empty problem list");
    BatchedProblem b;
    std::vector<const SparseComplexMatrix*> mats;
    mats.reserve(ps.size());
    std::size_t off = 0;
    for (const PowerFlowProblem* p : ps) {
        mats.push_back(&p->y_bus);
        b.s_bus.insert(b.s_bus.end(), p->s_bus.begin(), p->s_bus.end());
        b.vm_setpoint.insert(b.vm_setpoint.end(), p->vm_setpoint.begin(),
                             p->vm_setpoint.end());
        for (std::size_t i : p->pv) b.pv.push_back(i + off);
        for (std::size_t i : p->pq) b.pq.push_back(i + off);
        b.slacks.push_back(p->slack + off);
        b.slack_va.push_back(p->slack_angle);
        b.case_sizes.push_back(p->n_buses());
        off += p->n_buses();
    }
    b.y_bus = block_diag(mats);
    return b;
}

BatchedProblem make_batch(const std::vector<PowerFlowProblem>& ps) {
    std::vector<const PowerFlowProblem*> ptrs;
    ptrs.reserve(ps.size());
    for (const PowerFlowProblem& p : ps) ptrs.push_back(&p);
    return make_batch(ptrs);
}

std::vector<Solution> solve_batch(const BatchedProblem& batch, const DpfConfig& config,
                                  const std::vector<VoltageState>* inits) {
    const std::size_t C = batch.n_cases();
    if (C == 0) throw ValidationError("solve_batch: empty batch");
    if (inits != nullptr && inits->size() != C)
        throw DimensionError("solve_batch: one init per case required");

    std::vector<std::size_t> bus_off(C + 1, 0);
    for (std::size_t c = 0; c < C; ++c) bus_off[c + 1] = bus_off[c] + batch.case_sizes[c];
    if (bus_off[C] != batch.n_buses())
        throw DimensionError("solve_batch: case sizes do not sum to stacked size");

    // pv/pq are grouped by case and ascending, so each case's slice is found
    // by binary search on the bus offsets
    auto group_offsets = [&](const std::vector<std::size_t>& idx) {
        std::vector<std::size_t> off(C + 1, 0);
        for (std::size_t c = 0; c <= C; ++c)
            off[c] = static_cast<std::size_t>(
                std::lower_bound(idx.begin(), idx.end(), bus_off[c]) - idx.begin());
        return off;
    };
    StackedView sv{batch.y_bus,   batch.s_bus,    batch.pv,
                   batch.pq,      batch.vm_setpoint, batch.slacks,
                   batch.slack_va, bus_off,        group_offsets(batch.pv),
                   group_offsets(batch.pq)};

    std::vector<const VoltageState*> init_ptrs(C, nullptr);
    if (inits != nullptr)
        for (std::size_t c = 0; c < C; ++c) init_ptrs[c] = &(*inits)[c];
    return run_dpf(sv, config, init_ptrs);
}

Solution solve_nr(const PowerFlowProblem& p, double tol, int max_iter) {
    const auto t0 = clock_type::now();
    VoltageState v;
    try {
        v = solve_dc(p);
    } catch (const Error&) {
        v = flat_start(p);  // linearized init unavailable; Newton copes anyway
    }

    const std::size_t n_th = p.pv.size() + p.pq.size();
    const std::size_t dim = n_th + p.pq.size();
    std::vector<double> step(dim);

    Solution sol;
    int iter = 0;
    for (;;) {
        const Mismatch mm = mismatch(v, p);
        sol.max_mismatch = mm.max_abs();
        sol.final_loss = loss(mm);
        sol.loss_history.push_back(sol.final_loss);
        if (sol.max_mismatch < tol) {
            sol.converged = true;
            break;
        }
        if (iter >= max_iter) break;

        JacobianBlocks jb = assemble_jacobian(v, p);
        for (std::size_t k = 0; k < n_th; ++k) step[k] = -mm.dp[k];
        for (std::size_t k = 0; k < p.pq.size(); ++k) step[n_th + k] = -mm.dq[k];
        try {
            dense_lu_solve_inplace(jb.assembled, step.data());
        } catch (const SingularMatrixError& e) {
            throw SingularMatrixError(std::string(e.what()) +
                                          " (Jacobian at iteration " +
                                          std::to_string(iter) + ")",
                                      iter);
        }
        std::size_t r = 0;
        for (std::size_t i : p.pv) v.va[i] += step[r++];
        for (std::size_t i : p.pq) v.va[i] += step[r++];
        for (std::size_t i : p.pq) v.vm[i] += step[r++];
        ++iter;
    }
    sol.V = std::move(v);
    sol.iterations = iter;
    sol.wall_time_ms = ms_since(t0);
    return sol;
}

VoltageState solve_dc(const PowerFlowProblem& p) {
    const std::size_t n = p.n_buses();
    VoltageState v;
    v.vm = p.vm_setpoint;
    v.va.assign(n, 0.0);
    v.va[p.slack] = p.slack_angle;
    if (n <= 1) return v;

    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> pos(n, kNone), bus(n - 1);
    std::size_t r = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == p.slack) continue;
        pos[i] = r;
        bus[r] = i;
        ++r;
    }

    DenseRealMatrix B(n - 1, n - 1);
    for (const ReactanceEdge& e : p.edges) {
        if (e.x == 0.0)
            throw ValidationError("zero branch reactance; linearized solve undefined");
        const double w = 1.0 / e.x;
        const std::size_t pf = pos[e.from], pt = pos[e.to];
        if (pf != kNone) B(pf, pf) += w;
        if (pt != kNone) B(pt, pt) += w;
        if (pf != kNone && pt != kNone) {
            B(pf, pt) -= w;
            B(pt, pf) -= w;
        }
    }

    std::vector<double> theta(n - 1);
    for (std::size_t k = 0; k < n - 1; ++k) theta[k] = p.s_bus[bus[k]].real();
    dense_lu_solve_inplace(B, theta.data());
    for (std::size_t k = 0; k < n - 1; ++k) v.va[bus[k]] = theta[k];
    return v;
}

}  // namespace gridflux
