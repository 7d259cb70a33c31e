#pragma once
#include <cstddef>
#include <string>
#include <vector>

#include "gridflux/optim.hpp"
#include "gridflux/pf.hpp"

namespace gridflux {

/// Result of one solver run (or one case of a batched run).
struct Solution {
    VoltageState V;
    bool converged = false;
    int iterations = 0;          // optimizer / Newton steps actually taken
    double final_loss = 0.0;
    double max_mismatch = 0.0;   // ∞-norm over dp, dq in p.u.
    std::vector<double> loss_history;
    double wall_time_ms = 0.0;
};

struct DpfConfig {
    OptimizerConfig optimizer;
    SchedulerConfig scheduler;
    int max_iter = 1000;
    double loss_tol = 1e-10;     // p.u.²
    double mismatch_tol = 1e-6;  // p.u.
    double early_stop_lr = 0.0;  // stop when lr drops below this (0 = never)
    bool record_history = true;
};

[[nodiscard]] DpfConfig config_from_preset(const Preset& preset);

/// Solver blew up (non-finite loss/gradient or loss > 1e12). Carries the last
/// finite state and the iteration at which it happened.
struct DivergenceError : Error {
    DivergenceError(const std::string& what_, VoltageState state, int iteration_)
        : Error(what_), last_state(std::move(state)), iteration(iteration_) {}
    VoltageState last_state;
    int iteration;
};

/// Several cases stacked into one numerical problem: block-diagonal Y_bus,
/// concatenated vectors, and index sets shifted by per-case offsets.
struct BatchedProblem {
    SparseComplexMatrix y_bus;
    std::vector<cxd> s_bus;
    std::vector<std::size_t> pv;          // global indices, grouped by case
    std::vector<std::size_t> pq;
    std::vector<std::size_t> slacks;      // one per case
    std::vector<double> slack_va;         // fixed slack angle per case
    std::vector<double> vm_setpoint;
    std::vector<std::size_t> case_sizes;

    [[nodiscard]] std::size_t n_cases() const { return case_sizes.size(); }
    [[nodiscard]] std::size_t n_buses() const { return s_bus.size(); }
};

/// Gradient-descent power flow: minimizes the mean squared power mismatch
/// over [va(pv∪pq); vm(pq)] starting from `init` or the flat start.
/// Stops on loss < loss_tol, max_mismatch < mismatch_tol, lr < early_stop_lr,
/// or the iteration budget. Throws DivergenceError on blow-up.
[[nodiscard]] Solution solve_dpf(const PowerFlowProblem& p, const DpfConfig& config,
                                 const VoltageState* init = nullptr);

/// Newton-Raphson baseline: DC-initialized, dense-LU linear solves.
/// Throws SingularMatrixError (with iteration) on a singular Jacobian.
[[nodiscard]] Solution solve_nr(const PowerFlowProblem& p, double tol = 1e-8,
                                int max_iter = 20);

/// Linearized direct solve: B'·θ = P on the non-slack buses, magnitudes held
/// at setpoints. Throws SingularMatrixError when the non-slack network is
/// disconnected from the slack.
[[nodiscard]] VoltageState solve_dc(const PowerFlowProblem& p);

[[nodiscard]] BatchedProblem make_batch(const std::vector<const PowerFlowProblem*>& ps);
[[nodiscard]] BatchedProblem make_batch(const std::vector<PowerFlowProblem>& ps);

/// One DPF run over the stacked system; converged cases are frozen (their
/// gradient masked to zero and their coordinates pinned) while the rest keep
/// iterating. Returns one Solution per case. A batch of one reproduces the
/// solve_dpf trajectory bit for bit.
[[nodiscard]] std::vector<Solution> solve_batch(
    const BatchedProblem& batch, const DpfConfig& config,
    const std::vector<VoltageState>* inits = nullptr);

}  // namespace gridflux
