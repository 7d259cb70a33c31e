#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridflux/errors.hpp"

namespace gridflux {

/// Gradient contained a NaN/Inf; solvers translate this into a divergence
/// diagnostic carrying the last finite state.
struct NonFiniteError : Error {
    using Error::Error;
};

enum class OptimizerKind { Adam, Sgd, RmsProp };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999;  // Adam moment decays
    double momentum = 0.0;              // SGD
    double alpha = 0.99;                // RMSprop smoothing
    double eps = 1e-8;
};

/// Mutable per-run state; vectors are sized lazily on the first step.
struct OptimizerState {
    std::int64_t step_count = 0;
    std::vector<double> m, v;   // Adam first/second moments (v doubles as RMSprop avg)
    std::vector<double> buf;    // SGD momentum buffer
};

/// One first-order update of `params` in place. `frozen`, when non-null, marks
/// coordinates whose parameters and moments must not move at all (batched
/// solving freezes converged cases this way). Throws NonFiniteError on a
/// non-finite gradient entry.
void optimizer_step(OptimizerState& state, const OptimizerConfig& config,
                    std::vector<double>& params, const std::vector<double>& grad,
                    double current_lr, const std::uint8_t* frozen = nullptr);

enum class SchedulerKind { Constant, StepLr, MultiStepLr, ReduceOnPlateau };

struct SchedulerConfig {
    SchedulerKind kind = SchedulerKind::Constant;
    int step_size = 1;                // step_lr
    double gamma = 1.0;               // step_lr / multi_step decay
    std::vector<int> milestones;      // multi_step
    double factor = 0.1;              // plateau decay
    int patience = 10;                // plateau
    double threshold = 1e-4;          // plateau relative improvement
    int cooldown = 0;                 // plateau
    double min_lr = 0.0;
};

struct SchedulerState {
    double base_lr = 0.0;
    double current_lr = 0.0;
    std::int64_t t = 0;          // completed evaluations
    double best = 0.0;           // plateau best metric (init +inf on first use)
    int num_bad = 0;
    int cooldown_left = 0;
    bool initialized = false;
};

/// Advances the schedule by one evaluation and returns the new learning rate.
/// Plateau runs in min mode with a relative threshold: an evaluation improves
/// when metric < best·(1 − threshold); after `patience` consecutive
/// non-improving evaluations the rate is multiplied by `factor` (floored at
/// min_lr) and `cooldown` evaluations are ignored for patience counting.
double scheduler_step(SchedulerState& state, const SchedulerConfig& config,
                      double metric);

/// A named bundle of optimizer + scheduler settings with an iteration budget.
struct Preset {
    std::string name;
    OptimizerConfig optimizer;
    SchedulerConfig scheduler;
    int max_iter = 1000;
};

[[nodiscard]] std::optional<Preset> find_preset(const std::string& name);
[[nodiscard]] std::vector<std::string> preset_names();

}  // namespace gridflux
