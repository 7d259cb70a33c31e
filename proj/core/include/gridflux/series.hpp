#pragma once
#include <cstdint>
#include <vector>

#include "gridflux/solve.hpp"

namespace gridflux {

/// Solver failure while sweeping a series; `step` is the 0-based step index.
struct SeriesStepError : Error {
    SeriesStepError(const std::string& what_, int step_) : Error(what_), step(step_) {}
    int step;
};

/// A fixed grid with one injection vector per time step. steps[0] is the base
/// case's own injection.
struct InjectionSeries {
    PowerFlowProblem base;
    std::vector<std::vector<cxd>> steps;
    std::uint64_t seed = 0;
};

/// Multiplicative random walk on the injections: step t scales each bus's
/// step-(t−1) injection by (1 + δ), δ ~ U[−rel_amplitude, +rel_amplitude]
/// drawn per bus per step, so consecutive steps stay close. Deterministic
/// under `seed`.
[[nodiscard]] InjectionSeries generate_series(const PowerFlowProblem& p, int n_steps,
                                              double rel_amplitude,
                                              std::uint64_t seed);

/// Step 0 solved from a flat start under `first_config`; every later step
/// warm-started from the previous step's solution under `warm_config`.
[[nodiscard]] std::vector<Solution> solve_series(const InjectionSeries& series,
                                                 const DpfConfig& first_config,
                                                 const DpfConfig& warm_config);

}  // namespace gridflux
