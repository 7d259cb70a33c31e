#include "gridflux/series.hpp"

#include <string>
#include <utility>

#include "rand_util.hpp"

namespace gridflux {

InjectionSeries generate_series(const PowerFlowProblem& p, int n_steps,
                                double rel_amplitude, std::uint64_t seed) {
    if (n_steps < 1) throw ValidationError("generate_series: n_steps must be >= 1");
    if (rel_amplitude < 0.0 || rel_amplitude >= 1.0)
        throw ValidationError("generate_series: rel_amplitude must lie in [0, 1)");

    InjectionSeries series;
    series.base = p;
    series.seed = seed;
    series.steps.reserve(static_cast<std::size_t>(n_steps));
    series.steps.push_back(p.s_bus);

    std::mt19937_64 rng(seed);
    for (int t = 1; t < n_steps; ++t) {
        std::vector<cxd> next = series.steps.back();
        for (cxd& s : next) {
            const double delta =
                (2.0 * detail::uniform01(rng) - 1.0) * rel_amplitude;
            s *= 1.0 + delta;
        }
        series.steps.push_back(std::move(next));
    }
    return series;
}

std::vector<Solution> solve_series(const InjectionSeries& series,
                                   const DpfConfig& first_config,
                                   const DpfConfig& warm_config) {
    if (series.steps.empty()) throw ValidationError("solve_series: series is empty");

    PowerFlowProblem p = series.base;
    std::vector<Solution> out;
    out.reserve(series.steps.size());
    for (std::size_t t = 0; t < series.steps.size(); ++t) {
        if (series.steps[t].size() != p.n_buses())
            throw DimensionError("solve_series: step " + std::to_string(t) +
                                 " injection length mismatch");
        p.s_bus = series.steps[t];
        try {
            if (t == 0)
                out.push_back(solve_dpf(p, first_config));
            else
                out.push_back(solve_dpf(p, warm_config, &out.back().V));
        } catch (const Error& e) {
            throw SeriesStepError("step " + std::to_string(t) + ": " + e.what(),
                                  static_cast<int>(t));
        }
    }
    return out;
}

}  // namespace gridflux
