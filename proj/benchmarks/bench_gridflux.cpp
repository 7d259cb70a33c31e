#include <benchmark/benchmark.h>

#include <map>
#include <string>
#include <vector>

#include <gridflux/bench.hpp>
#include <gridflux/grid.hpp>
#include <gridflux/solve.hpp>

using namespace gridflux;

#ifndef GRIDFLUX_CASES_DIR
#error "GRIDFLUX_CASES_DIR must name the directory with the .m fixtures"
#endif

namespace {

const GridCase& grid(const char* name) {
    static std::map<std::string, GridCase> cache;
    auto it = cache.find(name);
    if (it == cache.end())
        it = cache
                 .emplace(name, parse_matpower_file(std::string(GRIDFLUX_CASES_DIR) +
                                                    "/" + name))
                 .first;
    return it->second;
}

PowerFlowProblem scaled_problem(std::size_t k) {
    return build_problem(node_scale(grid("case300.m"), k, 17));
}

DpfConfig fixed_iters(int iters) {
    DpfConfig c;
    c.optimizer.kind = OptimizerKind::Adam;
    c.optimizer.lr = 0.003;
    c.max_iter = iters;
    c.loss_tol = 0.0;
    c.mismatch_tol = 0.0;
    c.record_history = false;
    return c;
}

void BM_spmv(benchmark::State& state) {
    const PowerFlowProblem p = scaled_problem(static_cast<std::size_t>(state.range(0)));
    const VoltageState flat = flat_start(p);
    std::vector<cxd> x(p.n_buses()), y(p.n_buses());
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::polar(flat.vm[i], flat.va[i]);
    for (auto _ : state) {
        spmv(p.y_bus, x.data(), y.data());
        benchmark::DoNotOptimize(y.data());
    }
    state.counters["nnz"] = static_cast<double>(p.y_bus.nnz());
}

void BM_grad_loss(benchmark::State& state) {
    const PowerFlowProblem p = scaled_problem(static_cast<std::size_t>(state.range(0)));
    const VoltageState v = flat_start(p);
    for (auto _ : state) {
        const Gradient g = grad_loss(v, p);
        benchmark::DoNotOptimize(g.d_va.data());
    }
    state.counters["nnz"] = static_cast<double>(p.y_bus.nnz());
}

/// Cost of one optimizer iteration, measured over a 20-step run.
void BM_dpf_iteration(benchmark::State& state) {
    const PowerFlowProblem p = scaled_problem(static_cast<std::size_t>(state.range(0)));
    const DpfConfig cfg = fixed_iters(20);
    for (auto _ : state) {
        const Solution s = solve_dpf(p, cfg);
        benchmark::DoNotOptimize(s.final_loss);
    }
    state.SetItemsProcessed(state.iterations() * 20);
    state.counters["nnz"] = static_cast<double>(p.y_bus.nnz());
}

void BM_nr_solve(benchmark::State& state) {
    const char* names[] = {"case14.m", "case118.m", "case300.m"};
    const PowerFlowProblem p = build_problem(grid(names[state.range(0)]));
    for (auto _ : state) {
        const Solution s = solve_nr(p);
        benchmark::DoNotOptimize(s.max_mismatch);
    }
    state.SetLabel(names[state.range(0)]);
}

/// Per-case cost of a batched run; shrinking values down the B column is the
/// amortization the batch path exists for.
void BM_batch_per_case(benchmark::State& state) {
    const PowerFlowProblem p = build_problem(grid("case300.m"));
    const std::size_t B = static_cast<std::size_t>(state.range(0));
    const std::vector<const PowerFlowProblem*> copies(B, &p);
    const BatchedProblem batch = make_batch(copies);
    const DpfConfig cfg = fixed_iters(20);
    for (auto _ : state) {
        const std::vector<Solution> sols = solve_batch(batch, cfg);
        benchmark::DoNotOptimize(sols.front().final_loss);
    }
    state.SetItemsProcessed(state.iterations() * B * 20);
}

}  // namespace

BENCHMARK(BM_spmv)->Arg(1)->Arg(8)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_grad_loss)->Arg(1)->Arg(8)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_dpf_iteration)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_nr_solve)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_batch_per_case)->Arg(1)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
