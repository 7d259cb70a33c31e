#include <doctest.h>

#include <cmath>
#include <sstream>

#include <gridflux/grid.hpp>
#include <gridflux/solve.hpp>

#include "support/oracles.hpp"
#include "support/paths.hpp"

using namespace gridflux;
using testsup::case_file;

namespace {

PowerFlowProblem load(const char* name) {
    return build_problem(parse_matpower_file(case_file(name)));
}

/// Adam settings that reliably drive the small fixtures to convergence.
DpfConfig toy_config(double mismatch_tol = 1e-6, int max_iter = 4000) {
    DpfConfig c;
    c.optimizer.kind = OptimizerKind::Adam;
    c.optimizer.lr = 0.05;
    c.max_iter = max_iter;
    c.loss_tol = 0.0;
    c.mismatch_tol = mismatch_tol;
    return c;
}

// Slack feeding two buses; bus 3 carries load but no branch reaches it.
const char* kIslanded = R"(mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	138	1	1.1	0.9;
	2	1	20	5	0	0	1	1	0	138	1	1.1	0.9;
	3	1	50	10	0	0	1	1	0	138	1	1.1	0.9;
];
mpc.gen = [
	1	0	0	300	-300	1	100	1;
];
mpc.branch = [
	1	2	0	0.5	0	0	0	0	0	0	1;
];
)";

PowerFlowProblem islanded_problem() {
    std::istringstream in(kIslanded);
    return build_problem(parse_matpower(in, "islanded"));
}

}  // namespace

TEST_CASE("dpf solves the two-bus closed-form fixture") {
    const PowerFlowProblem p = load("case2_pq.m");
    const Solution sol = solve_dpf(p, toy_config());
    CHECK(sol.converged);
    CHECK(sol.max_mismatch < 1e-6);
    CHECK(sol.V.va[1] == doctest::Approx(std::asin(-0.5)).epsilon(1e-4));
    CHECK(sol.V.vm[1] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(sol.loss_history.size() == static_cast<std::size_t>(sol.iterations) + 1);
    CHECK(sol.wall_time_ms >= 0.0);
}

TEST_CASE("dpf initialized at a solved state takes zero steps") {
    const PowerFlowProblem p = load("case14.m");
    const Solution nr = solve_nr(p);
    REQUIRE(nr.converged);
    const Solution sol = solve_dpf(p, toy_config(), &nr.V);
    CHECK(sol.converged);
    CHECK(sol.iterations == 0);
    CHECK(sol.loss_history.size() == 1);
    CHECK(sol.V.vm == nr.V.vm);  // untouched, bit for bit
    CHECK(sol.V.va == nr.V.va);
}

TEST_CASE("dpf never writes the fixed components") {
    const PowerFlowProblem p = load("case118.m");
    DpfConfig cfg = toy_config(0.0, 25);  // force a fixed number of steps
    const Solution sol = solve_dpf(p, cfg);
    CHECK(sol.iterations == 25);
    CHECK(sol.V.va[p.slack] == 0.0);
    CHECK(sol.V.vm[p.slack] == p.vm_setpoint[p.slack]);
    for (std::size_t i : p.pv) CHECK(sol.V.vm[i] == p.vm_setpoint[i]);
}

TEST_CASE("dpf projects a sloppy init back onto the setpoints") {
    const PowerFlowProblem p = load("case14.m");
    VoltageState init = flat_start(p);
    init.va[p.slack] = 0.3;
    for (std::size_t i : p.pv) init.vm[i] = 2.0;
    DpfConfig cfg = toy_config(0.0, 1);
    const Solution sol = solve_dpf(p, cfg, &init);
    CHECK(sol.V.va[p.slack] == 0.0);
    for (std::size_t i : p.pv) CHECK(sol.V.vm[i] == p.vm_setpoint[i]);
}

TEST_CASE("dpf with a small sgd rate descends monotonically") {
    const PowerFlowProblem p = load("case14.m");
    DpfConfig cfg;
    cfg.optimizer.kind = OptimizerKind::Sgd;
    cfg.optimizer.lr = 1e-4;
    cfg.max_iter = 100;
    cfg.loss_tol = 0.0;
    cfg.mismatch_tol = 0.0;
    const Solution sol = solve_dpf(p, cfg);
    REQUIRE(sol.loss_history.size() == 101);
    for (std::size_t k = 1; k < sol.loss_history.size(); ++k)
        CHECK(sol.loss_history[k] <= sol.loss_history[k - 1]);
}

TEST_CASE("dpf reports divergence with the last finite state attached") {
    const PowerFlowProblem p = load("case14.m");
    DpfConfig cfg;
    cfg.optimizer.kind = OptimizerKind::Sgd;
    cfg.optimizer.lr = 1e8;
    cfg.max_iter = 500;
    try {
        (void)solve_dpf(p, cfg);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.iteration >= 0);
        REQUIRE(e.last_state.vm.size() == p.n_buses());
        for (double x : e.last_state.vm) CHECK(std::isfinite(x));
        for (double x : e.last_state.va) CHECK(std::isfinite(x));
    }
}

TEST_CASE("dpf stops early when the rate collapses") {
    const PowerFlowProblem p = load("case14.m");
    DpfConfig cfg;
    cfg.optimizer.kind = OptimizerKind::Sgd;
    cfg.optimizer.lr = 1e-6;
    cfg.scheduler.kind = SchedulerKind::StepLr;
    cfg.scheduler.step_size = 1;
    cfg.scheduler.gamma = 0.1;
    cfg.max_iter = 1000;
    cfg.loss_tol = 0.0;
    cfg.mismatch_tol = 0.0;
    cfg.early_stop_lr = 5e-8;
    const Solution sol = solve_dpf(p, cfg);
    CHECK(!sol.converged);
    CHECK(sol.iterations == 2);  // 1e-7 survives, 1e-8 trips the stop
}

TEST_CASE("dpf history recording can be switched off") {
    const PowerFlowProblem p = load("case2_pq.m");
    DpfConfig cfg = toy_config(0.0, 10);
    cfg.record_history = false;
    CHECK(solve_dpf(p, cfg).loss_history.empty());
}

TEST_CASE("dpf validates its configuration") {
    const PowerFlowProblem p = load("case2_pq.m");
    DpfConfig bad = toy_config();
    bad.max_iter = 0;
    CHECK_THROWS_AS((void)solve_dpf(p, bad), ValidationError);
    bad = toy_config();
    bad.mismatch_tol = -1.0;
    CHECK_THROWS_AS((void)solve_dpf(p, bad), ValidationError);
}

TEST_CASE("config_from_preset copies the preset verbatim") {
    const auto preset = find_preset("dpf-118");
    REQUIRE(preset.has_value());
    const DpfConfig cfg = config_from_preset(*preset);
    CHECK(cfg.optimizer.lr == preset->optimizer.lr);
    CHECK(cfg.scheduler.kind == preset->scheduler.kind);
    CHECK(cfg.max_iter == preset->max_iter);
    CHECK(cfg.loss_tol == 1e-10);   // defaults stay
    CHECK(cfg.mismatch_tol == 1e-6);
}

TEST_CASE("nr: one Newton update from a flat start lands on the linear estimate") {
    const PowerFlowProblem p = load("case2_pv.m");
    VoltageState v = flat_start(p);
    const Mismatch m0 = mismatch(v, p);
    REQUIRE(m0.dp.size() == 1);
    CHECK(m0.dp[0] == 0.5);

    JacobianBlocks jb = assemble_jacobian(v, p);
    REQUIRE(jb.assembled.n_rows == 1);
    CHECK(jb.assembled(0, 0) == 1.0);
    std::vector<double> step{-m0.dp[0]};
    dense_lu_solve_inplace(jb.assembled, step.data());
    v.va[p.pv[0]] += step[0];
    CHECK(v.va[p.pv[0]] == -0.5);
}

TEST_CASE("nr solves the closed-form fixtures") {
    const PowerFlowProblem pq = load("case2_pq.m");
    const Solution a = solve_nr(pq, 1e-12, 20);
    CHECK(a.converged);
    CHECK(a.V.va[1] == doctest::Approx(std::asin(-0.5)).epsilon(1e-9));
    CHECK(a.V.vm[1] == doctest::Approx(1.0).epsilon(1e-9));

    const PowerFlowProblem pv = load("case2_pv.m");
    const Solution b = solve_nr(pv, 1e-12, 20);
    CHECK(b.converged);
    CHECK(b.V.va[1] == doctest::Approx(std::asin(-0.5)).epsilon(1e-9));
    CHECK(b.V.vm[1] == 1.0);  // PV magnitude is pinned
}

TEST_CASE("nr converges fast and clean on the stock grids") {
    for (const char* name : {"case14.m", "case118.m", "case300.m"}) {
        const PowerFlowProblem p = load(name);
        const Solution sol = solve_nr(p, 1e-8, 20);
        CHECK(sol.converged);
        CHECK(sol.iterations <= 10);
        CHECK(sol.max_mismatch <= 1e-8);
        CHECK(sol.V.va[p.slack] == 0.0);
        for (std::size_t i : p.pv) CHECK(sol.V.vm[i] == p.vm_setpoint[i]);
    }
}

TEST_CASE("nr tail contraction is better than quadratic-ish") {
    for (const char* name : {"case14.m", "case118.m"}) {
        const PowerFlowProblem p = load(name);
        std::vector<double> mm_at;
        for (int k = 0; k <= 8; ++k) mm_at.push_back(solve_nr(p, 1e-14, k).max_mismatch);
        bool saw_tail = false;
        for (std::size_t k = 0; k + 1 < mm_at.size(); ++k) {
            if (mm_at[k] < 1e-2 && mm_at[k] > 1e-11) {  // above the fp floor
                CHECK(mm_at[k + 1] < std::pow(mm_at[k], 1.5));
                saw_tail = true;
            }
        }
        CHECK(saw_tail);
    }
}

TEST_CASE("nr gives up politely when the budget is too small") {
    const Solution sol = solve_nr(load("case118.m"), 1e-30, 2);
    CHECK(!sol.converged);
    CHECK(sol.iterations == 2);
}

TEST_CASE("nr surfaces a singular system with the iteration attached") {
    try {
        (void)solve_nr(islanded_problem());
        FAIL("expected SingularMatrixError");
    } catch (const SingularMatrixError& e) {
        CHECK(e.iteration == 0);
    }
}

TEST_CASE("dc: two-bus fixture angle is exact") {
    const VoltageState v = solve_dc(load("case2_pq.m"));
    CHECK(v.va[1] == -0.5);
    CHECK(v.vm[1] == 1.0);
}

TEST_CASE("dc: zero injections give zero angles") {
    GridCase grid = parse_matpower_file(case_file("case14.m"));
    for (BusRecord& b : grid.buses) b.pd = b.qd = 0.0;
    for (GenRecord& g : grid.generators) g.pg = g.qg = 0.0;
    const VoltageState v = solve_dc(build_problem(grid));
    for (double a : v.va) CHECK(a == 0.0);
}

TEST_CASE("dc matches an independent reduced-system oracle") {
    const PowerFlowProblem p = load("case14.m");
    const VoltageState v = solve_dc(p);

    const std::size_t n = p.n_buses();
    std::vector<std::size_t> pos(n, static_cast<std::size_t>(-1));
    std::vector<std::size_t> bus;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == p.slack) continue;
        pos[i] = bus.size();
        bus.push_back(i);
    }
    testsup::DenseR B(n - 1, std::vector<double>(n - 1, 0.0));
    for (const ReactanceEdge& e : p.edges) {
        const double w = 1.0 / e.x;
        const auto pf = pos[e.from], pt = pos[e.to];
        const auto none = static_cast<std::size_t>(-1);
        if (pf != none) B[pf][pf] += w;
        if (pt != none) B[pt][pt] += w;
        if (pf != none && pt != none) {
            B[pf][pt] -= w;
            B[pt][pf] -= w;
        }
    }
    std::vector<double> rhs(n - 1);
    for (std::size_t k = 0; k < bus.size(); ++k) rhs[k] = p.s_bus[bus[k]].real();
    const std::vector<double> theta = testsup::gauss_solve(B, rhs);
    for (std::size_t k = 0; k < bus.size(); ++k)
        CHECK(std::abs(v.va[bus[k]] - theta[k]) < 1e-10);
    CHECK(v.va[p.slack] == 0.0);
}

TEST_CASE("dc rejects zero reactance and disconnected networks") {
    GridCase grid = parse_matpower_file(case_file("case14.m"));
    grid.branches[0].x = 0.0;
    grid.branches[0].r = 0.01;  // keeps build_problem happy
    CHECK_THROWS_AS((void)solve_dc(build_problem(grid)), ValidationError);

    CHECK_THROWS_AS((void)solve_dc(islanded_problem()), SingularMatrixError);
}

TEST_CASE("dc is a rough approximation where nr is exact") {
    for (const char* name : {"case14.m", "case118.m"}) {
        const PowerFlowProblem p = load(name);
        const Solution nr = solve_nr(p);
        REQUIRE(nr.converged);
        const Mismatch dc_mm = mismatch(solve_dc(p), p);
        double dc_p = 0.0;
        for (double d : dc_mm.dp) dc_p = std::max(dc_p, std::abs(d));
        CHECK(dc_p > 0.0);
        CHECK(dc_p >= 1e3 * nr.max_mismatch);
    }
}

TEST_CASE("make_batch stacks problems with per-case offsets") {
    const PowerFlowProblem p = load("case14.m");
    const BatchedProblem b = make_batch(std::vector<const PowerFlowProblem*>{&p, &p});
    CHECK(b.n_buses() == 28);
    CHECK(b.case_sizes == std::vector<std::size_t>{14, 14});
    REQUIRE(b.slacks.size() == 2);
    CHECK(b.slacks[1] == b.slacks[0] + 14);
    CHECK(b.y_bus.nnz() == 2 * p.y_bus.nnz());
    REQUIRE(b.pv.size() == 2 * p.pv.size());
    for (std::size_t k = 0; k < p.pv.size(); ++k) {
        CHECK(b.pv[k] == p.pv[k]);
        CHECK(b.pv[p.pv.size() + k] == p.pv[k] + 14);
    }
    for (std::size_t i = 0; i < 14; ++i) {
        CHECK(b.s_bus[14 + i] == p.s_bus[i]);
        CHECK(b.vm_setpoint[14 + i] == p.vm_setpoint[i]);
    }

    CHECK_THROWS_AS((void)make_batch(std::vector<const PowerFlowProblem*>{}),
                    ValidationError);
}

TEST_CASE("a batch of one replays the single-problem trajectory bit for bit") {
    const PowerFlowProblem p = load("case14.m");
    const DpfConfig cfg = toy_config(1e-8, 60);  // stops mid-flight; that is fine
    const Solution single = solve_dpf(p, cfg);
    const std::vector<Solution> batched = solve_batch(make_batch(std::vector<const PowerFlowProblem*>{&p}), cfg);
    REQUIRE(batched.size() == 1);
    CHECK(batched[0].V.vm == single.V.vm);
    CHECK(batched[0].V.va == single.V.va);
    CHECK(batched[0].iterations == single.iterations);
    CHECK(batched[0].converged == single.converged);
    CHECK(batched[0].final_loss == single.final_loss);
    CHECK(batched[0].max_mismatch == single.max_mismatch);
    CHECK(batched[0].loss_history == single.loss_history);
}

TEST_CASE("identical problems in a batch stay in lockstep") {
    const PowerFlowProblem p = load("case14.m");
    const std::vector<const PowerFlowProblem*> copies(4, &p);
    const std::vector<Solution> sols = solve_batch(make_batch(copies), toy_config(0.0, 40));
    REQUIRE(sols.size() == 4);
    for (std::size_t c = 1; c < sols.size(); ++c) {
        CHECK(sols[c].V.vm == sols[0].V.vm);
        CHECK(sols[c].V.va == sols[0].V.va);
        CHECK(sols[c].iterations == sols[0].iterations);
        CHECK(sols[c].final_loss == sols[0].final_loss);
    }
}

TEST_CASE("batched and sequential runs land on the same quality") {
    const PowerFlowProblem a = load("case2_pq.m");
    const PowerFlowProblem b = load("case2_pv.m");
    const DpfConfig cfg = toy_config(1e-11, 8000);

    const Solution sa = solve_dpf(a, cfg);
    const Solution sb = solve_dpf(b, cfg);
    REQUIRE(sa.converged);
    REQUIRE(sb.converged);

    const std::vector<Solution> sols = solve_batch(make_batch(std::vector<const PowerFlowProblem*>{&a, &b}), cfg);
    REQUIRE(sols.size() == 2);
    CHECK(sols[0].converged);
    CHECK(sols[1].converged);
    CHECK(std::abs(sols[0].max_mismatch - sa.max_mismatch) < 1e-9);
    CHECK(std::abs(sols[1].max_mismatch - sb.max_mismatch) < 1e-9);
}

TEST_CASE("an already-solved case in a batch freezes immediately") {
    const PowerFlowProblem p14 = load("case14.m");
    const PowerFlowProblem toy = load("case2_pq.m");
    const Solution nr = solve_nr(toy);
    REQUIRE(nr.converged);

    const std::vector<VoltageState> inits{flat_start(p14), nr.V};
    const std::vector<Solution> sols =
        solve_batch(make_batch(std::vector<const PowerFlowProblem*>{&p14, &toy}), toy_config(1e-6, 50), &inits);
    REQUIRE(sols.size() == 2);
    CHECK(sols[1].converged);
    CHECK(sols[1].iterations == 0);
    CHECK(sols[1].V.vm == nr.V.vm);
    CHECK(sols[1].V.va == nr.V.va);
    CHECK(sols[0].iterations > 0);
}

TEST_CASE("solve_batch validates the init count") {
    const PowerFlowProblem p = load("case2_pq.m");
    const BatchedProblem b = make_batch(std::vector<const PowerFlowProblem*>{&p, &p});
    const std::vector<VoltageState> one_init{flat_start(p)};
    CHECK_THROWS_AS((void)solve_batch(b, toy_config(), &one_init), DimensionError);
}
