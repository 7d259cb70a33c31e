#include "gridflux/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <istream>
#include <limits>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "rand_util.hpp"

namespace gridflux {
namespace {

std::uint64_t pair_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

BranchRecord cloned_branch(const GridCase& base, std::mt19937_64& rng, int from,
                           int to) {
    const BranchRecord& src = base.branches[detail::pick(rng, base.branches.size())];
    BranchRecord br;
    br.from_bus = from;
    br.to_bus = to;
    br.r = src.r;
    br.x = src.x;
    br.b_charging = src.b_charging;
    br.tap = 0.0;
    br.shift = 0.0;
    br.in_service = true;
    return br;
}

}  // namespace

GridCase node_scale(const GridCase& base, std::size_t k, std::uint64_t seed) {
    if (k < 1) throw ValidationError("node_scale: k must be >= 1");
    if (base.buses.empty() || base.branches.empty())
        throw ValidationError("node_scale: case has no buses or no branches");

    // the demoted slack copies generate what the base slack generated
    int slack_id = 0;
    double slack_pg_mw = 0.0;
    if (k > 1) {
        const PowerFlowProblem p = build_problem(base);
        const Solution nr = solve_nr(p);
        if (!nr.converged)
            throw ValidationError("node_scale: base case did not converge");
        const std::vector<cxd> s = calc_power(nr.V, p.y_bus);
        slack_id = p.external_ids[p.slack];
        double pd = 0.0;
        for (const BusRecord& b : base.buses)
            if (b.id == slack_id) pd = b.pd;
        slack_pg_mw = s[p.slack].real() * base.base_mva + pd;
    }

    int max_id = 0;
    for (const BusRecord& b : base.buses) max_id = std::max(max_id, b.id);

    GridCase out;
    out.name = base.name + "_x" + std::to_string(k);
    out.base_mva = base.base_mva;
    for (std::size_t c = 0; c < k; ++c) {
        const int off = static_cast<int>(c) * max_id;
        for (BusRecord b : base.buses) {
            b.id += off;
            if (c > 0 && b.bus_type == BusType::Slack) b.bus_type = BusType::PV;
            out.buses.push_back(b);
        }
        const std::size_t gen_begin = out.generators.size();
        for (GenRecord g : base.generators) {
            g.bus_id += off;
            out.generators.push_back(g);
        }
        if (c > 0) {
            // pin total generation at the demoted bus to the solved output
            const int demoted = slack_id + off;
            GenRecord* first = nullptr;
            double others = 0.0;
            for (std::size_t g = gen_begin; g < out.generators.size(); ++g) {
                if (out.generators[g].bus_id != demoted) continue;
                if (first == nullptr)
                    first = &out.generators[g];
                else
                    others += out.generators[g].pg;
            }
            if (first != nullptr) {
                first->pg = slack_pg_mw - others;
            } else {
                GenRecord g;
                g.bus_id = demoted;
                g.pg = slack_pg_mw;
                g.qg = 0.0;
                double vm = 1.0;
                for (const BusRecord& b : base.buses)
                    if (b.id == slack_id) vm = b.vm_init;
                g.vg = vm;
                g.in_service = true;
                out.generators.push_back(g);
            }
        }
        for (BranchRecord br : base.branches) {
            br.from_bus += off;
            br.to_bus += off;
            out.branches.push_back(br);
        }
    }

    std::mt19937_64 rng(seed);
    std::unordered_set<std::uint64_t> connected;
    connected.reserve(out.branches.size() * 2);
    for (const BranchRecord& br : out.branches)
        connected.insert(pair_key(br.from_bus, br.to_bus));

    auto add_between = [&](std::size_t copy_a, std::size_t copy_b) {
        for (;;) {
            const int a = base.buses[detail::pick(rng, base.buses.size())].id +
                          static_cast<int>(copy_a) * max_id;
            const int b = base.buses[detail::pick(rng, base.buses.size())].id +
                          static_cast<int>(copy_b) * max_id;
            if (a == b) continue;
            if (!connected.insert(pair_key(a, b)).second) continue;
            out.branches.push_back(cloned_branch(base, rng, a, b));
            return;
        }
    };

    const std::size_t total_new = 20 * k;
    std::size_t added = 0;
    if (k > 1) {
        for (std::size_t c = 0; c + 1 < k; ++c, ++added) add_between(c, c + 1);
        for (; added < total_new; ++added) {
            const std::size_t ca = detail::pick(rng, k);
            std::size_t cb = detail::pick(rng, k);
            while (cb == ca) cb = detail::pick(rng, k);
            add_between(ca, cb);
        }
    } else {
        for (; added < total_new; ++added) add_between(0, 0);
    }
    return out;
}

GridCase edge_scale(const GridCase& base, std::size_t extra_edges,
                    std::uint64_t seed) {
    GridCase out = base;
    if (extra_edges == 0) return out;
    if (base.buses.size() < 2 || base.branches.empty())
        throw ValidationError("edge_scale: case too small to extend");

    out.name = base.name + "_e" + std::to_string(extra_edges);
    std::mt19937_64 rng(seed);
    for (std::size_t e = 0; e < extra_edges; ++e) {
        const std::size_t ia = detail::pick(rng, base.buses.size());
        std::size_t ib = detail::pick(rng, base.buses.size());
        while (ib == ia) ib = detail::pick(rng, base.buses.size());
        out.branches.push_back(
            cloned_branch(base, rng, base.buses[ia].id, base.buses[ib].id));
    }
    return out;
}

BenchSuite load_suite(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("suite", 0, e.what());
    }

    BenchSuite s;
    try {
        for (const auto& g : j.at("grids")) {
            BenchSuite::GridSpec spec;
            spec.path = g.at("path").get<std::string>();
            spec.name =
                g.value("name", std::filesystem::path(spec.path).stem().string());
            spec.node_scale = g.value("node_scale", std::size_t{0});
            spec.edge_scale = g.value("edge_scale", std::size_t{0});
            spec.seed = g.value("seed", std::uint64_t{1});
            s.grids.push_back(std::move(spec));
        }
        s.solvers = j.at("solvers").get<std::vector<std::string>>();
        if (j.contains("batch_sizes"))
            s.batch_sizes = j["batch_sizes"].get<std::vector<std::size_t>>();
        s.repeats = j.value("repeats", 3);
        s.seed = j.value("seed", std::uint64_t{1});
        s.preset = j.value("preset", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("suite", 0, e.what());
    }

    if (s.grids.empty()) throw ValidationError("suite: no grids");
    if (s.solvers.empty()) throw ValidationError("suite: no solvers");
    for (const std::string& sv : s.solvers)
        if (sv != "dpf" && sv != "nr" && sv != "dc")
            throw ValidationError("suite: unknown solver '" + sv + "'");
    if (s.batch_sizes.empty()) throw ValidationError("suite: no batch sizes");
    for (std::size_t b : s.batch_sizes)
        if (b < 1) throw ValidationError("suite: batch size must be >= 1");
    if (s.repeats < 1) throw ValidationError("suite: repeats must be >= 1");
    return s;
}

std::vector<RunRecord> run_benchmark(
    const BenchSuite& suite, const std::function<void(const RunRecord&)>& on_record) {
    DpfConfig dpf_cfg;
    if (!suite.preset.empty()) {
        const auto preset = find_preset(suite.preset);
        if (!preset) throw ValidationError("unknown preset '" + suite.preset + "'");
        dpf_cfg = config_from_preset(*preset);
    }
    constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

    std::vector<RunRecord> records;
    for (const BenchSuite::GridSpec& gs : suite.grids) {
        GridCase grid = parse_matpower_file(gs.path);
        if (gs.node_scale > 0) grid = node_scale(grid, gs.node_scale, gs.seed);
        if (gs.edge_scale > 0) grid = edge_scale(grid, gs.edge_scale, gs.seed);
        const PowerFlowProblem problem = build_problem(grid);
        const std::string gname = gs.name.empty() ? grid.name : gs.name;

        for (const std::string& solver : suite.solvers) {
            for (std::size_t B : suite.batch_sizes) {
                if (solver != "dpf" && B != 1) continue;

                RunRecord proto;
                proto.label = gname + "/" + solver + "/b" + std::to_string(B);
                proto.grid_name = gname;
                proto.n_buses = problem.n_buses();
                proto.nnz = problem.y_bus.nnz();
                proto.solver = solver;
                proto.batch_size = B;
                proto.seed = gs.seed;

                BatchedProblem batch;
                if (solver == "dpf" && B > 1) {
                    const std::vector<const PowerFlowProblem*> copies(B, &problem);
                    batch = make_batch(copies);
                }

                for (int rep = -1; rep < suite.repeats; ++rep) {
                    RunRecord rec = proto;
                    try {
                        if (solver == "dpf" && B > 1) {
                            const std::vector<Solution> sols = solve_batch(batch, dpf_cfg);
                            rec.wall_time_ms = sols.front().wall_time_ms;
                            for (const Solution& s : sols) {
                                rec.iterations = std::max(rec.iterations, s.iterations);
                                rec.final_loss = std::max(rec.final_loss, s.final_loss);
                                rec.max_mismatch =
                                    std::max(rec.max_mismatch, s.max_mismatch);
                            }
                        } else if (solver == "dpf") {
                            const Solution s = solve_dpf(problem, dpf_cfg);
                            rec.iterations = s.iterations;
                            rec.wall_time_ms = s.wall_time_ms;
                            rec.final_loss = s.final_loss;
                            rec.max_mismatch = s.max_mismatch;
                        } else if (solver == "nr") {
                            const Solution s = solve_nr(problem);
                            rec.iterations = s.iterations;
                            rec.wall_time_ms = s.wall_time_ms;
                            rec.final_loss = s.final_loss;
                            rec.max_mismatch = s.max_mismatch;
                        } else {  // dc, quality judged against the AC equations
                            const auto t0 = std::chrono::steady_clock::now();
                            const VoltageState v = solve_dc(problem);
                            rec.wall_time_ms =
                                std::chrono::duration<double, std::milli>(
                                    std::chrono::steady_clock::now() - t0)
                                    .count();
                            rec.iterations = 1;
                            const Mismatch mm = mismatch(v, problem);
                            rec.final_loss = loss(mm);
                            rec.max_mismatch = mm.max_abs();
                        }
                        rec.time_per_iter_ms =
                            rec.iterations > 0 ? rec.wall_time_ms / rec.iterations : 0.0;
                    } catch (const Error&) {
                        rec.iterations = -1;
                        rec.wall_time_ms = rec.time_per_iter_ms = 0.0;
                        rec.final_loss = rec.max_mismatch = kNan;
                    }
                    if (rep < 0) continue;  // warm-up run is never recorded
                    records.push_back(rec);
                    if (on_record) on_record(rec);
                }
            }
        }
    }
    return records;
}

}  // namespace gridflux
