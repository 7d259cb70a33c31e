#include <doctest.h>

#include <cmath>
#include <complex>
#include <sstream>
#include <string>

#include <gridflux/grid.hpp>

#include "support/oracles.hpp"
#include "support/paths.hpp"

using namespace gridflux;
using testsup::case_file;

namespace {

GridCase parse_text(const std::string& text, const std::string& name = "inline") {
    std::istringstream in(text);
    return parse_matpower(in, name);
}

// Minimal well-formed case: slack with a generator plus one PQ load bus.
const char* kTwoBus = R"(function mpc = twobus
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	138	1	1.1	0.9;
	2	1	50	10	0	0	1	1	0	138	1	1.1	0.9;
];
mpc.gen = [
	1	0	0	300	-300	1	100	1;
];
mpc.branch = [
	1	2	0	1	0	0	0	0	0	0	1;
];
)";

bool same_case(const GridCase& a, const GridCase& b) {
    if (a.base_mva != b.base_mva || a.buses.size() != b.buses.size() ||
        a.generators.size() != b.generators.size() ||
        a.branches.size() != b.branches.size())
        return false;
    for (std::size_t i = 0; i < a.buses.size(); ++i) {
        const BusRecord &x = a.buses[i], &y = b.buses[i];
        if (x.id != y.id || x.bus_type != y.bus_type || x.pd != y.pd || x.qd != y.qd ||
            x.gs != y.gs || x.bs != y.bs || x.vm_init != y.vm_init ||
            x.va_init != y.va_init)
            return false;
    }
    for (std::size_t i = 0; i < a.generators.size(); ++i) {
        const GenRecord &x = a.generators[i], &y = b.generators[i];
        if (x.bus_id != y.bus_id || x.pg != y.pg || x.qg != y.qg || x.vg != y.vg ||
            x.in_service != y.in_service)
            return false;
    }
    for (std::size_t i = 0; i < a.branches.size(); ++i) {
        const BranchRecord &x = a.branches[i], &y = b.branches[i];
        if (x.from_bus != y.from_bus || x.to_bus != y.to_bus || x.r != y.r ||
            x.x != y.x || x.b_charging != y.b_charging || x.tap != y.tap ||
            x.shift != y.shift || x.in_service != y.in_service)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("parse: stock grids come out with the expected bus counts") {
    CHECK(parse_matpower_file(case_file("case14.m")).n_buses() == 14);
    CHECK(parse_matpower_file(case_file("case118.m")).n_buses() == 118);
    CHECK(parse_matpower_file(case_file("case300.m")).n_buses() == 300);
}

TEST_CASE("parse: missing sections are reported by name") {
    const char* no_bus = R"(mpc.baseMVA = 100;
mpc.gen = [ 1 0 0 0 0 1 100 1; ];
mpc.branch = [ 1 2 0 1 0 0 0 0 0 0 1; ];
)";
    try {
        (void)parse_text(no_bus);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.section == "mpc.bus");
    }

    const char* no_base = R"(mpc.bus = [ 1 3 0 0 0 0 1 1 0 138 1 1.1 0.9; ];
mpc.gen = [ 1 0 0 0 0 1 100 1; ];
mpc.branch = [ 1 1 0 1 0 0 0 0 0 0 1; ];
)";
    try {
        (void)parse_text(no_base);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.section == "mpc.baseMVA");
    }
}

TEST_CASE("parse: short and malformed rows carry their line number") {
    std::string text(kTwoBus);
    const std::string needle = "2	1	50	10	0	0	1	1	0	138	1	1.1	0.9;";
    text.replace(text.find(needle), needle.size(), "2 1 50;");
    try {
        (void)parse_text(text);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.section == "mpc.bus");
        CHECK(e.line == 6);
    }

    std::string bad(kTwoBus);
    bad.replace(bad.find("50"), 2, "fifty");
    CHECK_THROWS_AS((void)parse_text(bad), ParseError);
}

TEST_CASE("parse: slack count is validated") {
    std::string no_slack(kTwoBus);
    no_slack.replace(no_slack.find("1	3"), 3, "1	2");
    CHECK_THROWS_AS((void)parse_text(no_slack), ValidationError);

    std::string two_slacks(kTwoBus);
    two_slacks.replace(two_slacks.find("2	1	50"), 6, "2	3	50");
    CHECK_THROWS_AS((void)parse_text(two_slacks), ValidationError);
}

TEST_CASE("parse: comments, gencost and out-of-service records are dropped") {
    std::string text(kTwoBus);
    text.insert(text.rfind("];"), "\t1\t2\t0\t2\t0\t0\t0\t0\t0\t0\t0;\n");
    text += "mpc.gencost = [\n\t2 0 0 3 0.01 40 0;\n];\n";
    text += "% trailing comment\n";
    const GridCase grid = parse_text(text);
    CHECK(grid.n_branches() == 1);  // the status-0 branch is gone
    CHECK(grid.generators.size() == 1);
}

TEST_CASE("parse: disagreeing co-located generator setpoints record a warning") {
    std::string text(kTwoBus);
    text.insert(text.find("];\nmpc.branch"), "\t1\t10\t0\t300\t-300\t1.05\t100\t1;\n");
    const GridCase grid = parse_text(text);
    REQUIRE(grid.generators.size() == 2);
    CHECK(!grid.warnings.empty());
    CHECK(build_problem(grid).vm_setpoint[0] == 1.0);  // first unit wins
}

TEST_CASE("emit/parse round-trip is the identity on the stock grids") {
    for (const char* name : {"case14.m", "case118.m"}) {
        const GridCase first = parse_matpower_file(case_file(name));
        std::ostringstream out;
        emit_matpower(first, out);
        const GridCase second = parse_text(out.str(), first.name);
        CHECK(same_case(first, second));
    }
}

TEST_CASE("build: plain series reactance gives the textbook two-by-two matrix") {
    const PowerFlowProblem p = build_problem(parse_text(kTwoBus));
    const cxd mj{0.0, -1.0}, pj{0.0, 1.0};
    CHECK(std::abs(p.y_bus.at(0, 0) - mj) < 1e-15);
    CHECK(std::abs(p.y_bus.at(0, 1) - pj) < 1e-15);
    CHECK(std::abs(p.y_bus.at(1, 0) - pj) < 1e-15);
    CHECK(std::abs(p.y_bus.at(1, 1) - mj) < 1e-15);
}

TEST_CASE("build: tap ratio scales the from side of the branch") {
    std::string text(kTwoBus);
    const std::string branch = "1	2	0	1	0	0	0	0	0	0	1;";
    text.replace(text.find(branch), branch.size(), "1	2	0	1	0	0	0	0	2	0	1;");
    const PowerFlowProblem p = build_problem(parse_text(text));
    CHECK(std::abs(p.y_bus.at(0, 0) - cxd{0.0, -0.25}) < 1e-15);
    CHECK(std::abs(p.y_bus.at(0, 1) - cxd{0.0, 0.5}) < 1e-15);
}

TEST_CASE("build: admittance matrix matches the dense oracle on a real grid") {
    for (const char* name : {"case14.m", "case118.m"}) {
        const GridCase grid = parse_matpower_file(case_file(name));
        const PowerFlowProblem p = build_problem(grid);
        const testsup::DenseC oracle = testsup::dense_ybus(grid);
        double worst = 0.0;
        for (std::size_t i = 0; i < p.n_buses(); ++i)
            for (std::size_t j = 0; j < p.n_buses(); ++j)
                worst = std::max(worst, std::abs(p.y_bus.at(i, j) - oracle[i][j]));
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("build: structural symmetry always, value symmetry without shifts") {
    for (const char* name : {"case14.m", "case118.m", "case300.m"}) {
        const GridCase grid = parse_matpower_file(case_file(name));
        const SparseComplexMatrix& y = build_problem(grid).y_bus;
        bool shift_free = true;
        for (const BranchRecord& br : grid.branches)
            if (br.shift != 0.0) shift_free = false;

        double asym = 0.0;
        for (std::size_t i = 0; i < y.n_rows; ++i)
            for (std::size_t k = y.row_offsets[i]; k < y.row_offsets[i + 1]; ++k) {
                const std::size_t j = y.col_indices[k];
                bool mirrored = false;
                for (std::size_t k2 = y.row_offsets[j]; k2 < y.row_offsets[j + 1]; ++k2)
                    if (y.col_indices[k2] == i) mirrored = true;
                CHECK(mirrored);
                asym = std::max(asym, std::abs(y.values[k] - y.at(j, i)));
            }
        if (shift_free) CHECK(asym <= 1e-14);
    }
}

TEST_CASE("build: bus classes partition the index range") {
    for (const char* name : {"case14.m", "case118.m", "case300.m"}) {
        const PowerFlowProblem p = build_problem(parse_matpower_file(case_file(name)));
        std::vector<int> seen(p.n_buses(), 0);
        for (std::size_t i : p.pv) ++seen[i];
        for (std::size_t i : p.pq) ++seen[i];
        ++seen[p.slack];
        for (std::size_t i = 0; i < p.n_buses(); ++i) CHECK(seen[i] == 1);
        for (std::size_t k = 1; k < p.pv.size(); ++k) CHECK(p.pv[k - 1] < p.pv[k]);
        for (std::size_t k = 1; k < p.pq.size(); ++k) CHECK(p.pq[k - 1] < p.pq[k]);
    }
}

TEST_CASE("build: nnz never exceeds one diagonal plus two entries per branch") {
    for (const char* name : {"case14.m", "case118.m", "case300.m"}) {
        const GridCase grid = parse_matpower_file(case_file(name));
        const PowerFlowProblem p = build_problem(grid);
        CHECK(p.y_bus.nnz() <= grid.n_buses() + 2 * grid.n_branches());
    }
}

TEST_CASE("build: generator-less type-2 bus is treated as a load bus") {
    std::string text(kTwoBus);
    text.replace(text.find("2	1	50"), 6, "2	2	50");  // now type 2, but no generator
    const PowerFlowProblem p = build_problem(parse_text(text));
    CHECK(p.pv.empty());
    REQUIRE(p.pq.size() == 1);
    CHECK(p.pq[0] == 1);
}

TEST_CASE("build: error paths") {
    std::string loose_branch(kTwoBus);
    loose_branch.replace(loose_branch.find("1	2	0	1"), 7, "1	9	0	1");
    CHECK_THROWS_AS((void)build_problem(parse_text(loose_branch)), ValidationError);

    std::string degenerate(kTwoBus);
    degenerate.replace(degenerate.find("1	2	0	1"), 7, "1	2	0	0");
    CHECK_THROWS_AS((void)build_problem(parse_text(degenerate)), ValidationError);

    std::string dup_ids(kTwoBus);
    dup_ids.replace(dup_ids.find("2	1	50"), 3, "1	1");
    CHECK_THROWS_AS((void)build_problem(parse_text(dup_ids)), ValidationError);
}

TEST_CASE("injections: loads subtract, generation adds, idle buses stay zero") {
    GridCase grid;
    grid.base_mva = 100.0;
    BusRecord loaded;
    loaded.id = 1;
    loaded.pd = 100.0;
    loaded.qd = 20.0;
    BusRecord idle;
    idle.id = 2;
    grid.buses = {loaded, idle};

    auto s = injections_per_unit(grid);
    CHECK(s[0] == cxd{-1.0, -0.2});
    CHECK(s[1] == cxd{0.0, 0.0});

    GenRecord gen;
    gen.bus_id = 1;
    gen.pg = 50.0;
    grid.generators.push_back(gen);
    s = injections_per_unit(grid);
    CHECK(s[0] == cxd{-0.5, -0.2});
}

TEST_CASE("injections: generator on an unknown bus is rejected") {
    GridCase grid;
    grid.base_mva = 100.0;
    BusRecord b;
    b.id = 1;
    grid.buses = {b};
    GenRecord g;
    g.bus_id = 42;
    grid.generators = {g};
    CHECK_THROWS_AS((void)injections_per_unit(grid), ValidationError);
}

TEST_CASE("external ids are preserved through the index remap") {
    // ids deliberately non-contiguous and out of order
    const char* gappy = R"(mpc.baseMVA = 100;
mpc.bus = [
	30	3	0	0	0	0	1	1	0	138	1	1.1	0.9;
	7	1	10	2	0	0	1	1	0	138	1	1.1	0.9;
	100	1	5	1	0	0	1	1	0	138	1	1.1	0.9;
];
mpc.gen = [
	30	0	0	300	-300	1.02	100	1;
];
mpc.branch = [
	30	7	0	0.5	0	0	0	0	0	0	1;
	7	100	0	0.5	0	0	0	0	0	0	1;
];
)";
    const PowerFlowProblem p = build_problem(parse_text(gappy));
    CHECK(p.external_ids == std::vector<int>{30, 7, 100});
    CHECK(p.slack == 0);
    CHECK(p.vm_setpoint[0] == 1.02);
    CHECK(p.edges.size() == 2);
    CHECK(p.edges[0].from == 0);
    CHECK(p.edges[0].to == 1);
    CHECK(p.edges[1].x == 0.5);
}
