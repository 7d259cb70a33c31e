#pragma once
#include <cstddef>
#include <istream>
#include <string>
#include <vector>

#include "gridflux/sparse.hpp"

namespace gridflux {

enum class BusType : int { PQ = 1, PV = 2, Slack = 3 };

struct BusRecord {
    int id = 0;              // external id as written in the file
    BusType bus_type = BusType::PQ;
    double pd = 0, qd = 0;   // MW / MVAr demand
    double gs = 0, bs = 0;   // MW / MVAr shunt at 1 p.u.
    double vm_init = 1.0;    // p.u.
    double va_init = 0.0;    // degrees
};

struct GenRecord {
    int bus_id = 0;
    double pg = 0, qg = 0;   // MW / MVAr
    double vg = 1.0;         // p.u. setpoint
    bool in_service = true;
};

struct BranchRecord {
    int from_bus = 0, to_bus = 0;
    double r = 0, x = 0;     // p.u.
    double b_charging = 0;   // p.u. total line charging
    double tap = 0;          // ratio, 0 means 1.0
    double shift = 0;        // degrees
    bool in_service = true;
};

/// Parsed static grid description. Out-of-service branches and generators are
/// dropped during parsing, so every stored record is in service.
struct GridCase {
    std::string name;
    double base_mva = 100.0;
    std::vector<BusRecord> buses;
    std::vector<GenRecord> generators;
    std::vector<BranchRecord> branches;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t n_buses() const { return buses.size(); }
    [[nodiscard]] std::size_t n_branches() const { return branches.size(); }
};

/// Internal-index branch reactance, kept for the linearized (DC) solve.
struct ReactanceEdge {
    std::size_t from, to;
    double x;
};

/// Derived numerical problem: admittance matrix, net injections, index sets.
/// External bus ids are remapped to contiguous 0-based indices in file order;
/// `external_ids[i]` recovers the original id for output.
struct PowerFlowProblem {
    SparseComplexMatrix y_bus;
    std::vector<cxd> s_bus;           // p.u. net injection per bus
    std::vector<std::size_t> pv;      // sorted
    std::vector<std::size_t> pq;      // sorted
    std::size_t slack = 0;
    std::vector<double> vm_setpoint;  // length N; meaningful at pv and slack
    double slack_angle = 0.0;         // radians, fixed
    std::vector<ReactanceEdge> edges; // in-service branches (r, taps, shifts dropped)
    std::vector<int> external_ids;
    std::string name;

    [[nodiscard]] std::size_t n_buses() const { return s_bus.size(); }
};

/// Reads the MATPOWER case format: `mpc.baseMVA`, `mpc.bus`, `mpc.gen` and
/// `mpc.branch` assignments; comments and unrecognized fields (gencost, ...)
/// are skipped. Bus rows carry 13 columns, gen rows at least 8, branch rows at
/// least 11; extra columns are ignored.
/// Throws ParseError (with section and line) on malformed input and
/// ValidationError when there is not exactly one slack bus.
[[nodiscard]] GridCase parse_matpower(std::istream& text, const std::string& name = "");
[[nodiscard]] GridCase parse_matpower_file(const std::string& path);

/// Writes the parsed case back out in a normalized MATPOWER form; parsing the
/// result reproduces the same GridCase (round-trip identity).
void emit_matpower(const GridCase& grid, std::ostream& out);

/// Builds Y_bus, S_bus and the index sets. Branch admittance uses
/// y_s = 1/(r+jx) with tap ratio and phase shift on the from side; bus shunts
/// divide by base MVA onto the diagonal. PV buses without an in-service
/// generator are reclassified PQ.
[[nodiscard]] PowerFlowProblem build_problem(const GridCase& grid);

/// The per-unit net injection vector alone; lets time-series scenarios swap
/// injections without rebuilding Y_bus.
[[nodiscard]] std::vector<cxd> injections_per_unit(const GridCase& grid);

}  // namespace gridflux
