#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gridflux/bench.hpp"
#include "gridflux/solve.hpp"

namespace gridflux {

/// `bus_id, vm_pu, va_rad, p_calc_pu, q_calc_pu`, one row per bus, full
/// round-trip precision.
void write_solution_csv(std::ostream& out, const PowerFlowProblem& p,
                        const VoltageState& v);

/// Context echoed into the metadata record next to the solution figures.
struct RunMetadata {
    std::string grid_name;
    std::string method;              // dpf | nr | dc
    std::string preset;              // empty when explicit flags were used
    std::string init = "flat";       // flat | dc | warm
    const DpfConfig* dpf = nullptr;  // echoed when the method is dpf
    double nr_tol = 0.0;
    int nr_max_iter = 0;
    std::uint64_t seed = 0;
};

void write_metadata_json(std::ostream& out, const RunMetadata& meta,
                         const Solution& sol);

enum class TableFormat { Csv, Plain };  // Plain: '#'-headed, space-delimited

void write_record_header(std::ostream& out, TableFormat format);
void write_record(std::ostream& out, const RunRecord& rec, TableFormat format);
void write_records(std::ostream& out, const std::vector<RunRecord>& records,
                   TableFormat format);

/// Debug dump for oracle cross-checks: sizes and index sets, then one
/// `row col re im` line per stored Y_bus entry.
void export_problem_dump(std::ostream& out, const PowerFlowProblem& p);

}  // namespace gridflux
