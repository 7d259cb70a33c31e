#pragma once
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "gridflux/grid.hpp"
#include "gridflux/solve.hpp"

namespace gridflux {

/// k disjoint copies of `base` tied together by 20·k random branches whose
/// impedances are cloned from uniformly chosen existing branches. Copy 0
/// keeps the slack; the other copies' slack buses are demoted to PV with
/// generation pinned to the base slack's solved output, so every copy stays
/// balanced. Consecutive copies are always linked (the first k−1 random
/// branches), keeping the result connected. Self-loops and duplicate
/// connections are never inserted. Deterministic under `seed`.
[[nodiscard]] GridCase node_scale(const GridCase& base, std::size_t k,
                                  std::uint64_t seed);

/// Adds `extra_edges` random branches between distinct uniformly chosen bus
/// pairs (re-connecting an already-connected pair is allowed and then adds no
/// new Y_bus entries), impedances cloned from existing branches.
[[nodiscard]] GridCase edge_scale(const GridCase& base, std::size_t extra_edges,
                                  std::uint64_t seed);

/// One timed run of one benchmark cell. iterations = −1 marks a failed run
/// (quality fields are NaN).
struct RunRecord {
    std::string label;
    std::string grid_name;
    std::size_t n_buses = 0;
    std::size_t nnz = 0;
    std::string solver;
    std::size_t batch_size = 1;
    int iterations = 0;
    double wall_time_ms = 0.0;
    double time_per_iter_ms = 0.0;
    double final_loss = 0.0;
    double max_mismatch = 0.0;
    std::uint64_t seed = 0;
};

/// What to run: the cross product grids × solvers × batch_sizes, each cell
/// `repeats` times. Grids may be scaled variants of a case file.
struct BenchSuite {
    struct GridSpec {
        std::string name;            // defaults to the file stem
        std::string path;
        std::size_t node_scale = 0;  // 0 = off, otherwise the copy count k
        std::size_t edge_scale = 0;  // extra random edges, 0 = off
        std::uint64_t seed = 1;
    };
    std::vector<GridSpec> grids;
    std::vector<std::string> solvers;      // any of: dpf, nr, dc
    std::vector<std::size_t> batch_sizes{1};
    int repeats = 3;
    std::uint64_t seed = 1;
    std::string preset;                    // optional DPF preset name
};

/// Parses the JSON suite schema (documented in the README).
[[nodiscard]] BenchSuite load_suite(std::istream& in);

/// Runs every cell once for warm-up and then `repeats` timed times, invoking
/// `on_record` as each record is produced so output can be written
/// incrementally. Timing covers the solve only — parsing, scaling, and batch
/// assembly are excluded. Solvers other than dpf run only at batch size 1.
/// A failing run is recorded in place and the suite continues; unloadable
/// grids throw.
std::vector<RunRecord> run_benchmark(
    const BenchSuite& suite,
    const std::function<void(const RunRecord&)>& on_record = nullptr);

}  // namespace gridflux
