#pragma once
#include <cstddef>
#include <utility>
#include <vector>

#include "gridflux/grid.hpp"
#include "gridflux/sparse.hpp"

namespace gridflux {

/// Polar bus voltages. Solvers never write the slack angle or the pv/slack
/// magnitudes, so setpoints survive any number of iterations bit-exactly.
struct VoltageState {
    std::vector<double> vm;  // p.u.
    std::vector<double> va;  // radians
};

/// Flat start: vm = setpoints at pv and slack, 1 elsewhere; va = 0.
[[nodiscard]] VoltageState flat_start(const PowerFlowProblem& p);

/// Power-balance residual at the constrained components:
/// dp over pv ∪ pq (in that order, each sorted), dq over pq.
struct Mismatch {
    std::vector<double> dp;
    std::vector<double> dq;

    [[nodiscard]] double max_abs() const;
};

/// Loss gradient with respect to the trainable coordinates:
/// d_va over pv ∪ pq, d_vm over pq. Slack and pv magnitudes are structurally
/// absent, mirroring the trainable-parameter selection.
struct Gradient {
    std::vector<double> d_va;
    std::vector<double> d_vm;
};

/// Partial-derivative blocks dS/d|V| and dS/dθ (sparsity = Y_bus plus full
/// diagonal) and the dense assembled matrix in the Newton ordering
/// [θ over pv∪pq; vm over pq].
struct JacobianBlocks {
    SparseComplexMatrix dS_dvm;
    SparseComplexMatrix dS_dva;
    DenseRealMatrix assembled;
};

/// Preallocated scratch for the iterative hot path: complex bus-length
/// buffers plus the two sparse derivative blocks, whose pattern is fixed at
/// construction and whose values are rewritten in place each iteration.
/// One workspace per solver run; must not be shared across concurrent calls.
class PfWorkspace {
  public:
    explicit PfWorkspace(const SparseComplexMatrix& y_bus);

    /// Fills V = vm·e^{j·va}, I = Y·V, S = V ⊙ conj(I).
    void forward(const SparseComplexMatrix& y_bus, const double* vm, const double* va);

    /// Rewrites the derivative-block values from the buffered V and I.
    /// Throws ValidationError on a zero voltage magnitude.
    void refresh_partials(const SparseComplexMatrix& y_bus, const double* vm);

    std::vector<cxd> V;
    std::vector<cxd> I;
    std::vector<cxd> S;
    std::vector<cxd> wbar;  // conj of the complex mismatch weight
    std::vector<cxd> ty;    // transpose-apply output
    SparseComplexMatrix dS_dvm;
    SparseComplexMatrix dS_dva;
};

/// S_calc = V ⊙ conj(Y_bus·V).
[[nodiscard]] std::vector<cxd> calc_power(const VoltageState& v,
                                          const SparseComplexMatrix& y_bus);

[[nodiscard]] Mismatch mismatch(const VoltageState& v, const PowerFlowProblem& p);

/// Mean squared mismatch over the constrained components:
/// (Σ dp² + Σ dq²) / (|pv| + 2|pq|).
[[nodiscard]] double loss(const Mismatch& m);

/// Complex partial derivatives (dS_dvm, dS_dva) as sparse blocks.
[[nodiscard]] std::pair<SparseComplexMatrix, SparseComplexMatrix> partial_derivatives(
    const VoltageState& v, const SparseComplexMatrix& y_bus);

/// Analytic loss gradient via transpose-apply of the sparse derivative blocks
/// against the complex mismatch weight; never forms a dense Jacobian or any
/// N×N dense structure.
[[nodiscard]] Gradient grad_loss(const VoltageState& v, const PowerFlowProblem& p);

/// Builds the dense Newton Jacobian in ordering [θ(pv∪pq); vm(pq)].
[[nodiscard]] JacobianBlocks assemble_jacobian(const VoltageState& v,
                                               const PowerFlowProblem& p);

}  // namespace gridflux
