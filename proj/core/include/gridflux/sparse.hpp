#pragma once
#include <complex>
#include <cstddef>
#include <vector>

#include "gridflux/errors.hpp"

namespace gridflux {

using cxd = std::complex<double>;

/// Compressed-row complex sparse matrix.
///
/// Invariants: row_offsets has length n_rows+1, is non-decreasing, starts at 0
/// and ends at nnz; column indices within a row are strictly increasing.
/// Construction normally goes through TripletBuilder, which merges duplicate
/// coordinates (parallel branches between the same bus pair must sum).
/// Immutable once built; safe to share across threads.
struct SparseComplexMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_offsets;
    std::vector<std::size_t> col_indices;
    std::vector<cxd> values;

    [[nodiscard]] std::size_t nnz() const { return values.size(); }

    /// Entry lookup by binary search; absent entries read as zero.
    [[nodiscard]] cxd at(std::size_t i, std::size_t j) const;
};

/// Coordinate-format accumulator: call add() any number of times (duplicates
/// sum), then build() to get a CSR matrix with sorted, unique columns.
class TripletBuilder {
  public:
    TripletBuilder(std::size_t n_rows, std::size_t n_cols)
        : n_rows_(n_rows), n_cols_(n_cols) {}

    void add(std::size_t row, std::size_t col, cxd value);
    void reserve(std::size_t n) { entries_.reserve(n); }

    [[nodiscard]] SparseComplexMatrix build() const;

  private:
    struct Entry {
        std::size_t row, col;
        cxd value;
    };
    std::size_t n_rows_, n_cols_;
    std::vector<Entry> entries_;
};

/// y = A·x. Within each row the summation follows stored column order, so
/// results are bit-reproducible across runs. x and y must not alias.
void spmv(const SparseComplexMatrix& A, const cxd* x, cxd* y);
[[nodiscard]] std::vector<cxd> spmv(const SparseComplexMatrix& A,
                                    const std::vector<cxd>& x);

/// y = Aᵀ·x without materializing the transpose; accumulation follows the
/// row-major scan of A (deterministic).
void transpose_apply(const SparseComplexMatrix& A, const cxd* x, cxd* y);
[[nodiscard]] std::vector<cxd> transpose_apply(const SparseComplexMatrix& A,
                                               const std::vector<cxd>& x);

/// Block-diagonal composition of square blocks; block k is offset by the sum
/// of the preceding block dimensions. nnz adds up exactly.
[[nodiscard]] SparseComplexMatrix block_diag(
    const std::vector<const SparseComplexMatrix*>& blocks);
[[nodiscard]] SparseComplexMatrix block_diag(
    const std::vector<SparseComplexMatrix>& blocks);

/// Row-major dense real matrix, used as the linear-solve workspace of the
/// Newton-Raphson baseline.
struct DenseRealMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> data;

    DenseRealMatrix() = default;
    DenseRealMatrix(std::size_t rows, std::size_t cols)
        : n_rows(rows), n_cols(cols), data(rows * cols, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * n_cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * n_cols + j]; }
};

/// Solves A·x = b by LU with partial pivoting, destroying A and b.
/// Throws SingularMatrixError when a pivot falls below 1e-14·max|A|
/// (max taken over the original matrix).
void dense_lu_solve_inplace(DenseRealMatrix& A, double* b);

/// Convenience copy-in/copy-out form of the above.
[[nodiscard]] std::vector<double> dense_lu_solve(DenseRealMatrix A,
                                                 std::vector<double> b);

}  // namespace gridflux
