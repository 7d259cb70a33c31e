#include "gridflux/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <utility>

namespace gridflux {

cxd SparseComplexMatrix::at(std::size_t i, std::size_t j) const {
    auto first = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
    auto last = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return {0.0, 0.0};
    return values[static_cast<std::size_t>(it - col_indices.begin())];
}

void TripletBuilder::add(std::size_t row, std::size_t col, cxd value) {
    if (row >= n_rows_ || col >= n_cols_)
        throw DimensionError("triplet coordinate out of range");
    entries_.push_back({row, col, value});
}

SparseComplexMatrix TripletBuilder::build() const {
    std::vector<Entry> sorted = entries_;
    std::stable_sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    SparseComplexMatrix m;
    m.n_rows = n_rows_;
    m.n_cols = n_cols_;
    m.row_offsets.assign(n_rows_ + 1, 0);
    m.col_indices.reserve(sorted.size());
    m.values.reserve(sorted.size());

    for (std::size_t k = 0; k < sorted.size(); ++k) {
        const Entry& e = sorted[k];
        if (k > 0 && sorted[k - 1].row == e.row && sorted[k - 1].col == e.col) {
            m.values.back() += e.value;  // duplicates are adjacent after the sort
        } else {
            m.col_indices.push_back(e.col);
            m.values.push_back(e.value);
            m.row_offsets[e.row + 1]++;
        }
    }
    for (std::size_t r = 0; r < n_rows_; ++r)
        m.row_offsets[r + 1] += m.row_offsets[r];
    return m;
}

void spmv(const SparseComplexMatrix& A, const cxd* x, cxd* y) {
    for (std::size_t i = 0; i < A.n_rows; ++i) {
        cxd acc{0.0, 0.0};
        for (std::size_t k = A.row_offsets[i]; k < A.row_offsets[i + 1]; ++k)
            acc += A.values[k] * x[A.col_indices[k]];
        y[i] = acc;
    }
}

std::vector<cxd> spmv(const SparseComplexMatrix& A, const std::vector<cxd>& x) {
    if (x.size() != A.n_cols) throw DimensionError("spmv: len(x) != n_cols");
    std::vector<cxd> y(A.n_rows);
    spmv(A, x.data(), y.data());
    return y;
}

void transpose_apply(const SparseComplexMatrix& A, const cxd* x, cxd* y) {
    for (std::size_t j = 0; j < A.n_cols; ++j) y[j] = cxd{0.0, 0.0};
    for (std::size_t i = 0; i < A.n_rows; ++i)
        for (std::size_t k = A.row_offsets[i]; k < A.row_offsets[i + 1]; ++k)
            y[A.col_indices[k]] += A.values[k] * x[i];
}

std::vector<cxd> transpose_apply(const SparseComplexMatrix& A, const std::vector<cxd>& x) {
    if (x.size() != A.n_rows) throw DimensionError("transpose_apply: len(x) != n_rows");
    std::vector<cxd> y(A.n_cols);
    transpose_apply(A, x.data(), y.data());
    return y;
}

SparseComplexMatrix block_diag(const std::vector<const SparseComplexMatrix*>& blocks) {
    if (blocks.empty()) throw DimensionError("block_diag: empty block list");
    std::size_t dim = 0, nnz = 0;
    for (const auto* b : blocks) {
        if (b->n_rows != b->n_cols)
            throw DimensionError("block_diag: non-square block");
        dim += b->n_rows;
        nnz += b->nnz();
    }

    SparseComplexMatrix m;
    m.n_rows = m.n_cols = dim;
    m.row_offsets.reserve(dim + 1);
    m.row_offsets.push_back(0);
    m.col_indices.reserve(nnz);
    m.values.reserve(nnz);

    std::size_t offset = 0;
    for (const auto* b : blocks) {
        for (std::size_t i = 0; i < b->n_rows; ++i) {
            for (std::size_t k = b->row_offsets[i]; k < b->row_offsets[i + 1]; ++k) {
                m.col_indices.push_back(b->col_indices[k] + offset);
                m.values.push_back(b->values[k]);
            }
            m.row_offsets.push_back(m.col_indices.size());
        }
        offset += b->n_rows;
    }
    return m;
}

SparseComplexMatrix block_diag(const std::vector<SparseComplexMatrix>& blocks) {
    std::vector<const SparseComplexMatrix*> ptrs;
    ptrs.reserve(blocks.size());
    for (const auto& b : blocks) ptrs.push_back(&b);
    return block_diag(ptrs);
}

void dense_lu_solve_inplace(DenseRealMatrix& A, double* b) {
    if (A.n_rows != A.n_cols) throw DimensionError("dense_lu_solve: non-square matrix");
    const std::size_t n = A.n_rows;
    double amax = 0.0;
    for (double v : A.data) amax = std::max(amax, std::abs(v));
    const double pivot_floor = 1e-14 * amax;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(A(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            double cand = std::abs(A(r, col));
            if (cand > best) {
                best = cand;
                piv = r;
            }
        }
        if (!(best > pivot_floor) || amax == 0.0)
            throw SingularMatrixError("matrix singular to working precision");
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(A(piv, c), A(col, c));
            std::swap(b[piv], b[col]);
        }
        const double inv_p = 1.0 / A(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = A(r, col) * inv_p;
            if (f == 0.0) continue;
            A(r, col) = 0.0;
            for (std::size_t c = col + 1; c < n; ++c) A(r, c) -= f * A(col, c);
            b[r] -= f * b[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t c = i + 1; c < n; ++c) acc -= A(i, c) * b[c];
        b[i] = acc / A(i, i);
    }
}

std::vector<double> dense_lu_solve(DenseRealMatrix A, std::vector<double> b) {
    if (b.size() != A.n_rows) throw DimensionError("dense_lu_solve: len(b) != n");
    dense_lu_solve_inplace(A, b.data());
    return b;
}

}  // namespace gridflux
