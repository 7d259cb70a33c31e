#include "gridflux/pf.hpp"

#include <algorithm>
#include <cmath>

namespace gridflux {
namespace {

constexpr cxd kJ{0.0, 1.0};

void check_positive_vm(const double* vm, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (vm[i] == 0.0)
            throw ValidationError("zero voltage magnitude at bus index " +
                                  std::to_string(i));
}

}  // namespace

VoltageState flat_start(const PowerFlowProblem& p) {
    VoltageState v;
    v.vm = p.vm_setpoint;
    v.va.assign(p.n_buses(), 0.0);
    v.va[p.slack] = p.slack_angle;
    return v;
}

double Mismatch::max_abs() const {
    double m = 0.0;
    for (double d : dp) m = std::max(m, std::abs(d));
    for (double d : dq) m = std::max(m, std::abs(d));
    return m;
}

PfWorkspace::PfWorkspace(const SparseComplexMatrix& y_bus) {
    const std::size_t n = y_bus.n_rows;
    V.resize(n);
    I.resize(n);
    S.resize(n);
    wbar.resize(n);
    ty.resize(n);

    // pattern = Y_bus plus a guaranteed diagonal entry in every row
    SparseComplexMatrix pat;
    pat.n_rows = pat.n_cols = n;
    pat.row_offsets.reserve(n + 1);
    pat.row_offsets.push_back(0);
    pat.col_indices.reserve(y_bus.nnz() + n);
    for (std::size_t i = 0; i < n; ++i) {
        bool have_diag = false;
        for (std::size_t k = y_bus.row_offsets[i]; k < y_bus.row_offsets[i + 1]; ++k) {
            const std::size_t j = y_bus.col_indices[k];
            if (!have_diag && j > i) {
                pat.col_indices.push_back(i);
                have_diag = true;
            }
            if (j == i) have_diag = true;
            pat.col_indices.push_back(j);
        }
        if (!have_diag) pat.col_indices.push_back(i);
        pat.row_offsets.push_back(pat.col_indices.size());
    }
    pat.values.assign(pat.col_indices.size(), cxd{0.0, 0.0});
    dS_dvm = pat;
    dS_dva = std::move(pat);
}

void PfWorkspace::forward(const SparseComplexMatrix& y_bus, const double* vm,
                          const double* va) {
    const std::size_t n = y_bus.n_rows;
    for (std::size_t i = 0; i < n; ++i) V[i] = std::polar(vm[i], va[i]);
    spmv(y_bus, V.data(), I.data());
    for (std::size_t i = 0; i < n; ++i) S[i] = V[i] * std::conj(I[i]);
}

void PfWorkspace::refresh_partials(const SparseComplexMatrix& y_bus, const double* vm) {
    const std::size_t n = y_bus.n_rows;
    check_positive_vm(vm, n);
    for (std::size_t i = 0; i < n; ++i) {
        const cxd Vi = V[i];
        std::size_t ky = y_bus.row_offsets[i];
        const std::size_t ky_end = y_bus.row_offsets[i + 1];
        for (std::size_t k = dS_dva.row_offsets[i]; k < dS_dva.row_offsets[i + 1]; ++k) {
            const std::size_t j = dS_dva.col_indices[k];
            cxd y{0.0, 0.0};
            if (ky < ky_end && y_bus.col_indices[ky] == j) y = y_bus.values[ky++];
            const cxd z = Vi * std::conj(y) * std::conj(V[j]);
            if (j != i) {
                dS_dva.values[k] = -kJ * z;
                dS_dvm.values[k] = z / vm[j];
            } else {
                dS_dva.values[k] = kJ * (Vi * std::conj(I[i])) - kJ * z;
                dS_dvm.values[k] = (Vi / vm[i]) * std::conj(I[i]) + z / vm[i];
            }
        }
    }
}

std::vector<cxd> calc_power(const VoltageState& v, const SparseComplexMatrix& y_bus) {
    if (v.vm.size() != y_bus.n_cols || v.va.size() != y_bus.n_cols)
        throw DimensionError("calc_power: state length != matrix dimension");
    std::vector<cxd> V(v.vm.size()), I(v.vm.size());
    for (std::size_t i = 0; i < V.size(); ++i) V[i] = std::polar(v.vm[i], v.va[i]);
    spmv(y_bus, V.data(), I.data());
    for (std::size_t i = 0; i < V.size(); ++i) I[i] = V[i] * std::conj(I[i]);
    return I;
}

Mismatch mismatch(const VoltageState& v, const PowerFlowProblem& p) {
    const std::vector<cxd> s = calc_power(v, p.y_bus);
    Mismatch m;
    m.dp.reserve(p.pv.size() + p.pq.size());
    m.dq.reserve(p.pq.size());
    for (std::size_t i : p.pv) m.dp.push_back(s[i].real() - p.s_bus[i].real());
    for (std::size_t i : p.pq) m.dp.push_back(s[i].real() - p.s_bus[i].real());
    for (std::size_t i : p.pq) m.dq.push_back(s[i].imag() - p.s_bus[i].imag());
    return m;
}

double loss(const Mismatch& m) {
    const std::size_t count = m.dp.size() + m.dq.size();
    if (count == 0) return 0.0;
    double acc = 0.0;
    for (double d : m.dp) acc += d * d;
    for (double d : m.dq) acc += d * d;
    return acc / static_cast<double>(count);
}

std::pair<SparseComplexMatrix, SparseComplexMatrix> partial_derivatives(
    const VoltageState& v, const SparseComplexMatrix& y_bus) {
    PfWorkspace ws(y_bus);
    ws.forward(y_bus, v.vm.data(), v.va.data());
    ws.refresh_partials(y_bus, v.vm.data());
    return {std::move(ws.dS_dvm), std::move(ws.dS_dva)};
}

Gradient grad_loss(const VoltageState& v, const PowerFlowProblem& p) {
    PfWorkspace ws(p.y_bus);
    ws.forward(p.y_bus, v.vm.data(), v.va.data());
    ws.refresh_partials(p.y_bus, v.vm.data());

    // wbar_i = dp_i − j·dq_i over the constrained components, 0 elsewhere
    std::fill(ws.wbar.begin(), ws.wbar.end(), cxd{0.0, 0.0});
    for (std::size_t i : p.pv)
        ws.wbar[i] = cxd{ws.S[i].real() - p.s_bus[i].real(), 0.0};
    for (std::size_t i : p.pq) ws.wbar[i] = std::conj(ws.S[i] - p.s_bus[i]);

    const double m = static_cast<double>(p.pv.size() + 2 * p.pq.size());
    const double scale = m > 0 ? 2.0 / m : 0.0;

    Gradient g;
    g.d_va.reserve(p.pv.size() + p.pq.size());
    g.d_vm.reserve(p.pq.size());
    transpose_apply(ws.dS_dva, ws.wbar.data(), ws.ty.data());
    for (std::size_t i : p.pv) g.d_va.push_back(scale * ws.ty[i].real());
    for (std::size_t i : p.pq) g.d_va.push_back(scale * ws.ty[i].real());
    transpose_apply(ws.dS_dvm, ws.wbar.data(), ws.ty.data());
    for (std::size_t i : p.pq) g.d_vm.push_back(scale * ws.ty[i].real());
    return g;
}

JacobianBlocks assemble_jacobian(const VoltageState& v, const PowerFlowProblem& p) {
    JacobianBlocks jb;
    auto blocks = partial_derivatives(v, p.y_bus);
    jb.dS_dvm = std::move(blocks.first);
    jb.dS_dva = std::move(blocks.second);

    const std::size_t n = p.n_buses();
    const std::size_t n_th = p.pv.size() + p.pq.size();
    const std::size_t dim = n_th + p.pq.size();
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> pos_th(n, kNone), pos_vm(n, kNone);
    {
        std::size_t r = 0;
        for (std::size_t i : p.pv) pos_th[i] = r++;
        for (std::size_t i : p.pq) pos_th[i] = r++;
        r = 0;
        for (std::size_t i : p.pq) pos_vm[i] = r++;
    }

    jb.assembled = DenseRealMatrix(dim, dim);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t rp = pos_th[k];          // P-mismatch row (pv and pq)
        const std::size_t rq = pos_vm[k];          // Q-mismatch row (pq only)
        for (std::size_t e = jb.dS_dva.row_offsets[k]; e < jb.dS_dva.row_offsets[k + 1];
             ++e) {
            const std::size_t j = jb.dS_dva.col_indices[e];
            const std::size_t cth = pos_th[j];
            const std::size_t cvm = pos_vm[j];
            if (rp != kNone) {
                if (cth != kNone) jb.assembled(rp, cth) = jb.dS_dva.values[e].real();
                if (cvm != kNone)
                    jb.assembled(rp, n_th + cvm) = jb.dS_dvm.values[e].real();
            }
            if (rq != kNone) {
                if (cth != kNone)
                    jb.assembled(n_th + rq, cth) = jb.dS_dva.values[e].imag();
                if (cvm != kNone)
                    jb.assembled(n_th + rq, n_th + cvm) = jb.dS_dvm.values[e].imag();
            }
        }
    }
    return jb;
}

}  // namespace gridflux
