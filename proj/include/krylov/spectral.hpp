#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "krylov/dense_kernels.hpp"
#include "krylov/dense_matrix.hpp"

namespace krylov {

/// Machine epsilon of the working precision (binary64).
inline constexpr double machine_eps = std::numeric_limits<double>::epsilon();

struct SpectralSummary {
    std::vector<double> singular_values;  // descending, non-negative
    double cond = 1.0;                    // σ_max/σ_min, +inf when σ_min = 0
    bool converged = true;                // false when the sweep cap was hit
};

namespace detail {

// One-sided Jacobi on a square or nearly-square block, in place. Cyclic
// column pairs, stop when every off-diagonal cosine is below `tol` or
// after `max_sweeps` sweeps. Returns the converged flag.
inline bool jacobi_orthogonalize(DenseMatrix& a, double tol, int max_sweeps) {
    const index_t n = a.rows(), k = a.cols();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double worst = 0.0;
        for (index_t i = 0; i + 1 < k; ++i) {
            for (index_t j = i + 1; j < k; ++j) {
                double* ci = a.col(i);
                double* cj = a.col(j);
                const double aii = dot(ci, ci, n);
                const double ajj = dot(cj, cj, n);
                const double aij = dot(ci, cj, n);
                if (aii == 0.0 || ajj == 0.0) continue;
                const double cosang = std::abs(aij) / std::sqrt(aii * ajj);
                worst = std::max(worst, cosang);
                if (cosang <= tol) continue;

                const double zeta = (ajj - aii) / (2.0 * aij);
                const double t = (zeta == 0.0)
                                     ? 1.0
                                     : std::copysign(1.0, zeta) /
                                           (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (index_t r = 0; r < n; ++r) {
                    const double vi = ci[r], vj = cj[r];
                    ci[r] = c * vi - s * vj;
                    cj[r] = s * vi + c * vj;
                }
            }
        }
        if (worst <= tol) return true;
    }
    return false;
}

inline SpectralSummary summarize_columns(const DenseMatrix& a, bool converged) {
    SpectralSummary out;
    out.converged = converged;
    out.singular_values.resize(a.cols());
    for (index_t j = 0; j < a.cols(); ++j)
        out.singular_values[j] = norm2(a.col(j), a.rows());
    std::sort(out.singular_values.begin(), out.singular_values.end(), std::greater<>());
    const double smin = out.singular_values.back();
    const double smax = out.singular_values.front();
    out.cond = (smin == 0.0) ? std::numeric_limits<double>::infinity()
                             : smax / smin;
    if (smax == 0.0) out.cond = 1.0;
    return out;
}

}  // namespace detail

/// Singular values by one-sided Jacobi (cyclic column pairs, cosines
/// below 1e-15, 30-sweep cap). Tall inputs are first reduced to their
/// square Householder R factor, which leaves the spectrum unchanged.
/// Intended for desk-scale panels: cols ≤ 512.
inline SpectralSummary singular_values(ConstMatrixView v) {
    if (v.rows() < v.cols()) throw DimensionMismatch("singular_values needs rows >= cols");
    if (v.cols() > 512) throw DimensionMismatch("singular_values oracle capped at 512 columns");

    DenseMatrix work;
    if (v.rows() > v.cols()) {
        const UpperTriangular r = householder_r(v);
        work = DenseMatrix(r.dim(), r.dim());
        for (index_t j = 0; j < r.dim(); ++j)
            for (index_t i = 0; i <= j; ++i) work(i, j) = r(i, j);
    } else {
        work = DenseMatrix(v.rows(), v.cols());
        std::memcpy(work.data(), v.data(), v.rows() * v.cols() * sizeof(double));
    }
    const bool converged = detail::jacobi_orthogonalize(work, 1e-15, 30);
    return detail::summarize_columns(work, converged);
}

/// 2-norm of the symmetric deviation I − QᵀQ, computed by cyclic Jacobi
/// eigenvalue iteration (no Gram squaring of small values is involved:
/// the deviation itself is the input).
inline double ortho_error(ConstMatrixView q) {
    if (q.empty()) return 0.0;
    if (q.cols() > 512) throw DimensionMismatch("ortho_error capped at 512 columns");
    const index_t k = q.cols();
    DenseMatrix s = gram(q);
    for (index_t j = 0; j < k; ++j)
        for (index_t i = 0; i < k; ++i) s(i, j) = (i == j ? 1.0 : 0.0) - s(i, j);

    for (int sweep = 0; sweep < 30; ++sweep) {
        double off = 0.0, diag = 0.0;
        for (index_t i = 0; i < k; ++i) diag = std::max(diag, std::abs(s(i, i)));
        for (index_t p = 0; p + 1 < k; ++p) {
            for (index_t q_ = p + 1; q_ < k; ++q_) {
                const double spq = s(p, q_);
                if (spq == 0.0) continue;
                off = std::max(off, std::abs(spq));
                const double tau = (s(q_, q_) - s(p, p)) / (2.0 * spq);
                const double t = (tau == 0.0)
                                     ? 1.0
                                     : std::copysign(1.0, tau) /
                                           (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = c * t;
                for (index_t r = 0; r < k; ++r) {
                    const double vp = s(r, p), vq = s(r, q_);
                    s(r, p) = c * vp - sn * vq;
                    s(r, q_) = sn * vp + c * vq;
                }
                for (index_t r = 0; r < k; ++r) {
                    const double vp = s(p, r), vq = s(q_, r);
                    s(p, r) = c * vp - sn * vq;
                    s(q_, r) = sn * vp + c * vq;
                }
            }
        }
        if (off <= machine_eps * std::max(diag, 1e-300)) break;
    }
    double norm = 0.0;
    for (index_t i = 0; i < k; ++i) norm = std::max(norm, std::abs(s(i, i)));
    return norm;
}

/// Condition number of [Q, X] where Q has orthonormal columns (to
/// roundoff): the tall concatenation is reduced to the small factor
/// [[I, QᵀX], [0, R(X − Q QᵀX)]], whose spectrum matches to O(‖I−QᵀQ‖).
/// Used by the experiment traces where Q is a finalized basis prefix;
/// falls back to the direct oracle when Q is empty.
inline SpectralSummary accumulated_cond(ConstMatrixView q, ConstMatrixView x) {
    if (q.empty()) return singular_values(x);
    const index_t f = q.cols();
    const index_t w = x.cols();
    if (f + w > 512) throw DimensionMismatch("accumulated_cond capped at 512 columns");
    if (w == 0) {
        SpectralSummary out;
        out.singular_values.assign(f, 1.0);
        return out;
    }
    const DenseMatrix c = mat_mul(q, x, Op::Trans, Op::None);
    DenseMatrix xhat(x.rows(), w);
    std::memcpy(xhat.data(), x.data(), x.rows() * w * sizeof(double));
    for (index_t j = 0; j < w; ++j)
        for (index_t l = 0; l < f; ++l) axpy(-c(l, j), q.col(l), xhat.col(j), x.rows());
    const UpperTriangular rhat = householder_r(xhat);

    DenseMatrix small(f + w, f + w);
    for (index_t i = 0; i < f; ++i) small(i, i) = 1.0;
    for (index_t j = 0; j < w; ++j) {
        for (index_t i = 0; i < f; ++i) small(i, f + j) = c(i, j);
        for (index_t i = 0; i <= j; ++i) small(f + i, f + j) = rhat(i, j);
    }
    const bool converged = detail::jacobi_orthogonalize(small, 1e-15, 30);
    return detail::summarize_columns(small, converged);
}

}  // namespace krylov
