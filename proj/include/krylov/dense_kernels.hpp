#pragma once

#include <cmath>
#include <cstdlib>
#include <thread>
#include <vector>

#include "krylov/dense_matrix.hpp"
#include "krylov/types.hpp"

namespace krylov {

namespace detail {

inline unsigned thread_count() {
    static const unsigned n = [] {
        const char* env = std::getenv("KRYLOV_NUM_THREADS");
        if (env == nullptr) return 1u;
        long v = std::strtol(env, nullptr, 10);
        if (v < 1) return 1u;
        return static_cast<unsigned>(v);
    }();
    return n;
}

// Runs f(j) for j in [0, count). Each index is handled by exactly one
// thread and the work inside f is sequential, so results are
// bit-reproducible for any thread count.
template <typename F>
void parallel_indices(index_t count, index_t min_per_thread, F&& f) {
    const unsigned nt = thread_count();
    if (nt <= 1 || count < 2 * min_per_thread) {
        for (index_t j = 0; j < count; ++j) f(j);
        return;
    }
    const unsigned use = static_cast<unsigned>(
        std::min<index_t>(nt, (count + min_per_thread - 1) / min_per_thread));
    std::vector<std::thread> pool;
    pool.reserve(use);
    for (unsigned t = 0; t < use; ++t) {
        pool.emplace_back([&, t] {
            for (index_t j = t; j < count; j += use) f(j);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

enum class Op { None, Trans };

/// op(A) * op(B) with exact triple-loop semantics; the reduction order for
/// each output entry is fixed, so results do not depend on the thread count.
inline DenseMatrix mat_mul(ConstMatrixView a, ConstMatrixView b, Op op_a = Op::None,
                           Op op_b = Op::None) {
    const index_t am = (op_a == Op::None) ? a.rows() : a.cols();
    const index_t ak = (op_a == Op::None) ? a.cols() : a.rows();
    const index_t bk = (op_b == Op::None) ? b.rows() : b.cols();
    const index_t bn = (op_b == Op::None) ? b.cols() : b.rows();
    if (ak != bk) throw DimensionMismatch("mat_mul inner dimensions");

    DenseMatrix c(am, bn);
    if (op_a == Op::None && op_b == Op::None) {
        detail::parallel_indices(bn, 8, [&](index_t j) {
            double* cj = c.col(j);
            for (index_t l = 0; l < ak; ++l) {
                const double blj = b(l, j);
                if (blj != 0.0) axpy(blj, a.col(l), cj, am);
            }
        });
    } else if (op_a == Op::Trans && op_b == Op::None) {
        detail::parallel_indices(bn, 8, [&](index_t j) {
            double* cj = c.col(j);
            for (index_t i = 0; i < am; ++i) cj[i] = dot(a.col(i), b.col(j), ak);
        });
    } else if (op_a == Op::None && op_b == Op::Trans) {
        detail::parallel_indices(bn, 8, [&](index_t j) {
            double* cj = c.col(j);
            for (index_t l = 0; l < ak; ++l) {
                const double bjl = b(j, l);
                if (bjl != 0.0) axpy(bjl, a.col(l), cj, am);
            }
        });
    } else {
        // AᵀBᵀ = (BA)ᵀ; both operands need strided access, so form BA and flip.
        DenseMatrix ba = mat_mul(b, a);
        for (index_t j = 0; j < bn; ++j)
            for (index_t i = 0; i < am; ++i) c(i, j) = ba(j, i);
    }
    return c;
}

/// Gram matrix VᵀV: the upper triangle is computed and mirrored, so the
/// result is symmetric to the last bit.
inline DenseMatrix gram(ConstMatrixView v) {
    if (v.empty()) throw DimensionMismatch("gram of empty matrix");
    const index_t k = v.cols();
    DenseMatrix g(k, k);
    detail::parallel_indices(k, 4, [&](index_t j) {
        for (index_t i = 0; i <= j; ++i) g(i, j) = dot(v.col(i), v.col(j), v.rows());
    });
    for (index_t j = 0; j < k; ++j)
        for (index_t i = 0; i < j; ++i) g(j, i) = g(i, j);
    return g;
}

/// Upper Cholesky factor of the leading pivots of S (upper triangle read).
/// Returns 0 on success, else the 1-based index of the first non-positive
/// pivot. On failure `r` holds the completed columns plus the failed
/// column's above-diagonal entries with a zero diagonal.
inline index_t try_cholesky(ConstMatrixView s, UpperTriangular& r) {
    if (s.rows() != s.cols()) throw DimensionMismatch("cholesky needs a square matrix");
    const index_t n = s.rows();
    r = UpperTriangular(n);
    for (index_t j = 0; j < n; ++j) {
        for (index_t i = 0; i < j; ++i) {
            double sum = s(i, j);
            for (index_t k = 0; k < i; ++k) sum -= r(k, i) * r(k, j);
            r.at(i, j) = sum / r(i, i);
        }
        double d = s(j, j);
        for (index_t k = 0; k < j; ++k) d -= r(k, j) * r(k, j);
        if (!(d > 0.0)) return j + 1;
        r.at(j, j) = std::sqrt(d);
    }
    return 0;
}

/// Cholesky factorization S = RᵀR. No shift or perturbation is applied:
/// breakdown must surface so condition violations are observable.
inline UpperTriangular cholesky(ConstMatrixView s) {
    UpperTriangular r;
    const index_t pivot = try_cholesky(s, r);
    if (pivot != 0) throw NotPositiveDefinite(pivot);
    return r;
}

/// V * R⁻¹ for upper-triangular R with positive diagonal.
inline DenseMatrix tri_solve_right(ConstMatrixView v, const UpperTriangular& r) {
    if (v.cols() != r.dim()) throw DimensionMismatch("tri_solve_right dimensions");
    const index_t n = v.rows(), k = v.cols();
    for (index_t j = 0; j < k; ++j)
        if (r(j, j) == 0.0) throw SingularFactor();

    DenseMatrix x(n, k);
    for (index_t j = 0; j < k; ++j) {
        double* xj = x.col(j);
        std::memcpy(xj, v.col(j), n * sizeof(double));
        for (index_t l = 0; l < j; ++l) axpy(-r(l, j), x.col(l), xj, n);
        const double inv = 1.0 / r(j, j);
        for (index_t i = 0; i < n; ++i) xj[i] *= inv;
    }
    return x;
}

struct QrResult {
    DenseMatrix q;       // n×k, explicitly formed, orthonormal columns
    UpperTriangular r;   // k×k, diagonal ≥ 0
};

/// Householder QR with Q explicitly formed. Unconditionally stable:
/// ‖I − QᵀQ‖ = O(ε) regardless of κ(V). Rank deficiency yields zero
/// diagonal entries in R.
inline QrResult householder_qr(ConstMatrixView v) {
    const index_t n = v.rows(), k = v.cols();
    if (n < k) throw DimensionMismatch("householder_qr needs rows >= cols");

    DenseMatrix w(n, k);
    std::memcpy(w.data(), v.data(), n * k * sizeof(double));
    std::vector<double> tau(k, 0.0);

    for (index_t j = 0; j < k; ++j) {
        double* wj = w.col(j);
        const double sigma = norm2(wj + j, n - j);
        if (sigma == 0.0) {
            tau[j] = 0.0;
            continue;
        }
        const double alpha = wj[j];
        const double beta = (alpha >= 0.0) ? -sigma : sigma;
        const double v0 = alpha - beta;
        tau[j] = (beta - alpha) / beta;
        for (index_t i = j + 1; i < n; ++i) wj[i] /= v0;
        wj[j] = beta;

        detail::parallel_indices(k - j - 1, 8, [&](index_t jj) {
            double* wc = w.col(j + 1 + jj);
            double s = wc[j];
            for (index_t i = j + 1; i < n; ++i) s += wj[i] * wc[i];
            s *= tau[j];
            wc[j] -= s;
            for (index_t i = j + 1; i < n; ++i) wc[i] -= s * wj[i];
        });
    }

    QrResult out;
    out.r = UpperTriangular(k);
    for (index_t j = 0; j < k; ++j)
        for (index_t i = 0; i <= j; ++i) out.r.at(i, j) = w(i, j);

    // Accumulate Q = H_0 ... H_{k-1} applied to the leading columns of I.
    out.q = DenseMatrix(n, k);
    for (index_t j = 0; j < k; ++j) out.q(j, j) = 1.0;
    for (index_t j = k; j-- > 0;) {
        if (tau[j] == 0.0) continue;
        const double* wj = w.col(j);
        detail::parallel_indices(k - j, 8, [&](index_t jj) {
            double* qc = out.q.col(j + jj);
            double s = qc[j];
            for (index_t i = j + 1; i < n; ++i) s += wj[i] * qc[i];
            s *= tau[j];
            qc[j] -= s;
            for (index_t i = j + 1; i < n; ++i) qc[i] -= s * wj[i];
        });
    }

    // Sign convention: non-negative diagonals, flips applied to Q and R consistently.
    for (index_t j = 0; j < k; ++j) {
        if (out.r(j, j) < 0.0) {
            for (index_t l = j; l < k; ++l) out.r.at(j, l) = -out.r(j, l);
            double* qj = out.q.col(j);
            for (index_t i = 0; i < n; ++i) qj[i] = -qj[i];
        }
    }
    return out;
}

/// R factor only; saves the Q accumulation when the caller just needs
/// singular values or reconstruction coefficients.
inline UpperTriangular householder_r(ConstMatrixView v) {
    const index_t n = v.rows(), k = v.cols();
    if (n < k) throw DimensionMismatch("householder_r needs rows >= cols");
    DenseMatrix w(n, k);
    std::memcpy(w.data(), v.data(), n * k * sizeof(double));
    for (index_t j = 0; j < k; ++j) {
        double* wj = w.col(j);
        const double sigma = norm2(wj + j, n - j);
        if (sigma == 0.0) continue;
        const double alpha = wj[j];
        const double beta = (alpha >= 0.0) ? -sigma : sigma;
        const double v0 = alpha - beta;
        const double tau = (beta - alpha) / beta;
        for (index_t i = j + 1; i < n; ++i) wj[i] /= v0;
        wj[j] = beta;
        detail::parallel_indices(k - j - 1, 8, [&](index_t jj) {
            double* wc = w.col(j + 1 + jj);
            double s = wc[j];
            for (index_t i = j + 1; i < n; ++i) s += wj[i] * wc[i];
            s *= tau;
            wc[j] -= s;
            for (index_t i = j + 1; i < n; ++i) wc[i] -= s * wj[i];
        });
    }
    UpperTriangular r(k);
    for (index_t j = 0; j < k; ++j)
        for (index_t i = 0; i <= j; ++i) r.at(i, j) = w(i, j);
    return r;
}

/// Product of two upper-triangular factors (A·B), upper triangular again.
inline UpperTriangular tri_mul(const UpperTriangular& a, const UpperTriangular& b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("tri_mul dimensions");
    const index_t n = a.dim();
    UpperTriangular c(n);
    for (index_t j = 0; j < n; ++j)
        for (index_t i = 0; i <= j; ++i) {
            double s = 0.0;
            for (index_t l = i; l <= j; ++l) s += a(i, l) * b(l, j);
            c.at(i, j) = s;
        }
    return c;
}

}  // namespace krylov
