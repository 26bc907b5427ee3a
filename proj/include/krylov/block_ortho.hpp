#pragma once

#include <cstring>
#include <vector>

#include "krylov/dense_kernels.hpp"
#include "krylov/dense_matrix.hpp"
#include "krylov/types.hpp"

namespace krylov {

/// Telemetry for communication-cost accounting: `reduces` counts events
/// that would be a global all-reduce in the distributed algorithm (one
/// per logical fused product). Monotone non-decreasing.
struct SyncCounter {
    long long reduces = 0;
    std::vector<long long> per_block;      // delta per block step
    std::vector<long long> per_big_panel;  // delta per big-panel finalize

    void add(long long k = 1) { reduces += k; }
};

enum class OrthoKind { Bcgs2Hhqr, Bcgs2Cholqr2, BcgsPip2, TwoStage };

/// Scheme selection; `big_panel_size` (ŝ) applies to TwoStage only and
/// must be a multiple of the step size. TwoStage with ŝ = s is
/// behaviorally identical to BcgsPip2.
struct OrthoScheme {
    OrthoKind kind = OrthoKind::BcgsPip2;
    index_t big_panel_size = 0;  // 0: defer to the solver's restart length
};

inline const char* ortho_kind_name(OrthoKind k) {
    switch (k) {
        case OrthoKind::Bcgs2Hhqr: return "bcgs2-hhqr";
        case OrthoKind::Bcgs2Cholqr2: return "bcgs2-cholqr2";
        case OrthoKind::BcgsPip2: return "bcgs-pip2";
        case OrthoKind::TwoStage: return "two-stage";
    }
    return "?";
}

struct BlockQr {
    DenseMatrix q;
    UpperTriangular r;
};

/// QR of a tall block via Cholesky of its Gram matrix. One reduce.
inline BlockQr cholqr(ConstMatrixView v, SyncCounter& sync) {
    sync.add(1);
    const DenseMatrix g = gram(v);
    UpperTriangular r = cholesky(g);
    return {tri_solve_right(v, r), std::move(r)};
}

/// CholQR applied twice; R combines as R₂·R₁. Two reduces.
inline BlockQr cholqr2(ConstMatrixView v, SyncCounter& sync) {
    BlockQr first = cholqr(v, sync);
    BlockQr second = cholqr(first.q, sync);
    return {std::move(second.q), tri_mul(second.r, first.r)};
}

struct ProjectResult {
    DenseMatrix vhat;     // V − Q_prev (Q_prevᵀ V)
    DenseMatrix r_block;  // Q_prevᵀ V  (prefix × block)
};

/// Inter-block classical Gram-Schmidt projection. One reduce (the
/// dot-product GEMM); the vector update is communication-free.
inline ProjectResult bcgs_project(ConstMatrixView q_prev, ConstMatrixView v,
                                  SyncCounter& sync) {
    ProjectResult out;
    if (q_prev.empty()) {
        out.vhat = DenseMatrix(v.rows(), v.cols());
        std::memcpy(out.vhat.data(), v.data(), v.rows() * v.cols() * sizeof(double));
        out.r_block = DenseMatrix(0, v.cols());
        return out;
    }
    sync.add(1);
    out.r_block = mat_mul(q_prev, v, Op::Trans, Op::None);
    out.vhat = DenseMatrix(v.rows(), v.cols());
    std::memcpy(out.vhat.data(), v.data(), v.rows() * v.cols() * sizeof(double));
    for (index_t j = 0; j < v.cols(); ++j)
        for (index_t l = 0; l < q_prev.cols(); ++l)
            axpy(-out.r_block(l, j), q_prev.col(l), out.vhat.col(j), v.rows());
    return out;
}

enum class IntraKind { Hhqr, Cholqr2 };

struct BlockOrthoResult {
    DenseMatrix q;        // orthonormal block
    DenseMatrix r_col;    // coefficients against q_prev (prefix × width)
    UpperTriangular r_jj; // intra coefficients (width × width)
};

/// Block Classical Gram-Schmidt twice: project, intra-orthogonalize
/// (HHQR or CholQR2), re-project, CholQR. The first block skips the
/// second pass. Coefficients combine as T·R_jj + R (consistent update).
/// On a single column both intra kinds degenerate to one normalization,
/// which makes the s = 1 configuration exactly CGS2 (4 reduces/column).
inline BlockOrthoResult bcgs2(ConstMatrixView q_prev, ConstMatrixView v, IntraKind intra,
                              SyncCounter& sync) {
    const bool single = (v.cols() == 1);
    auto intra_qr = [&](ConstMatrixView x) -> BlockQr {
        if (single) return cholqr(x, sync);
        if (intra == IntraKind::Hhqr) {
            sync.add(static_cast<long long>(x.cols()));  // one reduce per column
            QrResult qr = householder_qr(x);
            return {std::move(qr.q), std::move(qr.r)};
        }
        return cholqr2(x, sync);
    };

    BlockOrthoResult out;
    if (q_prev.empty()) {
        BlockQr qr = intra_qr(v);
        out.q = std::move(qr.q);
        out.r_jj = std::move(qr.r);
        out.r_col = DenseMatrix(0, v.cols());
        return out;
    }

    ProjectResult first = bcgs_project(q_prev, v, sync);
    BlockQr inner = intra_qr(first.vhat);
    ProjectResult second = bcgs_project(q_prev, inner.q, sync);
    BlockQr outer = cholqr(second.vhat, sync);

    out.q = std::move(outer.q);
    // R_col := T_col·R_jj + R_col ; R_jj := T_jj·R_jj
    DenseMatrix correction = mat_mul(second.r_block, inner.r.view());
    out.r_col = std::move(first.r_block);
    for (index_t j = 0; j < out.r_col.cols(); ++j)
        for (index_t i = 0; i < out.r_col.rows(); ++i) out.r_col(i, j) += correction(i, j);
    out.r_jj = tri_mul(outer.r, inner.r);
    return out;
}

/// BCGS fused with CholQR through the block Pythagorean identity: the
/// single product [Q_prev, V]ᵀV is one reduce, and the intra factor comes
/// from Chol(VᵀV − R_colᵀR_col). With an empty prefix this is exactly
/// CholQR. `bad_pivot` is nonzero when the Pythagorean update is
/// indefinite (condition violation); the partial factor keeps the
/// completed columns plus the failed column's coefficients.
struct PipOutcome {
    DenseMatrix r_col;
    UpperTriangular r_chol;
    DenseMatrix q;          // valid when bad_pivot == 0
    index_t bad_pivot = 0;  // 1-based within the block
};

inline PipOutcome bcgs_pip_partial(ConstMatrixView q_prev, ConstMatrixView v,
                                   SyncCounter& sync) {
    PipOutcome out;
    sync.add(1);  // fused [Q_prev, V]ᵀ V
    out.r_col = q_prev.empty() ? DenseMatrix(0, v.cols())
                               : mat_mul(q_prev, v, Op::Trans, Op::None);
    DenseMatrix s_mat = gram(v);
    if (!q_prev.empty()) {
        const index_t w = v.cols();
        for (index_t j = 0; j < w; ++j)
            for (index_t i = 0; i <= j; ++i) {
                const double c = dot(out.r_col.col(i), out.r_col.col(j), out.r_col.rows());
                s_mat(i, j) -= c;
                if (i != j) s_mat(j, i) = s_mat(i, j);
            }
    }
    out.bad_pivot = try_cholesky(s_mat, out.r_chol);
    if (out.bad_pivot != 0) return out;

    DenseMatrix vhat(v.rows(), v.cols());
    std::memcpy(vhat.data(), v.data(), v.rows() * v.cols() * sizeof(double));
    for (index_t j = 0; j < v.cols(); ++j)
        for (index_t l = 0; l < q_prev.cols(); ++l)
            axpy(-out.r_col(l, j), q_prev.col(l), vhat.col(j), v.rows());
    out.q = tri_solve_right(vhat, out.r_chol);
    return out;
}

inline BlockOrthoResult bcgs_pip(ConstMatrixView q_prev, ConstMatrixView v,
                                 SyncCounter& sync) {
    PipOutcome pip = bcgs_pip_partial(q_prev, v, sync);
    if (pip.bad_pivot != 0) throw NotPositiveDefinite(pip.bad_pivot);
    BlockOrthoResult out;
    out.q = std::move(pip.q);
    out.r_col = std::move(pip.r_col);
    out.r_jj = std::move(pip.r_chol);
    return out;
}

/// BCGS-PIP applied twice; two reduces per block.
inline BlockOrthoResult bcgs_pip2(ConstMatrixView q_prev, ConstMatrixView v,
                                  SyncCounter& sync) {
    BlockOrthoResult first = bcgs_pip(q_prev, v, sync);
    BlockOrthoResult second = bcgs_pip(q_prev, first.q, sync);

    BlockOrthoResult out;
    out.q = std::move(second.q);
    out.r_col = std::move(first.r_col);
    if (out.r_col.rows() > 0) {
        DenseMatrix correction = mat_mul(second.r_col, first.r_jj.view());
        for (index_t j = 0; j < out.r_col.cols(); ++j)
            for (index_t i = 0; i < out.r_col.rows(); ++i)
                out.r_col(i, j) += correction(i, j);
    }
    out.r_jj = tri_mul(second.r_jj, first.r_jj);
    return out;
}

}  // namespace krylov
