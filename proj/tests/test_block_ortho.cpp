#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "krylov/basis_store.hpp"
#include "krylov/block_ortho.hpp"
#include "krylov/gmres.hpp"
#include "krylov/matgen.hpp"
#include "krylov/spectral.hpp"

using namespace krylov;

namespace {

DenseMatrix random_orthonormal(index_t rows, index_t cols, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    DenseMatrix m(rows, cols);
    for (index_t j = 0; j < cols; ++j)
        for (index_t i = 0; i < rows; ++i) m(i, j) = dist(rng);
    return householder_qr(m).q;
}

DenseMatrix random_matrix(index_t rows, index_t cols, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    DenseMatrix m(rows, cols);
    for (index_t j = 0; j < cols; ++j)
        for (index_t i = 0; i < rows; ++i) m(i, j) = dist(rng);
    return m;
}

double c1_bound(index_t n, index_t s) {
    return 5.0 * (static_cast<double>(n) * s + s * (s + 1)) * machine_eps;
}

double max_abs_diff(ConstMatrixView a, ConstMatrixView b) {
    double d = 0.0;
    for (index_t j = 0; j < a.cols(); ++j)
        for (index_t i = 0; i < a.rows(); ++i) d = std::max(d, std::abs(a(i, j) - b(i, j)));
    return d;
}

}  // namespace

TEST(CholQr, OrthonormalInput) {
    DenseMatrix q0 = random_orthonormal(400, 5, 1);
    SyncCounter sync;
    BlockQr qr = cholqr(q0, sync);
    EXPECT_EQ(sync.reduces, 1);
    for (index_t j = 0; j < 5; ++j)
        for (index_t i = 0; i <= j; ++i) EXPECT_NEAR(qr.r(i, j), i == j ? 1.0 : 0.0, 1e-14);
    EXPECT_LT(ortho_error(qr.q), 1e-14);
}

TEST(CholQr2, FirstPassErrorTracksKappaSquared) {
    const index_t n = 100000, k = 5;
    LogscaledPanel panel = gen_logscaled(n, k, 1e3, Seed{2});
    SyncCounter sync;
    BlockQr first = cholqr(panel.matrix, sync);
    const double err1 = ortho_error(first.q);
    const double predicted = c1_bound(n, k) * 1e6;  // c₁·κ²
    EXPECT_GT(err1, predicted / 100.0);
    EXPECT_LT(err1, predicted * 100.0);

    BlockQr second = cholqr(first.q, sync);
    EXPECT_LT(ortho_error(second.q), 1e-14);
    EXPECT_EQ(sync.reduces, 2);
}

TEST(CholQr2, BreaksDownBeyondRange) {
    LogscaledPanel panel = gen_logscaled(100000, 5, 1e9, Seed{3});
    SyncCounter sync;
    bool failed = false;
    try {
        BlockQr qr = cholqr2(panel.matrix, sync);
        failed = ortho_error(qr.q) > 1e-4;
    } catch (const NotPositiveDefinite&) {
        failed = true;
    }
    EXPECT_TRUE(failed);
}

TEST(BcgsProject, EmptyPrefixCopies) {
    DenseMatrix v = random_matrix(30, 3, 4);
    SyncCounter sync;
    ProjectResult pr = bcgs_project(ConstMatrixView(), v, sync);
    EXPECT_EQ(sync.reduces, 0);
    EXPECT_EQ(pr.r_block.rows(), 0u);
    EXPECT_EQ(max_abs_diff(pr.vhat, v), 0.0);
}

TEST(BcgsProject, AnnihilatesSpan) {
    DenseMatrix q = random_orthonormal(200, 6, 5);
    DenseMatrix c = random_matrix(6, 3, 6);
    DenseMatrix v = mat_mul(q, c);
    SyncCounter sync;
    ProjectResult pr = bcgs_project(q, v, sync);
    EXPECT_EQ(sync.reduces, 1);
    double vnorm = v.frobenius_norm();
    EXPECT_LE(pr.vhat.frobenius_norm(), 1e-13 * vnorm);
}

TEST(BcgsProject, ResidualOrthogonality) {
    DenseMatrix q = random_orthonormal(300, 8, 7);
    DenseMatrix v = random_matrix(300, 4, 8);
    SyncCounter sync;
    ProjectResult pr = bcgs_project(q, v, sync);
    DenseMatrix cross = mat_mul(q, pr.vhat, Op::Trans, Op::None);
    for (index_t j = 0; j < 4; ++j)
        for (index_t i = 0; i < 8; ++i) EXPECT_LT(std::abs(cross(i, j)), 1e-13);
}

TEST(Bcgs2, FirstBlockOrthonormalPassesThrough) {
    DenseMatrix v = random_orthonormal(150, 4, 9);
    SyncCounter sync;
    BlockOrthoResult res = bcgs2(ConstMatrixView(), v, IntraKind::Cholqr2, sync);
    EXPECT_LE(max_abs_diff(res.q, v), 1e-14);
    EXPECT_EQ(sync.reduces, 2);  // first block: CholQR2 only
}

TEST(Bcgs2, GluedAccumulationStaysOrthogonal) {
    const index_t n = 20000, s = 5, p = 4;
    GluedMatrix glued = gen_glued(n, p, s, 1e7, 1.0, 0.1, Seed{10});
    SyncCounter sync;
    DenseMatrix q_acc(n, 0);
    DenseMatrix v_all(n, p * s);
    std::vector<DenseMatrix> r_cols;
    for (index_t j = 0; j < p; ++j) {
        ConstMatrixView v = glued.matrix.col_range(j * s, s);
        BlockOrthoResult res = bcgs2(q_acc, v, IntraKind::Cholqr2, sync);
        // grow accumulated Q and record reconstruction pieces
        DenseMatrix grown(n, q_acc.cols() + s);
        if (q_acc.cols() > 0)
            std::memcpy(grown.data(), q_acc.data(), n * q_acc.cols() * sizeof(double));
        for (index_t c = 0; c < s; ++c) grown.set_col(q_acc.cols() + c, res.q.col(c));

        // reconstruction ‖V − [Q_prev, Q_j]·R‖ ≤ 1e-13·‖V‖
        DenseMatrix recon(n, s);
        for (index_t c = 0; c < s; ++c) {
            for (index_t l = 0; l < q_acc.cols(); ++l)
                axpy(res.r_col(l, c), q_acc.col(l), recon.col(c), n);
            for (index_t l = 0; l <= c; ++l)
                axpy(res.r_jj(l, c), res.q.col(l), recon.col(c), n);
        }
        double vnorm = 0.0, dev = 0.0;
        for (index_t c = 0; c < s; ++c)
            for (index_t i = 0; i < n; ++i) {
                vnorm += v(i, c) * v(i, c);
                const double d = recon(i, c) - v(i, c);
                dev += d * d;
            }
        EXPECT_LE(std::sqrt(dev), 1e-13 * std::sqrt(vnorm));
        for (index_t c = 0; c < s; ++c) EXPECT_GE(res.r_jj(c, c), 0.0);
        q_acc = std::move(grown);
    }
    EXPECT_LT(ortho_error(q_acc), 1e-13);
    // per non-first block: 1 + 2 + 1 + 1 = 5 reduces; first block: 2
    EXPECT_EQ(sync.reduces, 2 + 5 * static_cast<long long>(p - 1));
}

TEST(Bcgs2, HhqrIntraSyncAccounting) {
    DenseMatrix q = random_orthonormal(200, 4, 11);
    DenseMatrix v = random_matrix(200, 4, 12);
    SyncCounter sync;
    bcgs2(q, v, IntraKind::Hhqr, sync);
    // 1 (project) + cols (HHQR) + 1 (project) + 1 (CholQR)
    EXPECT_EQ(sync.reduces, 1 + 4 + 1 + 1);
}

TEST(BcgsPip, EmptyPrefixIsCholQrBitwise) {
    DenseMatrix v = random_matrix(120, 5, 13);
    SyncCounter s1, s2;
    BlockOrthoResult pip = bcgs_pip(ConstMatrixView(), v, s1);
    BlockQr chol = cholqr(v, s2);
    EXPECT_EQ(max_abs_diff(pip.q, chol.q), 0.0);
    for (index_t j = 0; j < 5; ++j)
        for (index_t i = 0; i <= j; ++i) EXPECT_EQ(pip.r_jj(i, j), chol.r(i, j));
    EXPECT_EQ(s1.reduces, 1);
}

TEST(BcgsPip, MatchesProjectThenCholQr) {
    DenseMatrix q = random_orthonormal(500, 6, 14);
    DenseMatrix v = random_matrix(500, 4, 15);
    SyncCounter s1, s2;
    BlockOrthoResult pip = bcgs_pip(q, v, s1);
    EXPECT_EQ(s1.reduces, 1);

    ProjectResult pr = bcgs_project(q, v, s2);
    BlockQr chol = cholqr(pr.vhat, s2);
    EXPECT_LE(max_abs_diff(pip.q, chol.q), 1e-12);
    EXPECT_LE(max_abs_diff(pip.r_col, pr.r_block), 1e-12);
    for (index_t j = 0; j < 4; ++j)
        for (index_t i = 0; i <= j; ++i)
            EXPECT_NEAR(pip.r_jj(i, j), chol.r(i, j), 1e-12 * std::abs(chol.r(j, j)) + 1e-12);
}

TEST(BcgsPip2, GluedWithinRangeStaysOrthogonal) {
    const index_t n = 20000, s = 5, p = 4;
    GluedMatrix glued = gen_glued(n, p, s, 1e7, 1.0, 0.1, Seed{16});
    SyncCounter sync;
    DenseMatrix q_acc(n, 0);
    for (index_t j = 0; j < p; ++j) {
        BlockOrthoResult res = bcgs_pip2(q_acc, glued.matrix.col_range(j * s, s), sync);
        DenseMatrix grown(n, q_acc.cols() + s);
        if (q_acc.cols() > 0)
            std::memcpy(grown.data(), q_acc.data(), n * q_acc.cols() * sizeof(double));
        for (index_t c = 0; c < s; ++c) grown.set_col(q_acc.cols() + c, res.q.col(c));
        q_acc = std::move(grown);
    }
    EXPECT_LT(ortho_error(q_acc), 1e-13);
    EXPECT_EQ(sync.reduces, 2 * static_cast<long long>(p));
}

TEST(BcgsPip2, FailsBeyondRange) {
    GluedMatrix glued = gen_glued(20000, 4, 5, 1e9, 1.0, 0.1, Seed{17});
    SyncCounter sync;
    DenseMatrix q_acc(20000, 0);
    bool failed = false;
    try {
        for (index_t j = 0; j < 4 && !failed; ++j) {
            BlockOrthoResult res = bcgs_pip2(q_acc, glued.matrix.col_range(j * 5, 5), sync);
            DenseMatrix grown(20000, q_acc.cols() + 5);
            if (q_acc.cols() > 0)
                std::memcpy(grown.data(), q_acc.data(), 20000 * q_acc.cols() * sizeof(double));
            for (index_t c = 0; c < 5; ++c) grown.set_col(q_acc.cols() + c, res.q.col(c));
            q_acc = std::move(grown);
        }
        failed = ortho_error(q_acc) > 1e-6;
    } catch (const NotPositiveDefinite&) {
        failed = true;
    }
    EXPECT_TRUE(failed);
}

TEST(BcgsPip2, MonotoneFailure) {
    // if the scheme succeeds at κ it succeeds at κ/10 with the same seed
    auto succeeds = [](double kappa) {
        GluedMatrix glued = gen_glued(10000, 3, 5, kappa, 1.0, 0.1, Seed{18});
        SyncCounter sync;
        DenseMatrix q_acc(10000, 0);
        try {
            for (index_t j = 0; j < 3; ++j) {
                BlockOrthoResult res = bcgs_pip2(q_acc, glued.matrix.col_range(j * 5, 5), sync);
                DenseMatrix grown(10000, q_acc.cols() + 5);
                if (q_acc.cols() > 0)
                    std::memcpy(grown.data(), q_acc.data(),
                                10000 * q_acc.cols() * sizeof(double));
                for (index_t c = 0; c < 5; ++c) grown.set_col(q_acc.cols() + c, res.q.col(c));
                q_acc = std::move(grown);
            }
        } catch (const NotPositiveDefinite&) {
            return false;
        }
        return ortho_error(q_acc) < 1e-13;
    };
    bool prev_ok = succeeds(1e15);
    for (double kappa : {1e12, 1e9, 1e6, 1e3}) {
        const bool ok = succeeds(kappa);
        if (prev_ok) EXPECT_TRUE(ok) << "failure became success at lower kappa " << kappa;
        prev_ok = ok;
    }
    EXPECT_TRUE(prev_ok);  // κ = 1e3 must succeed
}

// ---------------------------------------------------------------------------
// BasisStore-level behaviour
// ---------------------------------------------------------------------------

TEST(BasisStore, TwoStageEqualsPip2WhenBigPanelIsPanel) {
    const index_t n = 5000, m = 20, s = 5;
    GluedMatrix glued = gen_glued(n, m / s, s, 1e6, 2.0, 0.1, Seed{19});

    BasisStore pip_store(n, m, s, s);
    BasisStore two_store(n, m, s, s);
    SyncCounter s1, s2;
    OrthoScheme pip2{OrthoKind::BcgsPip2, 0};
    for (index_t j = 0; j < m / s; ++j) {
        ConstMatrixView v = glued.matrix.col_range(j * s, s);
        AppendOutcome a = pip_store.append_block(v, false, pip2, s1);
        ASSERT_FALSE(a.breakdown);
        AppendOutcome b = two_store.preprocess_block(v, false, s2);
        ASSERT_FALSE(b.breakdown);
        ASSERT_TRUE(two_store.big_panel_full() || two_store.big_panel_open());
        two_store.finalize_big_panel(s2);
    }
    ASSERT_EQ(pip_store.filled(), two_store.filled());
    EXPECT_LE(max_abs_diff(pip_store.all(), two_store.all()), 1e-12);
    const UpperTriangular& ra = pip_store.coefficients();
    const UpperTriangular& rb = two_store.coefficients();
    for (index_t j = 0; j < m; ++j)
        for (index_t i = 0; i <= j; ++i) EXPECT_NEAR(ra(i, j), rb(i, j), 1e-12);
    EXPECT_EQ(s1.reduces, s2.reduces);  // 2 per block either way
}

TEST(BasisStore, TwoStageSyncCounts) {
    const index_t n = 8000, m = 60, s = 5, shat = 60;
    GluedMatrix glued = gen_glued(n, m / s, s, 1e5, 1.0, 0.1, Seed{20});
    BasisStore store(n, m, s, shat);
    SyncCounter sync;
    for (index_t j = 0; j < m / s; ++j) {
        AppendOutcome oc = store.preprocess_block(glued.matrix.col_range(j * s, s), false, sync);
        ASSERT_FALSE(oc.breakdown);
        EXPECT_EQ(sync.per_block.back(), 1);
    }
    EXPECT_FALSE(store.big_panel_full());  // no-overlap feeding: 60 cols < ŝ+1
    store.finalize_big_panel(sync);
    EXPECT_EQ(sync.per_big_panel.back(), 1);
    EXPECT_EQ(sync.reduces, 13);  // 12 preprocess + 1 finalize
    EXPECT_LT(ortho_error(store.all()), 1e-13);
    for (PanelState st : store.panel_states()) EXPECT_EQ(st, PanelState::Final);
}

TEST(BasisStore, PartialBigPanelFinalizedAtActualWidth) {
    const index_t n = 4000, m = 30, s = 5, shat = 20;
    GluedMatrix glued = gen_glued(n, m / s, s, 1e4, 1.0, 0.1, Seed{21});
    BasisStore store(n, m, s, shat);
    SyncCounter sync;
    for (index_t j = 0; j < m / s; ++j) {
        store.preprocess_block(glued.matrix.col_range(j * s, s), false, sync);
        if (store.big_panel_full()) store.finalize_big_panel(sync);
    }
    EXPECT_TRUE(store.big_panel_open());  // trailing 40..60 columns not yet final
    AppendOutcome fin = store.finalize_big_panel(sync);
    EXPECT_GT(fin.committed, 0u);
    EXPECT_EQ(store.finalized_count(), store.filled());
    EXPECT_LT(ortho_error(store.all()), 1e-13);
}

TEST(BasisStore, RawSequenceReconstruction) {
    // MPK-driven blocks with carried seam columns: the stored R expands the
    // raw product sequence even after seam composition and rewriting.
    const index_t grid = 12, m = 12, s = 3;
    CsrMatrix a = gen_laplace2d(grid, grid, 5);
    const index_t n = a.n;
    std::vector<double> b = gen_rhs_ones(a);
    const double gamma = norm2(b);
    std::vector<double> v1(b);
    for (double& x : v1) x /= gamma;

    for (OrthoKind kind : {OrthoKind::BcgsPip2, OrthoKind::Bcgs2Cholqr2, OrthoKind::TwoStage}) {
        BasisStore store(n, m, s, m);
        SyncCounter sync;
        OrthoScheme scheme{kind, m};
        DenseMatrix raw(n, m + 1);
        index_t raw_cols = 0;

        for (index_t j = 0; j < m / s; ++j) {
            std::vector<double> start(n);
            if (j == 0)
                std::copy(v1.begin(), v1.end(), start.begin());
            else
                std::memcpy(start.data(), store.column(store.filled() - 1), n * sizeof(double));
            DenseMatrix blk = mpk_monomial(a, start, s);
            const index_t first_new = (j == 0) ? 0 : 1;
            for (index_t c = first_new; c <= s; ++c) raw.set_col(raw_cols++, blk.col(c));
            AppendOutcome oc = (kind == OrthoKind::TwoStage)
                                   ? store.preprocess_block(blk, j != 0, sync)
                                   : store.append_block(blk, j != 0, scheme, sync);
            ASSERT_FALSE(oc.breakdown);
        }
        if (kind == OrthoKind::TwoStage) store.finalize_big_panel(sync);

        ASSERT_EQ(raw_cols, store.filled());
        const UpperTriangular& r = store.coefficients();
        double dev = 0.0, scale = 0.0;
        for (index_t c = 0; c < raw_cols; ++c) {
            std::vector<double> recon(n, 0.0);
            for (index_t l = 0; l <= c; ++l) axpy(r(l, c), store.column(l), recon.data(), n);
            for (index_t i = 0; i < n; ++i) {
                const double d = recon[i] - raw(i, c);
                dev += d * d;
                scale += raw(i, c) * raw(i, c);
            }
        }
        EXPECT_LE(std::sqrt(dev), 1e-12 * std::sqrt(scale)) << ortho_kind_name(kind);
        for (index_t c = 0; c < raw_cols; ++c) EXPECT_GE(r(c, c), 0.0);
    }
}

TEST(BasisStore, RankCollapseTruncatesWithSeam) {
    // identical MPK columns (A = I): pivot 2 fails, one column commits and
    // the dropped vector's coefficients survive as a zero-diagonal seam.
    const index_t n = 50;
    DenseMatrix v(n, 3);
    std::mt19937_64 rng(22);
    std::normal_distribution<double> dist;
    for (index_t i = 0; i < n; ++i) v(i, 0) = dist(rng);
    const double nrm = norm2(v.col(0), n);
    for (index_t i = 0; i < n; ++i) v(i, 0) /= nrm;
    v.set_col(1, v.col(0));
    v.set_col(2, v.col(0));

    BasisStore store(n, 9, 3, 9);
    SyncCounter sync;
    AppendOutcome oc = store.append_block(v, false, OrthoScheme{OrthoKind::BcgsPip2, 0}, sync);
    EXPECT_TRUE(oc.truncated);
    EXPECT_FALSE(oc.breakdown);
    EXPECT_EQ(oc.committed, 1u);
    EXPECT_EQ(oc.pivot, 2u);
    ASSERT_TRUE(store.has_seam_column());
    const UpperTriangular& r = store.coefficients();
    EXPECT_NEAR(r(0, 1), 1.0, 1e-12);  // dropped column ≈ q₁
    EXPECT_EQ(r(1, 1), 0.0);
}

TEST(BasisStore, StatesTrackTwoStageLifecycle) {
    const index_t n = 2000, m = 20, s = 5, shat = 10;
    GluedMatrix glued = gen_glued(n, m / s, s, 1e3, 1.0, 0.1, Seed{23});
    BasisStore store(n, m, s, shat);
    SyncCounter sync;
    store.preprocess_block(glued.matrix.col_range(0, s), false, sync);
    EXPECT_EQ(store.panel_states().back(), PanelState::Preprocessed);
    EXPECT_EQ(store.finalized_count(), 0u);
    EXPECT_GT(store.filled(), 0u);
    store.preprocess_block(glued.matrix.col_range(s, s), false, sync);
    store.finalize_big_panel(sync);
    EXPECT_EQ(store.finalized_count(), store.filled());
    for (PanelState st : store.panel_states()) EXPECT_EQ(st, PanelState::Final);
}
