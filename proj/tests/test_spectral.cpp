#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "krylov/dense_kernels.hpp"
#include "krylov/matgen.hpp"
#include "krylov/spectral.hpp"

using namespace krylov;

TEST(SingularValues, IdentityColumns) {
    DenseMatrix v(6, 3);
    for (index_t i = 0; i < 3; ++i) v(i, i) = 1.0;
    SpectralSummary s = singular_values(v);
    ASSERT_EQ(s.singular_values.size(), 3u);
    for (double sv : s.singular_values) EXPECT_NEAR(sv, 1.0, 1e-15);
    EXPECT_NEAR(s.cond, 1.0, 1e-14);
    EXPECT_TRUE(s.converged);
}

TEST(SingularValues, DuplicatedColumnIsRankOne) {
    DenseMatrix v(5, 2);
    for (index_t i = 0; i < 5; ++i) v(i, 0) = v(i, 1) = static_cast<double>(i + 1);
    const double nrm = norm2(v.col(0), 5);
    SpectralSummary s = singular_values(v);
    EXPECT_NEAR(s.singular_values[0], std::sqrt(2.0) * nrm, 1e-12 * nrm);
    EXPECT_NEAR(s.singular_values[1], 0.0, 1e-12 * nrm);
    EXPECT_TRUE(std::isinf(s.cond));
}

// The generator plants the spectrum; the oracle must recover it. The
// binary64 construction itself limits how well the smallest singular
// value is realized (≈ 1e-19·κ relative), so the asserted accuracy is
// 1e-8 up to κ = 1e10 and degrades to 1e-6 at κ = 1e12.
TEST(SingularValues, RecoversPlantedSpectrum) {
    struct Point {
        double kappa;
        double rel_tol;
    };
    for (const Point p : {Point{1e4, 1e-10}, Point{1e8, 1e-8}, Point{1e10, 1e-8},
                          Point{1e12, 1e-6}}) {
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            LogscaledPanel panel = gen_logscaled(100000, 5, p.kappa, Seed{seed});
            SpectralSummary s = singular_values(panel.matrix);
            ASSERT_EQ(s.singular_values.size(), panel.planted_sigma.size());
            for (index_t i = 0; i < 5; ++i) {
                EXPECT_NEAR(s.singular_values[i], panel.planted_sigma[i],
                            p.rel_tol * panel.planted_sigma[i])
                    << "kappa=" << p.kappa << " seed=" << seed << " i=" << i;
            }
        }
    }
}

TEST(SingularValues, TallAndSquarePathsAgree) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> dist;
    DenseMatrix v(200, 6);
    for (index_t j = 0; j < 6; ++j)
        for (index_t i = 0; i < 200; ++i) v(i, j) = dist(rng);
    SpectralSummary tall = singular_values(v);
    // square route: explicit R then the same oracle on a square input
    UpperTriangular r = householder_r(v);
    DenseMatrix sq(6, 6);
    for (index_t j = 0; j < 6; ++j)
        for (index_t i = 0; i <= j; ++i) sq(i, j) = r(i, j);
    SpectralSummary square = singular_values(sq);
    for (index_t i = 0; i < 6; ++i)
        EXPECT_NEAR(tall.singular_values[i], square.singular_values[i],
                    1e-12 * tall.singular_values[0]);
}

TEST(OrthoError, HandValues) {
    DenseMatrix id(4, 2);
    id(0, 0) = 1.0;
    id(1, 1) = 1.0;
    EXPECT_NEAR(ortho_error(id), 0.0, 1e-15);

    DenseMatrix dup(3, 2);
    dup(0, 0) = 1.0;
    dup(0, 1) = 1.0;  // Q = [e1, e1] → eigenvalues of [[0,-1],[-1,0]] are ±1
    EXPECT_NEAR(ortho_error(dup), 1.0, 1e-14);

    DenseMatrix scaled(3, 1);
    scaled(0, 0) = 2.0;  // |1 - 4| = 3
    EXPECT_NEAR(ortho_error(scaled), 3.0, 1e-14);
}

TEST(OrthoError, InvariantUnderColumnPermutation) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> dist;
    DenseMatrix v(50, 5);
    for (index_t j = 0; j < 5; ++j)
        for (index_t i = 0; i < 50; ++i) v(i, j) = dist(rng);
    QrResult qr = householder_qr(v);
    // perturb slightly so the error is nonzero
    DenseMatrix q = qr.q;
    q(0, 0) += 1e-8;
    const double base = ortho_error(q);

    std::vector<index_t> perm = {3, 0, 4, 1, 2};
    DenseMatrix shuffled(50, 5);
    for (index_t j = 0; j < 5; ++j) shuffled.set_col(j, q.col(perm[j]));
    EXPECT_NEAR(ortho_error(shuffled), base, 1e-12 * base + 1e-18);
}

TEST(AccumulatedCond, MatchesDirectOracle) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> dist;
    DenseMatrix base(300, 8);
    for (index_t j = 0; j < 8; ++j)
        for (index_t i = 0; i < 300; ++i) base(i, j) = dist(rng);
    DenseMatrix q = householder_qr(base).q;

    DenseMatrix x(300, 4);
    for (index_t j = 0; j < 4; ++j)
        for (index_t i = 0; i < 300; ++i) x(i, j) = dist(rng) * std::pow(10.0, -2.0 * j);

    SpectralSummary fast = accumulated_cond(q, x);
    DenseMatrix joint(300, 12);
    std::memcpy(joint.data(), q.data(), 300 * 8 * sizeof(double));
    std::memcpy(joint.col(8), x.data(), 300 * 4 * sizeof(double));
    SpectralSummary direct = singular_values(joint);
    EXPECT_NEAR(fast.cond, direct.cond, 1e-6 * direct.cond);
}
