#pragma once

#include <cmath>
#include <vector>

#include "krylov/csr_matrix.hpp"
#include "krylov/dense_kernels.hpp"
#include "krylov/dense_matrix.hpp"
#include "krylov/rng.hpp"
#include "krylov/types.hpp"

namespace krylov {

namespace detail {

// Column-major standard-Gaussian fill; consumption order is part of the
// reproducibility contract.
inline DenseMatrix gaussian_matrix(index_t rows, index_t cols, GaussianSource& g) {
    DenseMatrix m(rows, cols);
    for (index_t j = 0; j < cols; ++j) {
        double* c = m.col(j);
        for (index_t i = 0; i < rows; ++i) c[i] = g.next();
    }
    return m;
}

inline DenseMatrix random_orthonormal(index_t rows, index_t cols, GaussianSource& g) {
    return householder_qr(gaussian_matrix(rows, cols, g)).q;
}

// Σ_i = kappa^(-(i-1)/(k-1)), i.e. logspace from 1 down to 1/kappa.
inline std::vector<double> logspace_spectrum(index_t k, double kappa) {
    std::vector<double> s(k, 1.0);
    for (index_t i = 1; i < k; ++i)
        s[i] = std::pow(kappa, -static_cast<double>(i) / static_cast<double>(k - 1));
    return s;
}

}  // namespace detail

struct LogscaledPanel {
    DenseMatrix matrix;                  // n×k, V = XΣYᵀ
    std::vector<double> planted_sigma;   // the Σ diagonal, kept for oracle tests
};

/// Tall panel with a planted logspace spectrum: V = XΣYᵀ with random
/// orthonormal X (n×k) and Y (k×k), Σ_ii = kappa^(−(i−1)/(k−1)).
inline LogscaledPanel gen_logscaled(index_t n, index_t k, double kappa, Seed seed) {
    if (n < k || k < 1) throw DimensionMismatch("gen_logscaled needs n >= k >= 1");
    if (kappa < 1.0) throw std::invalid_argument("gen_logscaled needs kappa >= 1");

    GaussianSource g(seed);
    const DenseMatrix x = detail::random_orthonormal(n, k, g);
    const DenseMatrix y = detail::random_orthonormal(k, k, g);
    const std::vector<double> sigma =
        (k == 1) ? std::vector<double>{1.0} : detail::logspace_spectrum(k, kappa);

    DenseMatrix xs(n, k);
    for (index_t j = 0; j < k; ++j) {
        const double* src = x.col(j);
        double* dst = xs.col(j);
        for (index_t i = 0; i < n; ++i) dst[i] = src[i] * sigma[j];
    }
    LogscaledPanel out;
    out.matrix = mat_mul(xs, y, Op::None, Op::Trans);
    out.planted_sigma = sigma;
    return out;
}

struct GluedMatrix {
    DenseMatrix matrix;  // n × p·s, panel j in columns [j·s, (j+1)·s)
    index_t panels = 0;
    index_t panel_cols = 0;
};

/// Block matrix with prescribed per-panel conditioning and geometrically
/// growing prefix conditioning: one shared orthonormal basis is split into
/// panels, each mixed with a common direction (`coupling`) so panels are
/// not exactly mutually orthogonal, given a logspace spectrum 1→1/κ_panel,
/// and scaled down by growth^(−(j−1)). The measured contract (not the
/// construction) is what tests verify: κ(panel j) within ×10 of
/// kappa_panel and κ(V_{1:j}) within ×30 of growth^(j−1)·kappa_panel.
inline GluedMatrix gen_glued(index_t n, index_t p, index_t s, double kappa_panel,
                             double growth, double coupling, Seed seed) {
    if (p < 1 || s < 1 || n < p * s) throw DimensionMismatch("gen_glued needs n >= p*s");
    if (growth < 1.0) throw std::invalid_argument("gen_glued needs growth >= 1");
    if (coupling < 0.0 || coupling >= 1.0)
        throw std::invalid_argument("gen_glued needs 0 <= coupling < 1");

    GaussianSource g(seed);
    const DenseMatrix basis = detail::random_orthonormal(n, p * s + 1, g);
    const double* shared = basis.col(p * s);
    const std::vector<double> sigma =
        (s == 1) ? std::vector<double>{1.0} : detail::logspace_spectrum(s, kappa_panel);

    GluedMatrix out;
    out.matrix = DenseMatrix(n, p * s);
    out.panels = p;
    out.panel_cols = s;

    for (index_t j = 0; j < p; ++j) {
        std::vector<double> w(s);
        for (index_t i = 0; i < s; ++i) w[i] = g.next();
        const double wn = norm2(w);
        for (double& wi : w) wi /= wn;

        // X'_j = column-normalized (X_j + coupling · x_shared · wᵀ), scaled by Σ.
        DenseMatrix mixed(n, s);
        for (index_t c = 0; c < s; ++c) {
            const double* xc = basis.col(j * s + c);
            double* mc = mixed.col(c);
            const double cw = coupling * w[c];
            for (index_t i = 0; i < n; ++i) mc[i] = xc[i] + cw * shared[i];
            const double scale = sigma[c] / norm2(mc, n);
            for (index_t i = 0; i < n; ++i) mc[i] *= scale;
        }

        const DenseMatrix y = detail::random_orthonormal(s, s, g);
        const DenseMatrix panel = mat_mul(mixed, y, Op::None, Op::Trans);
        const double panel_scale = std::pow(growth, -static_cast<double>(j));
        for (index_t c = 0; c < s; ++c) {
            const double* src = panel.col(c);
            double* dst = out.matrix.col(j * s + c);
            for (index_t i = 0; i < n; ++i) dst[i] = panel_scale * src[i];
        }
    }
    return out;
}

/// Dirichlet finite-difference Laplacian on an nx×ny grid, row-major node
/// ordering. 5-point: diagonal 4, neighbours −1. 9-point: the standard
/// compact stencil, diagonal 8/3 and all eight neighbours −1/3 (interior
/// row sums vanish).
inline CsrMatrix gen_laplace2d(index_t nx, index_t ny, int stencil = 5) {
    if (nx < 2 || ny < 2) throw DimensionMismatch("gen_laplace2d needs dimensions >= 2");
    if (stencil != 5 && stencil != 9)
        throw std::invalid_argument("gen_laplace2d stencil must be 5 or 9");

    const index_t n = nx * ny;
    std::vector<std::tuple<index_t, index_t, double>> trip;
    trip.reserve(n * static_cast<index_t>(stencil));
    const double diag = (stencil == 5) ? 4.0 : 8.0 / 3.0;
    const double off = (stencil == 5) ? -1.0 : -1.0 / 3.0;

    for (index_t iy = 0; iy < ny; ++iy) {
        for (index_t ix = 0; ix < nx; ++ix) {
            const index_t row = iy * nx + ix;
            trip.emplace_back(row, row, diag);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    if (stencil == 5 && dx != 0 && dy != 0) continue;
                    const long long jx = static_cast<long long>(ix) + dx;
                    const long long jy = static_cast<long long>(iy) + dy;
                    if (jx < 0 || jy < 0 || jx >= static_cast<long long>(nx) ||
                        jy >= static_cast<long long>(ny))
                        continue;
                    trip.emplace_back(row, static_cast<index_t>(jy) * nx + static_cast<index_t>(jx), off);
                }
            }
        }
    }
    return CsrMatrix::from_triplets(n, std::move(trip));
}

/// 7-point 3D Laplacian, Dirichlet boundaries: diagonal 6, neighbours −1.
inline CsrMatrix gen_laplace3d(index_t nx, index_t ny, index_t nz) {
    if (nx < 2 || ny < 2 || nz < 2) throw DimensionMismatch("gen_laplace3d needs dimensions >= 2");
    const index_t n = nx * ny * nz;
    std::vector<std::tuple<index_t, index_t, double>> trip;
    trip.reserve(n * 7);
    for (index_t iz = 0; iz < nz; ++iz) {
        for (index_t iy = 0; iy < ny; ++iy) {
            for (index_t ix = 0; ix < nx; ++ix) {
                const index_t row = (iz * ny + iy) * nx + ix;
                trip.emplace_back(row, row, 6.0);
                if (ix > 0) trip.emplace_back(row, row - 1, -1.0);
                if (ix + 1 < nx) trip.emplace_back(row, row + 1, -1.0);
                if (iy > 0) trip.emplace_back(row, row - nx, -1.0);
                if (iy + 1 < ny) trip.emplace_back(row, row + nx, -1.0);
                if (iz > 0) trip.emplace_back(row, row - nx * ny, -1.0);
                if (iz + 1 < nz) trip.emplace_back(row, row + nx * ny, -1.0);
            }
        }
    }
    return CsrMatrix::from_triplets(n, std::move(trip));
}

/// Right-hand side whose exact solution is the all-ones vector: b = A·1.
inline std::vector<double> gen_rhs_ones(const CsrMatrix& a) {
    std::vector<double> ones(a.n, 1.0);
    return spmv(a, ones);
}

}  // namespace krylov
