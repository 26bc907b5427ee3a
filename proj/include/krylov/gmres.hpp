#pragma once

#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <span>
#include <vector>

#include "krylov/basis_store.hpp"
#include "krylov/block_ortho.hpp"
#include "krylov/csr_matrix.hpp"
#include "krylov/dense_kernels.hpp"
#include "krylov/types.hpp"

namespace krylov {

struct SolverConfig {
    index_t restart_len = 60;  // m
    index_t step = 5;          // s
    index_t big_step = 0;      // ŝ; 0 means ŝ = m
    OrthoScheme scheme{OrthoKind::BcgsPip2, 0};
    double rel_tol = 1e-6;
    index_t max_iters = 500000;

    index_t effective_big_step() const { return big_step == 0 ? restart_len : big_step; }

    void validate() const {
        if (restart_len == 0 || step == 0 || restart_len % step != 0)
            throw DimensionMismatch("step size must divide the restart length");
        const index_t shat = effective_big_step();
        if (shat < step || shat > restart_len || shat % step != 0)
            throw DimensionMismatch("second step size must be a multiple of s in [s, m]");
        if (rel_tol <= 0.0) throw std::invalid_argument("rel_tol must be positive");
    }
};

/// Monomial change-of-basis matrix: (m+1)×m with ones on the first
/// subdiagonal, so that A·V_{1:m} = V_{1:m+1}·T for the MPK sequence.
struct ChangeOfBasis {
    DenseMatrix t;

    static ChangeOfBasis monomial(index_t m) {
        ChangeOfBasis out;
        out.t = DenseMatrix(m + 1, m);
        for (index_t k = 0; k < m; ++k) out.t(k + 1, k) = 1.0;
        return out;
    }
};

enum class SolveStatus { Converged, MaxIters, OrthoBreakdown, Stagnation };

inline const char* solve_status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::MaxIters: return "max_iters";
        case SolveStatus::OrthoBreakdown: return "ortho_breakdown";
        case SolveStatus::Stagnation: return "stagnation";
    }
    return "?";
}

struct SolveReport {
    SolveStatus status = SolveStatus::MaxIters;
    index_t iterations = 0;  // basis vectors generated
    index_t restarts = 0;
    double initial_residual = 0.0;
    double final_relative_residual = 0.0;
    std::vector<double> cycle_residuals;  // relative, one per completed cycle
    bool breakdown = false;
    double breakdown_kappa = 0.0;
    SyncCounter sync;                    // orthogonalization reduces only
    double reduces_per_iteration = 0.0;
    double wall_seconds = 0.0;           // informational, excluded from determinism
    std::vector<double> solution;
};

/// Matrix powers kernel with the monomial basis: column k+1 = A·(column k),
/// column 0 is the start vector exactly as given (not renormalized).
inline DenseMatrix mpk_monomial(const CsrMatrix& a, std::span<const double> v_start,
                                index_t s) {
    if (v_start.size() != a.n) throw DimensionMismatch("mpk start vector length");
    DenseMatrix v(a.n, s + 1);
    std::memcpy(v.col(0), v_start.data(), a.n * sizeof(double));
    for (index_t k = 0; k < s; ++k) {
        std::vector<double> next = spmv(a, std::span<const double>(v.col(k), a.n));
        v.set_col(k + 1, next.data());
    }
    return v;
}

/// Hessenberg assembly H with A·Q_{1:m} = Q_{1:m+1}·H, from the stored
/// coefficients: H starts as R_{1:m+1,1:m+1}·T (the shifted raw-product
/// expansions) and is then corrected blockwise — each MPK block's columns
/// are right-solved against its own coefficient block, with the carried
/// seam column's re-expansion substituted where the block restarted from
/// an orthonormalized vector. Entries below the first subdiagonal are
/// hard-zeroed. Throws SingularR on a zero pivot (GMRES stagnation /
/// lucky breakdown).
inline DenseMatrix assemble_hessenberg(const UpperTriangular& r, const ChangeOfBasis& cob,
                                       index_t m, std::span<const BlockRecord> blocks) {
    if (r.dim() < m + 1) throw DimensionMismatch("coefficient matrix too small");
    if (cob.t.rows() != m + 1 || cob.t.cols() != m)
        throw DimensionMismatch("change-of-basis shape");

    const UpperTriangular r_lead = r.leading(m + 1);
    DenseMatrix h = mat_mul(r_lead.view(), cob.t);  // (m+1)×m numerators

    for (const BlockRecord& b : blocks) {
        if (b.c0 >= m) break;
        const bool last = (&b == &blocks.back());
        // A block of w committed columns yields w−1 Hessenberg columns; a
        // trailing breakdown seam extends the last block by one more.
        index_t owned = std::min(m - b.c0, b.width - 1);
        if (last) owned = std::min(m - b.c0, b.width);
        for (index_t k = 0; k < owned; ++k) {
            double* col = h.col(b.c0 + k);
            for (index_t l = 0; l < b.c0; ++l) {
                const double coeff = (k == 0 && b.overlap) ? b.carried[l] : r(l, b.c0 + k);
                if (coeff != 0.0) axpy(-coeff, h.col(l), col, m + 1);
            }
            for (index_t i = 0; i < k; ++i) {
                const double rik = r(b.c0 + i, b.c0 + k);
                if (rik != 0.0) axpy(-rik, h.col(b.c0 + i), col, m + 1);
            }
            const double diag =
                (k == 0 && b.overlap) ? b.carried_diag : r(b.c0 + k, b.c0 + k);
            if (diag == 0.0) throw SingularR(b.c0 + k + 1);
            const double inv = 1.0 / diag;
            for (index_t i = 0; i < m + 1; ++i) col[i] *= inv;
        }
    }
    for (index_t j = 0; j < m; ++j)
        for (index_t i = j + 2; i < m + 1; ++i) h(i, j) = 0.0;
    return h;
}

struct LsqResult {
    std::vector<double> y;      // length valid_cols
    double implicit_residual = 0.0;
    index_t valid_cols = 0;     // < h.cols() signals a singular triangular factor
};

/// Least squares min ‖γe₁ − H y‖ by Givens QR of the Hessenberg matrix;
/// the implicit residual is the magnitude of the last rotated rhs entry.
inline LsqResult solve_hessenberg_lsq(ConstMatrixView h, double gamma) {
    const index_t k_cols = h.cols();
    if (h.rows() != k_cols + 1) throw DimensionMismatch("Hessenberg shape");

    DenseMatrix work(k_cols + 1, k_cols);
    std::memcpy(work.data(), h.data(), (k_cols + 1) * k_cols * sizeof(double));
    std::vector<double> g(k_cols + 1, 0.0), cs(k_cols, 1.0), sn(k_cols, 0.0);
    g[0] = gamma;

    LsqResult out;
    index_t valid = k_cols;
    for (index_t k = 0; k < k_cols; ++k) {
        for (index_t i = 0; i < k; ++i) {
            const double t = cs[i] * work(i, k) + sn[i] * work(i + 1, k);
            work(i + 1, k) = -sn[i] * work(i, k) + cs[i] * work(i + 1, k);
            work(i, k) = t;
        }
        const double d = std::hypot(work(k, k), work(k + 1, k));
        if (d == 0.0) {
            valid = k;  // singular triangular factor: stop before this column
            break;
        }
        cs[k] = work(k, k) / d;
        sn[k] = work(k + 1, k) / d;
        work(k, k) = d;
        work(k + 1, k) = 0.0;
        g[k + 1] = -sn[k] * g[k];
        g[k] = cs[k] * g[k];
    }

    out.valid_cols = valid;
    out.implicit_residual = std::abs(g[valid]);
    out.y.assign(valid, 0.0);
    for (index_t i = valid; i-- > 0;) {
        double s = g[i];
        for (index_t l = i + 1; l < valid; ++l) s -= work(i, l) * out.y[l];
        out.y[i] = s / work(i, i);
    }
    return out;
}

namespace detail {

inline std::vector<double> residual(const CsrMatrix& a, std::span<const double> b,
                                    const std::vector<double>& x) {
    std::vector<double> r = spmv(a, x);
    for (index_t i = 0; i < a.n; ++i) r[i] = b[i] - r[i];
    return r;
}

// s-step GMRES per the restart pseudocode, with the standard per-column
// CGS2 loop as the step == 1 degenerate mode.
inline SolveReport gmres_impl(const CsrMatrix& a, std::span<const double> b,
                              std::span<const double> x0, const SolverConfig& cfg,
                              bool standard_mode) {
    cfg.validate();
    if (b.size() != a.n) throw DimensionMismatch("rhs length");
    if (!x0.empty() && x0.size() != a.n) throw DimensionMismatch("x0 length");

    const auto t_start = std::chrono::steady_clock::now();
    const index_t m = cfg.restart_len;
    const index_t s = standard_mode ? 1 : cfg.step;
    const bool two_stage = (cfg.scheme.kind == OrthoKind::TwoStage) && !standard_mode;
    const index_t shat = two_stage ? cfg.effective_big_step() : s;

    SolveReport rep;
    rep.solution.assign(a.n, 0.0);
    if (!x0.empty()) std::copy(x0.begin(), x0.end(), rep.solution.begin());

    std::vector<double> r = residual(a, b, rep.solution);
    const double r0 = norm2(r);
    rep.initial_residual = r0;
    if (r0 == 0.0) {
        rep.status = SolveStatus::Converged;
        return rep;
    }

    BasisStore store(a.n, m, s, shat);

    // Largest Hessenberg column count currently assemblable (a breakdown
    // seam column with zero diagonal extends it by one).
    auto usable_cols = [&]() -> index_t {
        index_t k = store.filled() == 0 ? 0 : store.filled() - 1;
        if (store.has_seam_column()) ++k;
        const UpperTriangular& rr = store.coefficients();
        for (index_t j = 0; j < k; ++j)
            if (rr(j, j) == 0.0) return j;
        return k;
    };

    struct Check {
        bool implicit_crossed = false;
        bool applied = false;
        double explicit_rel = std::numeric_limits<double>::infinity();
    };

    // At most one solution update per cycle goes through here. `force`
    // computes the update regardless of the implicit residual (cycle end,
    // breakdown); otherwise the candidate is only formed once the implicit
    // Givens residual crosses the tolerance, and is then confirmed
    // explicitly. Updates that would increase the residual are discarded.
    auto check_and_update = [&](double gamma, bool force) -> Check {
        Check res;
        const index_t k = usable_cols();
        if (k == 0) return res;
        DenseMatrix h = assemble_hessenberg(store.coefficients(), ChangeOfBasis::monomial(k),
                                            k, store.block_records());
        LsqResult lsq = solve_hessenberg_lsq(h, gamma);
        res.implicit_crossed = lsq.implicit_residual <= cfg.rel_tol * r0;
        if (!res.implicit_crossed && !force) return res;

        std::vector<double> x_new = rep.solution;
        for (index_t l = 0; l < lsq.valid_cols; ++l)
            axpy(lsq.y[l], store.column(l), x_new.data(), a.n);
        std::vector<double> r_new = residual(a, b, x_new);
        const double rn = norm2(r_new);
        res.explicit_rel = rn / r0;
        if (rn <= gamma * (1.0 + 1e-12)) {
            rep.solution = std::move(x_new);
            r = std::move(r_new);
            res.applied = true;
        }
        return res;
    };

    bool done = false;
    int stagnation_strikes = 0;

    while (!done) {
        const double gamma = norm2(r);
        if (gamma / r0 <= cfg.rel_tol) {
            rep.status = SolveStatus::Converged;
            break;
        }
        if (rep.iterations >= cfg.max_iters) {
            rep.status = SolveStatus::MaxIters;
            break;
        }

        store.reset();
        std::vector<double> v1(r);
        for (double& vi : v1) vi /= gamma;
        if (standard_mode) store.seed_unit_column(v1.data());

        bool updated_this_cycle = false;  // exactly one x update per cycle
        const index_t blocks = m / s;

        for (index_t j = 0; j < blocks && !done; ++j) {
            AppendOutcome oc;
            if (standard_mode) {
                std::vector<double> w =
                    spmv(a, std::span<const double>(store.column(store.filled() - 1), a.n));
                DenseMatrix wv(a.n, 1, std::move(w));
                oc = store.append_block(wv, false, cfg.scheme, rep.sync);
            } else {
                std::vector<double> start(a.n);
                if (j == 0)
                    std::copy(v1.begin(), v1.end(), start.begin());
                else
                    std::memcpy(start.data(), store.column(store.filled() - 1),
                                a.n * sizeof(double));
                DenseMatrix v_block = mpk_monomial(a, start, s);
                if (two_stage)
                    oc = store.preprocess_block(v_block, j != 0, rep.sync);
                else
                    oc = store.append_block(v_block, j != 0, cfg.scheme, rep.sync);
            }
            rep.iterations += s;

            if (oc.breakdown || oc.truncated) {
                // Aborts the cycle: either the truncated basis already
                // solves the system (lucky breakdown) or the scheme failed.
                rep.breakdown = true;
                rep.breakdown_kappa = oc.kappa_estimate;
                if (two_stage && store.big_panel_open()) store.finalize_big_panel(rep.sync);
                Check res = check_and_update(gamma, true);
                updated_this_cycle = true;
                rep.status = (res.explicit_rel <= cfg.rel_tol) ? SolveStatus::Converged
                                                               : SolveStatus::OrthoBreakdown;
                done = true;
                break;
            }

            if (two_stage) {
                const bool last_block = (j + 1 == blocks);
                if (store.big_panel_full() || last_block) {
                    AppendOutcome fin = store.finalize_big_panel(rep.sync);
                    if (fin.breakdown) {
                        rep.breakdown = true;
                        rep.breakdown_kappa = fin.kappa_estimate;
                        Check res = check_and_update(gamma, true);
                        updated_this_cycle = true;
                        rep.status = (res.explicit_rel <= cfg.rel_tol)
                                         ? SolveStatus::Converged
                                         : SolveStatus::OrthoBreakdown;
                        done = true;
                        break;
                    }
                } else {
                    continue;  // convergence is only observable per big panel
                }
            }

            Check res = check_and_update(gamma, false);
            if (res.implicit_crossed) {
                updated_this_cycle = true;
                if (res.explicit_rel <= cfg.rel_tol) {
                    rep.status = SolveStatus::Converged;
                    done = true;
                } else {
                    break;  // implicit check was optimistic: restart from the update
                }
            }
        }

        if (!updated_this_cycle) check_and_update(gamma, true);
        const double rnorm = norm2(r);
        rep.cycle_residuals.push_back(rnorm / r0);
        if (done) break;
        ++rep.restarts;

        if (rnorm / r0 <= cfg.rel_tol) {
            rep.status = SolveStatus::Converged;
            break;
        }
        // Explicit residual reduced by less than 1% over a full cycle,
        // twice consecutively: stagnation.
        if (rnorm > 0.99 * gamma) {
            if (++stagnation_strikes >= 2) {
                rep.status = SolveStatus::Stagnation;
                break;
            }
        } else {
            stagnation_strikes = 0;
        }
    }

    rep.final_relative_residual = norm2(r) / r0;
    if (rep.iterations > 0)
        rep.reduces_per_iteration =
            static_cast<double>(rep.sync.reduces) / static_cast<double>(rep.iterations);
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

}  // namespace detail

/// s-step GMRES (blocks of s basis vectors per orthogonalization step,
/// restart length m, monomial MPK) with the configured block scheme.
inline SolveReport sstep_gmres(const CsrMatrix& a, std::span<const double> b,
                               std::span<const double> x0, const SolverConfig& cfg) {
    return detail::gmres_impl(a, b, x0, cfg, false);
}

/// Standard restarted GMRES: the s = 1 degenerate configuration, one new
/// basis vector per step orthogonalized by CGS2 (4 reduces per iteration),
/// convergence checked every iteration.
inline SolveReport standard_gmres(const CsrMatrix& a, std::span<const double> b,
                                  std::span<const double> x0, const SolverConfig& cfg) {
    SolverConfig std_cfg = cfg;
    std_cfg.step = 1;
    std_cfg.big_step = 0;
    std_cfg.scheme = OrthoScheme{OrthoKind::Bcgs2Cholqr2, 0};
    return detail::gmres_impl(a, b, x0, std_cfg, true);
}

}  // namespace krylov
