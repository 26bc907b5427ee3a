#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "krylov/basis_store.hpp"
#include "krylov/block_ortho.hpp"
#include "krylov/gmres.hpp"
#include "krylov/matgen.hpp"
#include "krylov/matrix_market.hpp"
#include "krylov/spectral.hpp"

namespace krylov {

/// Scientific notation with 17 significant digits, '.' decimal separator.
inline std::string fmt_sci(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.16e", v);
    return std::string(buf);
}

inline std::string fmt_opt(std::optional<double> v) {
    return v.has_value() ? fmt_sci(*v) : std::string();
}

inline std::vector<double> kappa_decades(double kappa_min, double kappa_max) {
    std::vector<double> grid;
    for (double k = kappa_min; k <= kappa_max * (1.0 + 1e-12); k *= 10.0)
        grid.push_back(k);
    return grid;
}

// ---------------------------------------------------------------------------
// ortho-sweep: orthogonality error vs condition number (one scheme, κ grid,
// several seeds). CholQR2 sweeps run on logscaled panels; BCGS-PIP2 sweeps
// run block-by-block over glued matrices with matching panel and overall κ.
// ---------------------------------------------------------------------------

enum class SweepScheme { CholQr2, BcgsPip2 };

struct OrthoSweepParams {
    SweepScheme scheme = SweepScheme::CholQr2;
    index_t n = 100000;
    index_t k = 5;       // panel columns
    index_t panels = 4;  // glued sweeps only
    double coupling = 0.1;
    double kappa_min = 1e1;
    double kappa_max = 1e15;
    index_t seeds = 10;
};

struct OrthoSweepRow {
    double kappa_target = 0.0;
    std::uint64_t seed = 0;
    double kappa_measured = 0.0;
    std::optional<double> first_pass_error;
    std::optional<double> intermediate_kappa;
    std::optional<double> final_error;
    bool breakdown = false;
};

inline OrthoSweepRow sweep_point_cholqr2(const OrthoSweepParams& p, double kappa,
                                         std::uint64_t seed) {
    OrthoSweepRow row;
    row.kappa_target = kappa;
    row.seed = seed;
    LogscaledPanel panel = gen_logscaled(p.n, p.k, kappa, Seed{seed});
    row.kappa_measured = singular_values(panel.matrix).cond;
    SyncCounter sync;
    try {
        BlockQr first = cholqr(panel.matrix, sync);
        row.first_pass_error = ortho_error(first.q);
        row.intermediate_kappa = singular_values(first.q).cond;
        BlockQr second = cholqr(first.q, sync);
        row.final_error = ortho_error(second.q);
    } catch (const NotPositiveDefinite&) {
        row.breakdown = true;
    }
    return row;
}

/// ‖I − [Q, X]ᵀ[Q, X]‖₂ without mutating either part.
inline double ortho_error_with_prefix(ConstMatrixView q, ConstMatrixView x) {
    if (q.empty()) return ortho_error(x);
    const index_t total = q.cols() + x.cols();
    DenseMatrix joint(q.rows(), total);
    std::memcpy(joint.data(), q.data(), q.rows() * q.cols() * sizeof(double));
    std::memcpy(joint.col(q.cols()), x.data(), x.rows() * x.cols() * sizeof(double));
    return ortho_error(joint);
}

inline OrthoSweepRow sweep_point_pip2(const OrthoSweepParams& p, double kappa,
                                      std::uint64_t seed) {
    OrthoSweepRow row;
    row.kappa_target = kappa;
    row.seed = seed;
    GluedMatrix glued = gen_glued(p.n, p.panels, p.k, kappa, 1.0, p.coupling, Seed{seed});
    row.kappa_measured = singular_values(glued.matrix).cond;

    SyncCounter sync;
    DenseMatrix q_acc(p.n, 0);
    double worst_first = 0.0, worst_kappa = 1.0;
    try {
        for (index_t j = 0; j < p.panels; ++j) {
            ConstMatrixView v = glued.matrix.col_range(j * p.k, p.k);
            ConstMatrixView prev = q_acc.view();
            BlockOrthoResult first = bcgs_pip(prev, v, sync);
            // intermediate state after the single PIP pass
            worst_first = std::max(
                worst_first, ortho_error_with_prefix(prev, first.q));
            worst_kappa = std::max(worst_kappa, accumulated_cond(prev, first.q).cond);
            BlockOrthoResult second = bcgs_pip(prev, first.q, sync);
            DenseMatrix grown(p.n, q_acc.cols() + p.k);
            if (q_acc.cols() > 0)
                std::memcpy(grown.data(), q_acc.data(), p.n * q_acc.cols() * sizeof(double));
            for (index_t c = 0; c < p.k; ++c)
                grown.set_col(q_acc.cols() + c, second.q.col(c));
            q_acc = std::move(grown);
        }
        row.first_pass_error = worst_first;
        row.intermediate_kappa = worst_kappa;
        row.final_error = ortho_error(q_acc);
    } catch (const NotPositiveDefinite&) {
        row.breakdown = true;
    }
    return row;
}

inline std::vector<OrthoSweepRow> run_ortho_sweep(const OrthoSweepParams& p) {
    std::vector<OrthoSweepRow> rows;
    for (double kappa : kappa_decades(p.kappa_min, p.kappa_max)) {
        for (std::uint64_t seed = 1; seed <= p.seeds; ++seed) {
            rows.push_back(p.scheme == SweepScheme::CholQr2
                               ? sweep_point_cholqr2(p, kappa, seed)
                               : sweep_point_pip2(p, kappa, seed));
        }
    }
    return rows;
}

inline void write_ortho_sweep_csv(std::ostream& out, const OrthoSweepParams& p,
                                  const std::vector<OrthoSweepRow>& rows) {
    out << "scheme,n,k,panels,kappa_target,seed,kappa_measured,first_pass_error,"
           "intermediate_kappa,final_error,breakdown\n";
    const char* name = (p.scheme == SweepScheme::CholQr2) ? "cholqr2" : "bcgs-pip2";
    for (const auto& r : rows) {
        out << name << ',' << p.n << ',' << p.k << ',' << p.panels << ','
            << fmt_sci(r.kappa_target) << ',' << r.seed << ',' << fmt_sci(r.kappa_measured)
            << ',' << fmt_opt(r.first_pass_error) << ',' << fmt_opt(r.intermediate_kappa)
            << ',' << fmt_opt(r.final_error) << ',' << (r.breakdown ? 1 : 0) << '\n';
    }
}

inline void write_ortho_sweep_summary_csv(std::ostream& out, const OrthoSweepParams& p,
                                          const std::vector<OrthoSweepRow>& rows) {
    out << "scheme,n,k,panels,kappa_target,seeds,final_min,final_avg,final_max,"
           "breakdowns\n";
    const char* name = (p.scheme == SweepScheme::CholQr2) ? "cholqr2" : "bcgs-pip2";
    for (double kappa : kappa_decades(p.kappa_min, p.kappa_max)) {
        double mn = std::numeric_limits<double>::infinity(), mx = 0.0, sum = 0.0;
        index_t cnt = 0, broke = 0;
        for (const auto& r : rows) {
            if (r.kappa_target != kappa) continue;
            if (r.breakdown || !r.final_error.has_value()) {
                ++broke;
                continue;
            }
            mn = std::min(mn, *r.final_error);
            mx = std::max(mx, *r.final_error);
            sum += *r.final_error;
            ++cnt;
        }
        out << name << ',' << p.n << ',' << p.k << ',' << p.panels << ','
            << fmt_sci(kappa) << ',' << p.seeds << ','
            << (cnt ? fmt_sci(mn) : std::string()) << ','
            << (cnt ? fmt_sci(sum / static_cast<double>(cnt)) : std::string()) << ','
            << (cnt ? fmt_sci(mx) : std::string()) << ',' << broke << '\n';
    }
}

// ---------------------------------------------------------------------------
// glued-trace: two-stage scheme on a pre-generated glued matrix, tracking
// raw-prefix and preprocessed-prefix condition numbers per block and the
// orthogonality error at every big-panel boundary.
// ---------------------------------------------------------------------------

struct GluedTraceParams {
    index_t n = 100000;
    index_t m = 180;
    index_t s = 5;
    index_t shat = 60;
    double kappa_panel = 1e7;
    double growth = 2.0;
    double coupling = 0.1;
    index_t seeds = 1;
};

struct GluedTraceRow {
    std::uint64_t seed = 0;
    index_t block = 0;          // 1-based
    index_t cols = 0;           // columns accumulated
    double kappa_raw_prefix = 0.0;
    double kappa_pre_prefix = 0.0;
    bool boundary = false;
    std::optional<double> final_ortho_error;
    bool breakdown = false;
};

inline std::vector<GluedTraceRow> run_glued_trace(const GluedTraceParams& p) {
    std::vector<GluedTraceRow> rows;
    const index_t blocks = p.m / p.s;
    const index_t per_panel = p.shat / p.s;

    for (std::uint64_t seed = 1; seed <= p.seeds; ++seed) {
        GluedMatrix glued =
            gen_glued(p.n, blocks, p.s, p.kappa_panel, p.growth, p.coupling, Seed{seed});
        BasisStore store(p.n, p.m, p.s, p.shat);
        SyncCounter sync;
        index_t panel_first = 0;  // first block (0-based) of the open big panel

        for (index_t j = 0; j < blocks; ++j) {
            GluedTraceRow row;
            row.seed = seed;
            row.block = j + 1;

            AppendOutcome oc =
                store.preprocess_block(glued.matrix.col_range(j * p.s, p.s), false, sync);
            row.cols = store.filled();
            if (oc.breakdown || oc.truncated) {
                row.breakdown = true;
                rows.push_back(row);
                break;
            }

            ConstMatrixView finals = store.finalized();
            ConstMatrixView raw_prefix =
                glued.matrix.col_range(panel_first * p.s, (j + 1 - panel_first) * p.s);
            row.kappa_raw_prefix = accumulated_cond(finals, raw_prefix).cond;
            row.kappa_pre_prefix = accumulated_cond(finals, store.big_panel()).cond;

            if ((j + 1) % per_panel == 0 || j + 1 == blocks) {
                AppendOutcome fin = store.finalize_big_panel(sync);
                row.boundary = true;
                if (fin.breakdown) {
                    row.breakdown = true;
                } else {
                    row.final_ortho_error = ortho_error(store.finalized());
                }
                panel_first = j + 1;
            }
            rows.push_back(row);
            if (row.breakdown) break;
        }
    }
    return rows;
}

inline void write_glued_trace_csv(std::ostream& out, const GluedTraceParams& p,
                                  const std::vector<GluedTraceRow>& rows) {
    out << "n,m,s,shat,kappa_panel,growth,coupling,seed,block,cols,kappa_raw_prefix,"
           "kappa_pre_prefix,boundary,final_ortho_error,breakdown\n";
    for (const auto& r : rows) {
        out << p.n << ',' << p.m << ',' << p.s << ',' << p.shat << ','
            << fmt_sci(p.kappa_panel) << ',' << fmt_sci(p.growth) << ','
            << fmt_sci(p.coupling) << ',' << r.seed << ',' << r.block << ',' << r.cols
            << ',' << fmt_sci(r.kappa_raw_prefix) << ',' << fmt_sci(r.kappa_pre_prefix)
            << ',' << (r.boundary ? 1 : 0) << ',' << fmt_opt(r.final_ortho_error) << ','
            << (r.breakdown ? 1 : 0) << '\n';
    }
}

// ---------------------------------------------------------------------------
// mpk-trace: MPK-generated Krylov vectors through the two-stage scheme on an
// equilibrated operator, per-step condition numbers and per-big-panel
// orthogonality errors.
// ---------------------------------------------------------------------------

struct MpkTraceParams {
    index_t m = 60;
    index_t s = 5;
    index_t shat = 60;
    std::uint64_t seed = 1;
    bool equilibrate_input = true;
};

struct MpkTraceRow {
    index_t step = 0;  // global basis vector count after this MPK column
    double kappa_pre_prefix = 0.0;  // κ([Q_final, Q̂ prefix, partial panel])
    bool boundary = false;
    std::optional<double> final_ortho_error;
    bool breakdown = false;
};

inline std::vector<MpkTraceRow> run_mpk_trace(const CsrMatrix& a_in, const MpkTraceParams& p) {
    const CsrMatrix a = p.equilibrate_input ? equilibrate(a_in) : a_in;
    std::vector<MpkTraceRow> rows;

    GaussianSource g(Seed{p.seed});
    std::vector<double> start(a.n);
    for (double& v : start) v = g.next();
    const double nrm = norm2(start);
    for (double& v : start) v /= nrm;

    BasisStore store(a.n, p.m, p.s, p.shat);
    SyncCounter sync;
    const index_t blocks = p.m / p.s;

    for (index_t j = 0; j < blocks; ++j) {
        std::vector<double> v0(a.n);
        if (j == 0)
            std::copy(start.begin(), start.end(), v0.begin());
        else
            std::memcpy(v0.data(), store.column(store.filled() - 1), a.n * sizeof(double));
        DenseMatrix v_block = mpk_monomial(a, v0, p.s);

        // per-step κ of [finalized, preprocessed, raw MPK columns so far]
        ConstMatrixView finals = store.finalized();
        const index_t pre_cols = store.filled() - store.finalized_count();
        for (index_t k = 1; k <= p.s; ++k) {
            DenseMatrix tail(a.n, pre_cols + (j == 0 ? k + 1 : k));
            index_t c = 0;
            for (index_t l = 0; l < pre_cols; ++l)
                tail.set_col(c++, store.column(store.finalized_count() + l));
            // the carried first column is already in the store for j > 0
            for (index_t l = (j == 0 ? 0 : 1); l <= k; ++l)
                tail.set_col(c++, v_block.col(l));
            MpkTraceRow row;
            row.step = j * p.s + k;
            row.kappa_pre_prefix = accumulated_cond(finals, tail).cond;
            rows.push_back(row);
        }

        AppendOutcome oc = store.preprocess_block(v_block, j != 0, sync);
        if (oc.breakdown || oc.truncated) {
            MpkTraceRow row;
            row.step = j * p.s + p.s;
            row.breakdown = true;
            rows.push_back(row);
            return rows;
        }
        if (store.big_panel_full() || j + 1 == blocks) {
            AppendOutcome fin = store.finalize_big_panel(sync);
            MpkTraceRow row;
            row.step = store.filled() - 1;
            row.boundary = true;
            if (fin.breakdown)
                row.breakdown = true;
            else
                row.final_ortho_error = ortho_error(store.finalized());
            rows.push_back(row);
            if (fin.breakdown) return rows;
        }
    }
    return rows;
}

inline void write_mpk_trace_csv(std::ostream& out, index_t n, const MpkTraceParams& p,
                                const std::vector<MpkTraceRow>& rows) {
    out << "n,m,s,shat,seed,step,kappa_pre_prefix,boundary,final_ortho_error,breakdown\n";
    for (const auto& r : rows) {
        out << n << ',' << p.m << ',' << p.s << ',' << p.shat << ',' << p.seed << ','
            << r.step << ',' << fmt_sci(r.kappa_pre_prefix) << ',' << (r.boundary ? 1 : 0)
            << ',' << fmt_opt(r.final_ortho_error) << ',' << (r.breakdown ? 1 : 0) << '\n';
    }
}

// ---------------------------------------------------------------------------
// solve: one linear solve with full telemetry.
// ---------------------------------------------------------------------------

inline nlohmann::json solve_report_json(const SolveReport& rep, const SolverConfig& cfg,
                                        const std::string& scheme_label, index_t n) {
    nlohmann::json j;
    j["scheme"] = scheme_label;
    j["n"] = n;
    j["m"] = cfg.restart_len;
    j["s"] = cfg.step;
    j["shat"] = cfg.effective_big_step();
    j["rel_tol"] = cfg.rel_tol;
    j["status"] = solve_status_name(rep.status);
    j["iterations"] = rep.iterations;
    j["restarts"] = rep.restarts;
    j["initial_residual"] = rep.initial_residual;
    j["final_relative_residual"] = rep.final_relative_residual;
    j["breakdown"] = rep.breakdown;
    j["breakdown_kappa"] = rep.breakdown_kappa;
    j["total_reduces"] = rep.sync.reduces;
    j["reduces_per_iteration"] = rep.reduces_per_iteration;
    j["wall_seconds"] = rep.wall_seconds;
    j["cycle_residuals"] = rep.cycle_residuals;
    return j;
}

inline void write_residual_history_csv(std::ostream& out, const std::string& scheme_label,
                                       const SolverConfig& cfg, const SolveReport& rep) {
    out << "scheme,m,s,shat,rel_tol,cycle,relative_residual\n";
    for (index_t c = 0; c < rep.cycle_residuals.size(); ++c) {
        out << scheme_label << ',' << cfg.restart_len << ',' << cfg.step << ','
            << cfg.effective_big_step() << ',' << fmt_sci(cfg.rel_tol) << ',' << (c + 1)
            << ',' << fmt_sci(rep.cycle_residuals[c]) << '\n';
    }
}

// ---------------------------------------------------------------------------
// gen: materialize generator outputs.
// ---------------------------------------------------------------------------

inline void write_dense_binary(const std::string& path, const DenseMatrix& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    f.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

inline DenseMatrix read_dense_binary(const std::string& path, index_t rows, index_t cols) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<double> data(rows * cols);
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!f) throw std::runtime_error("short read from " + path);
    return DenseMatrix(rows, cols, std::move(data));
}

}  // namespace krylov
