#pragma once

#include <algorithm>
#include <cstring>
#include <vector>

#include "krylov/block_ortho.hpp"
#include "krylov/dense_matrix.hpp"
#include "krylov/spectral.hpp"
#include "krylov/types.hpp"

namespace krylov {

enum class PanelState { Raw, Preprocessed, Final };

struct AppendOutcome {
    index_t committed = 0;      // block columns committed (including a rewritten seam)
    bool truncated = false;     // first-pass breakdown recovered by truncation
    bool breakdown = false;     // hard failure, nothing committed by this call
    index_t pivot = 0;          // 1-based failing pivot within the block, when any
    double kappa_estimate = 0;  // diagnostic κ of the offending input, when measurable
};

/// One committed block: which columns it owns and, for seam-carrying
/// blocks, the re-expansion of the carried input column in the current
/// basis (prefix coefficients plus its own diagonal). Hessenberg assembly
/// replays these records.
struct BlockRecord {
    index_t c0 = 0;      // first owned column
    index_t width = 0;   // owned columns (carried seam included)
    bool overlap = false;
    std::vector<double> carried;  // length c0: prefix coefficients of the carried column
    double carried_diag = 1.0;    // its own-block coefficient
};

/// Accumulated Krylov basis: Q is filled left to right, R holds the
/// (m+1)×(m+1) upper-triangular coefficients of the raw MPK sequence
/// against Q. Seam columns are composed, not replaced: the stored column
/// keeps expanding the raw product while the basis column underneath is
/// re-orthonormalized. Panels are column ranges over this storage, never
/// copies. Single-writer: schemes mutate it sequentially.
class BasisStore {
public:
    BasisStore(index_t n, index_t m, index_t panel_size, index_t big_panel_size)
        : n_(n),
          max_cols_(m + 1),
          panel_size_(panel_size),
          big_panel_size_(big_panel_size == 0 ? m : big_panel_size),
          q_(n, m + 1),
          r_(m + 1) {
        if (panel_size_ == 0 || m % panel_size_ != 0)
            throw DimensionMismatch("panel size must divide the restart length");
        if (big_panel_size_ % panel_size_ != 0 || big_panel_size_ > m)
            throw DimensionMismatch("big panel size must be a multiple of the panel size, <= m");
    }

    index_t rows() const { return n_; }
    index_t capacity() const { return max_cols_; }
    index_t filled() const { return filled_; }
    index_t finalized_count() const { return finalized_; }
    index_t big_panel_start() const { return big_panel_start_; }
    index_t panel_size() const { return panel_size_; }
    index_t big_panel_size() const { return big_panel_size_; }

    ConstMatrixView all() const { return q_.col_range(0, filled_); }
    ConstMatrixView finalized() const { return q_.col_range(0, finalized_); }
    ConstMatrixView big_panel() const {
        return q_.col_range(big_panel_start_, filled_ - big_panel_start_);
    }
    const double* column(index_t j) const { return q_.col(j); }
    const UpperTriangular& coefficients() const { return r_; }
    const std::vector<PanelState>& panel_states() const { return panel_states_; }
    const std::vector<BlockRecord>& block_records() const { return records_; }

    bool big_panel_open() const { return filled_ > big_panel_start_; }
    bool big_panel_full() const {
        return big_panel_open() && filled_ - big_panel_start_ >= big_panel_size_ + 1;
    }

    /// True when a breakdown left coefficients for one extra raw vector
    /// (zero-diagonal coefficient column) past the committed basis.
    bool has_seam_column() const { return seam_valid_; }

    void reset() {
        filled_ = 0;
        finalized_ = 0;
        big_panel_start_ = 0;
        seam_valid_ = false;
        panel_states_.clear();
        records_.clear();
        std::memset(q_.data(), 0, q_.size() * sizeof(double));
        r_ = UpperTriangular(max_cols_);
    }

    /// Installs an already-normalized first basis vector (v₁ = r/γ) with a
    /// unit coefficient; used by the per-column standard GMRES mode.
    void seed_unit_column(const double* v) {
        if (filled_ != 0) throw DimensionMismatch("seed requires an empty store");
        q_.set_col(0, v);
        r_.at(0, 0) = 1.0;
        filled_ = 1;
        finalized_ = 1;
        big_panel_start_ = 1;
    }

    /// Orthogonalize one block of basis vectors against everything before
    /// it and commit the result. `overlap` marks the block's first column
    /// as a copy of the current last stored column (the MPK carry), which
    /// the commit re-orthonormalizes in place while composing its stored
    /// coefficient column. Breakdown in the first pass is recovered by
    /// truncating the block; second-pass breakdown is a scheme failure.
    AppendOutcome append_block(ConstMatrixView v, bool overlap, const OrthoScheme& scheme,
                               SyncCounter& sync) {
        const long long before = sync.reduces;
        AppendOutcome out = append_impl(v, overlap, scheme, sync);
        sync.per_block.push_back(sync.reduces - before);
        return out;
    }

    /// First stage of the two-stage scheme: one BCGS-PIP of the block
    /// against finalized prefix plus already-preprocessed blocks.
    AppendOutcome preprocess_block(ConstMatrixView v, bool overlap, SyncCounter& sync) {
        OrthoScheme s{OrthoKind::TwoStage, big_panel_size_};
        return append_block(v, overlap, s, sync);
    }

    /// Second stage: one BCGS-PIP of the whole preprocessed big panel
    /// against the finalized prefix, with the stored coefficients
    /// recombined as T·R + R. A partial trailing panel is finalized at its
    /// actual width.
    AppendOutcome finalize_big_panel(SyncCounter& sync) {
        const long long before = sync.reduces;
        AppendOutcome out;
        if (!big_panel_open()) return out;

        const index_t c0 = big_panel_start_;
        const index_t w = filled_ - c0;
        ConstMatrixView prefix = q_.col_range(0, c0);
        ConstMatrixView panel = q_.col_range(c0, w);

        BlockOrthoResult res;
        try {
            res = bcgs_pip(prefix, panel, sync);
        } catch (const NotPositiveDefinite& e) {
            out.breakdown = true;
            out.pivot = e.pivot;
            out.kappa_estimate = diagnostic_kappa(prefix, panel);
            sync.per_big_panel.push_back(sync.reduces - before);
            return out;
        }

        // Re-express every coefficient vector over the rewritten panel:
        // prefix part += T_prefix·(panel part), panel part := T_panel·(panel part).
        for (index_t col = c0; col < filled_; ++col) combine_column(col, c0, w, res);
        for (BlockRecord& rec : records_)
            if (rec.c0 >= c0) combine_record(rec, c0, w, res);

        for (index_t j = 0; j < w; ++j) q_.set_col(c0 + j, res.q.col(j));
        finalized_ = filled_;
        big_panel_start_ = filled_;
        for (auto& st : panel_states_)
            if (st == PanelState::Preprocessed) st = PanelState::Final;
        out.committed = w;
        sync.per_big_panel.push_back(sync.reduces - before);
        return out;
    }

private:
    AppendOutcome append_impl(ConstMatrixView v, bool overlap, const OrthoScheme& scheme,
                              SyncCounter& sync) {
        AppendOutcome out;
        if (v.rows() != n_) throw DimensionMismatch("block row count");
        index_t width = v.cols();
        const index_t c0 = overlap ? filled_ - 1 : filled_;
        if (c0 + width > max_cols_) throw DimensionMismatch("basis store capacity exceeded");
        ConstMatrixView prefix = q_.col_range(0, c0);

        while (width >= 1) {
            ConstMatrixView v_try = v.col_range(0, width);
            index_t bad = 0;
            try {
                BlockOrthoResult res = run_scheme(prefix, v_try, scheme, sync);
                commit(c0, overlap, res,
                       scheme.kind == OrthoKind::TwoStage ? PanelState::Preprocessed
                                                          : PanelState::Final);
                out.committed = width;
                if (out.truncated) record_seam(v.col(width), sync);
                return out;
            } catch (const NotPositiveDefinite& e) {
                bad = e.pivot;
            } catch (const SecondPassBreakdown& e) {
                out.breakdown = true;
                out.truncated = false;
                out.pivot = e.pivot;
                out.kappa_estimate = diagnostic_kappa(prefix, v_try);
                return out;
            }
            // First-pass pivot failure: drop the dependent column and the
            // rest of the block, then retry. pivot == 1 is unrecoverable.
            out.truncated = true;
            out.pivot = bad;
            if (bad <= 1) break;
            width = std::min(width, bad - 1);
        }
        out.breakdown = true;
        out.truncated = false;
        out.kappa_estimate = diagnostic_kappa(prefix, v);
        return out;
    }

    struct SecondPassBreakdown {
        index_t pivot;
    };

    BlockOrthoResult run_scheme(ConstMatrixView prefix, ConstMatrixView v,
                                const OrthoScheme& scheme, SyncCounter& sync) {
        switch (scheme.kind) {
            case OrthoKind::TwoStage:
                return bcgs_pip(prefix, v, sync);  // single first-stage pass
            case OrthoKind::BcgsPip2: {
                BlockOrthoResult first = bcgs_pip(prefix, v, sync);
                BlockOrthoResult second;
                try {
                    second = bcgs_pip(prefix, first.q, sync);
                } catch (const NotPositiveDefinite& e) {
                    throw SecondPassBreakdown{e.pivot};
                }
                BlockOrthoResult out;
                out.q = std::move(second.q);
                out.r_col = std::move(first.r_col);
                if (out.r_col.rows() > 0) {
                    DenseMatrix corr = mat_mul(second.r_col, first.r_jj.view());
                    for (index_t j = 0; j < out.r_col.cols(); ++j)
                        for (index_t i = 0; i < out.r_col.rows(); ++i)
                            out.r_col(i, j) += corr(i, j);
                }
                out.r_jj = tri_mul(second.r_jj, first.r_jj);
                return out;
            }
            case OrthoKind::Bcgs2Hhqr:
            case OrthoKind::Bcgs2Cholqr2: {
                const IntraKind intra = (scheme.kind == OrthoKind::Bcgs2Hhqr)
                                            ? IntraKind::Hhqr
                                            : IntraKind::Cholqr2;
                const bool single = (v.cols() == 1);
                auto intra_qr = [&](ConstMatrixView x) -> BlockQr {
                    if (single) return cholqr(x, sync);
                    if (intra == IntraKind::Hhqr) {
                        sync.add(static_cast<long long>(x.cols()));
                        QrResult qr = householder_qr(x);
                        return {std::move(qr.q), std::move(qr.r)};
                    }
                    return cholqr2(x, sync);
                };

                BlockOrthoResult out;
                if (prefix.empty()) {
                    BlockQr qr = intra_qr(v);  // first block: intra pass only
                    out.q = std::move(qr.q);
                    out.r_jj = std::move(qr.r);
                    out.r_col = DenseMatrix(0, v.cols());
                    return out;
                }
                ProjectResult first = bcgs_project(prefix, v, sync);
                BlockQr inner = intra_qr(first.vhat);
                try {
                    ProjectResult second = bcgs_project(prefix, inner.q, sync);
                    BlockQr outer = cholqr(second.vhat, sync);
                    out.q = std::move(outer.q);
                    DenseMatrix corr = mat_mul(second.r_block, inner.r.view());
                    out.r_col = std::move(first.r_block);
                    for (index_t j = 0; j < out.r_col.cols(); ++j)
                        for (index_t i = 0; i < out.r_col.rows(); ++i)
                            out.r_col(i, j) += corr(i, j);
                    out.r_jj = tri_mul(outer.r, inner.r);
                    return out;
                } catch (const NotPositiveDefinite& e) {
                    throw SecondPassBreakdown{e.pivot};
                }
            }
        }
        throw std::logic_error("unreachable scheme kind");
    }

    void commit(index_t c0, bool overlap, const BlockOrthoResult& res, PanelState state) {
        const index_t w = res.q.cols();

        BlockRecord rec;
        rec.c0 = c0;
        rec.width = w;
        rec.overlap = overlap;
        if (overlap) {
            // The seam column keeps expanding the previous block's raw
            // product: raw = Q_prefix·p_old + ρ·carried, and the carried
            // column re-expands as Q_prefix·r_col(:,0) + α·q_new.
            const double rho = r_(c0, c0);
            rec.carried.assign(res.r_col.rows() > 0 ? res.r_col.col(0) : nullptr,
                               res.r_col.rows() > 0 ? res.r_col.col(0) + c0 : nullptr);
            rec.carried_diag = res.r_jj(0, 0);
            for (index_t i = 0; i < c0; ++i)
                r_.at(i, c0) += rho * res.r_col(i, 0);
            r_.at(c0, c0) = rho * res.r_jj(0, 0);
            for (index_t j = 1; j < w; ++j) {
                for (index_t i = 0; i < c0; ++i) r_.at(i, c0 + j) = res.r_col(i, j);
                for (index_t i = 0; i <= j; ++i) r_.at(c0 + i, c0 + j) = res.r_jj(i, j);
            }
        } else {
            for (index_t j = 0; j < w; ++j) {
                for (index_t i = 0; i < c0; ++i)
                    r_.at(i, c0 + j) = (res.r_col.rows() > 0) ? res.r_col(i, j) : 0.0;
                for (index_t i = 0; i <= j; ++i) r_.at(c0 + i, c0 + j) = res.r_jj(i, j);
            }
        }

        for (index_t j = 0; j < w; ++j) q_.set_col(c0 + j, res.q.col(j));
        filled_ = c0 + w;
        seam_valid_ = false;
        if (state == PanelState::Final) {
            finalized_ = filled_;
            big_panel_start_ = filled_;
        } else {
            big_panel_start_ = std::min(big_panel_start_, c0);
            finalized_ = std::min(finalized_, c0);
        }
        panel_states_.push_back(state);
        records_.push_back(std::move(rec));
    }

    // Finalize re-expression of one stored coefficient column over the
    // rewritten big panel [c0, c0+w).
    void combine_column(index_t col, index_t c0, index_t w, const BlockOrthoResult& res) {
        std::vector<double> panel_part(w, 0.0);
        const index_t top = std::min(col, c0 + w - 1);
        for (index_t i = c0; i <= top; ++i) panel_part[i - c0] = r_(i, col);
        for (index_t i = 0; i < c0; ++i) {
            double s = 0.0;
            for (index_t l = 0; l < w; ++l) s += res.r_col(i, l) * panel_part[l];
            r_.at(i, col) += s;
        }
        for (index_t i = 0; i < w && c0 + i <= col; ++i) {
            double s = 0.0;
            for (index_t l = i; l < w; ++l) s += res.r_jj(i, l) * panel_part[l];
            r_.at(c0 + i, col) = s;
        }
    }

    void combine_record(BlockRecord& rec, index_t c0, index_t w, const BlockOrthoResult& res) {
        // The record's coefficient vector spans rows 0..rec.c0 (prefix part
        // plus its own diagonal); re-express the rows that fall in the panel.
        std::vector<double> full(rec.c0 + 1, 0.0);
        for (index_t i = 0; i < rec.c0; ++i) full[i] = rec.carried[i];
        full[rec.c0] = rec.carried_diag;

        std::vector<double> panel_part(w, 0.0);
        const index_t top = std::min(rec.c0, c0 + w - 1);
        for (index_t i = c0; i <= top; ++i) panel_part[i - c0] = full[i];
        for (index_t i = 0; i < c0; ++i) {
            double s = 0.0;
            for (index_t l = 0; l < w; ++l) s += res.r_col(i, l) * panel_part[l];
            full[i] += s;
        }
        for (index_t i = 0; i < w && c0 + i <= rec.c0; ++i) {
            double s = 0.0;
            for (index_t l = i; l < w; ++l) s += res.r_jj(i, l) * panel_part[l];
            full[c0 + i] = s;
        }
        for (index_t i = 0; i < rec.c0; ++i) rec.carried[i] = full[i];
        rec.carried_diag = full[rec.c0];
    }

    // Coefficients of the first dropped raw vector against the committed
    // basis, stored with a zero diagonal one column past `filled`. This is
    // what lucky-breakdown Hessenberg assembly needs.
    void record_seam(const double* dropped, SyncCounter& sync) {
        if (filled_ >= max_cols_) return;
        sync.add(1);
        for (index_t i = 0; i < filled_; ++i)
            r_.at(i, filled_) = dot(q_.col(i), dropped, n_);
        r_.at(filled_, filled_) = 0.0;
        seam_valid_ = true;
    }

    double diagnostic_kappa(ConstMatrixView prefix, ConstMatrixView v) const {
        if (prefix.cols() + v.cols() > 512) return 0.0;
        const SpectralSummary s = accumulated_cond(prefix, v);
        return s.cond;
    }

    index_t n_;
    index_t max_cols_;
    index_t panel_size_;
    index_t big_panel_size_;
    index_t filled_ = 0;
    index_t finalized_ = 0;
    index_t big_panel_start_ = 0;
    bool seam_valid_ = false;
    DenseMatrix q_;
    UpperTriangular r_;
    std::vector<PanelState> panel_states_;
    std::vector<BlockRecord> records_;
};

/// Spec-level aliases for the two-stage store operations.
inline AppendOutcome two_stage_preprocess(BasisStore& store, ConstMatrixView v_block,
                                          bool overlap, SyncCounter& sync) {
    return store.preprocess_block(v_block, overlap, sync);
}

inline AppendOutcome two_stage_finalize(BasisStore& store, SyncCounter& sync) {
    return store.finalize_big_panel(sync);
}

}  // namespace krylov
