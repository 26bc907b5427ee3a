#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <tuple>
#include <vector>

#include "krylov/dense_kernels.hpp"
#include "krylov/types.hpp"

namespace krylov {

/// Square sparse operator in compressed-sparse-row form. Immutable after
/// construction; column indices are strictly increasing within each row
/// and duplicates have been merged.
struct CsrMatrix {
    index_t n = 0;
    std::vector<index_t> row_ptr;  // length n+1, non-decreasing
    std::vector<index_t> col_idx;
    std::vector<double> vals;

    index_t nnz() const { return vals.size(); }

    void validate() const {
        if (row_ptr.size() != n + 1) throw DimensionMismatch("row_ptr length");
        if (row_ptr.front() != 0 || row_ptr.back() != vals.size())
            throw DimensionMismatch("row_ptr bounds");
        if (col_idx.size() != vals.size()) throw DimensionMismatch("col_idx length");
        for (index_t i = 0; i < n; ++i) {
            if (row_ptr[i] > row_ptr[i + 1]) throw DimensionMismatch("row_ptr not monotone");
            for (index_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
                if (col_idx[k] >= n) throw DimensionMismatch("column index out of range");
                if (k > row_ptr[i] && col_idx[k] <= col_idx[k - 1])
                    throw DimensionMismatch("column indices not strictly increasing");
            }
        }
    }

    /// Build from coordinate triplets; entries are sorted and duplicate
    /// coordinates summed (Matrix Market convention).
    static CsrMatrix from_triplets(index_t n,
                                   std::vector<std::tuple<index_t, index_t, double>> trip) {
        std::sort(trip.begin(), trip.end(), [](const auto& a, const auto& b) {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
            return std::get<1>(a) < std::get<1>(b);
        });
        CsrMatrix m;
        m.n = n;
        m.row_ptr.assign(n + 1, 0);
        for (index_t k = 0; k < trip.size(); ++k) {
            if (k > 0 && std::get<0>(trip[k]) == std::get<0>(trip[k - 1]) &&
                std::get<1>(trip[k]) == std::get<1>(trip[k - 1])) {
                m.vals.back() += std::get<2>(trip[k]);
            } else {
                m.col_idx.push_back(std::get<1>(trip[k]));
                m.vals.push_back(std::get<2>(trip[k]));
                ++m.row_ptr[std::get<0>(trip[k]) + 1];
            }
        }
        for (index_t i = 0; i < n; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
        m.validate();
        return m;
    }
};

/// y = A·x, each row summed in stored order (deterministic; row-parallel
/// since per-row sums are independent).
inline std::vector<double> spmv(const CsrMatrix& a, std::span<const double> x) {
    if (x.size() != a.n) throw DimensionMismatch("spmv vector length");
    std::vector<double> y(a.n, 0.0);
    detail::parallel_indices(a.n, 4096, [&](index_t i) {
        double s = 0.0;
        for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
            s += a.vals[k] * x[a.col_idx[k]];
        y[i] = s;
    });
    return y;
}

/// Scale columns by their maximum absolute entry, then rows by the
/// resulting row maxima; afterwards every row has max |entry| = 1. The
/// result is generally non-symmetric. Column-then-row order is part of
/// the contract; the reverse is a different operator.
inline CsrMatrix equilibrate(const CsrMatrix& a) {
    std::vector<double> col_max(a.n, 0.0);
    for (index_t k = 0; k < a.nnz(); ++k)
        col_max[a.col_idx[k]] = std::max(col_max[a.col_idx[k]], std::abs(a.vals[k]));
    for (index_t j = 0; j < a.n; ++j)
        if (col_max[j] == 0.0) throw ZeroRowOrColumn(false, j);

    CsrMatrix out = a;
    for (index_t k = 0; k < out.nnz(); ++k) out.vals[k] /= col_max[out.col_idx[k]];

    for (index_t i = 0; i < out.n; ++i) {
        double row_max = 0.0;
        for (index_t k = out.row_ptr[i]; k < out.row_ptr[i + 1]; ++k)
            row_max = std::max(row_max, std::abs(out.vals[k]));
        if (row_max == 0.0) throw ZeroRowOrColumn(true, i);
        for (index_t k = out.row_ptr[i]; k < out.row_ptr[i + 1]; ++k) out.vals[k] /= row_max;
    }
    return out;
}

}  // namespace krylov
