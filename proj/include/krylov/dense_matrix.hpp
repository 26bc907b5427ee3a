#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>
#include <vector>

#include "krylov/types.hpp"

namespace krylov {

/// Non-owning view of a column-major matrix with contiguous columns
/// (leading dimension == rows). Panels over a basis store are column
/// ranges of such a view, never copies.
class ConstMatrixView {
public:
    ConstMatrixView() : data_(nullptr), rows_(0), cols_(0) {}
    ConstMatrixView(const double* data, index_t rows, index_t cols)
        : data_(data), rows_(rows), cols_(cols) {}

    index_t rows() const { return rows_; }
    index_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    const double* data() const { return data_; }
    const double* col(index_t j) const { return data_ + j * rows_; }
    double operator()(index_t i, index_t j) const { return data_[i + j * rows_]; }

    ConstMatrixView col_range(index_t first, index_t count) const {
        return ConstMatrixView(data_ + first * rows_, rows_, count);
    }

private:
    const double* data_;
    index_t rows_;
    index_t cols_;
};

/// Column-major dense real matrix (binary64). Values must be finite on
/// construction from data.
class DenseMatrix {
public:
    DenseMatrix() : rows_(0), cols_(0) {}

    DenseMatrix(index_t rows, index_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    DenseMatrix(index_t rows, index_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw DimensionMismatch("data length must equal rows*cols");
        for (double v : data_)
            if (!std::isfinite(v))
                throw std::invalid_argument("DenseMatrix: non-finite value");
    }

    index_t rows() const { return rows_; }
    index_t cols() const { return cols_; }
    index_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* col(index_t j) { return data_.data() + j * rows_; }
    const double* col(index_t j) const { return data_.data() + j * rows_; }

    double& operator()(index_t i, index_t j) { return data_[i + j * rows_]; }
    double operator()(index_t i, index_t j) const { return data_[i + j * rows_]; }

    operator ConstMatrixView() const { return ConstMatrixView(data_.data(), rows_, cols_); }
    ConstMatrixView view() const { return ConstMatrixView(data_.data(), rows_, cols_); }
    ConstMatrixView col_range(index_t first, index_t count) const {
        return view().col_range(first, count);
    }

    void set_col(index_t j, const double* src) {
        std::memcpy(col(j), src, rows_ * sizeof(double));
    }

    static DenseMatrix identity(index_t n) {
        DenseMatrix m(n, n);
        for (index_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return std::sqrt(s);
    }

private:
    index_t rows_;
    index_t cols_;
    std::vector<double> data_;
};

/// Square upper-triangular factor; entries below the diagonal are
/// identically zero. QR/Cholesky products keep non-negative diagonals.
class UpperTriangular {
public:
    UpperTriangular() : dim_(0) {}
    explicit UpperTriangular(index_t dim) : dim_(dim), data_(dim * dim, 0.0) {}

    index_t dim() const { return dim_; }

    double& at(index_t i, index_t j) { return data_[i + j * dim_]; }
    double operator()(index_t i, index_t j) const { return data_[i + j * dim_]; }

    const double* data() const { return data_.data(); }
    ConstMatrixView view() const { return ConstMatrixView(data_.data(), dim_, dim_); }

    /// Leading principal block as a fresh factor.
    UpperTriangular leading(index_t k) const {
        UpperTriangular out(k);
        for (index_t j = 0; j < k; ++j)
            for (index_t i = 0; i <= j; ++i) out.at(i, j) = (*this)(i, j);
        return out;
    }

    static UpperTriangular identity(index_t n) {
        UpperTriangular r(n);
        for (index_t i = 0; i < n; ++i) r.at(i, i) = 1.0;
        return r;
    }

private:
    index_t dim_;
    std::vector<double> data_;
};

inline double dot(const double* a, const double* b, index_t n) {
    double s = 0.0;
    for (index_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const double* a, index_t n) { return std::sqrt(dot(a, a, n)); }

inline double norm2(const std::vector<double>& a) { return norm2(a.data(), a.size()); }

inline void axpy(double alpha, const double* x, double* y, index_t n) {
    for (index_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace krylov
