#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace krylov {

using index_t = std::size_t;

class DimensionMismatch : public std::invalid_argument {
public:
    explicit DimensionMismatch(const std::string& what)
        : std::invalid_argument("dimension mismatch: " + what) {}
};

/// Cholesky pivot failure. Signals that the input's condition number is
/// beyond the factorization's range; callers decide whether this is an
/// expected data point or a hard error. `pivot` is 1-based.
class NotPositiveDefinite : public std::runtime_error {
public:
    explicit NotPositiveDefinite(index_t pivot_index)
        : std::runtime_error("matrix not positive definite at pivot " +
                             std::to_string(pivot_index)),
          pivot(pivot_index) {}
    index_t pivot;
};

class SingularFactor : public std::runtime_error {
public:
    SingularFactor() : std::runtime_error("triangular factor has a zero diagonal entry") {}
};

class SingularR : public std::runtime_error {
public:
    explicit SingularR(index_t column)
        : std::runtime_error("basis coefficient matrix singular at column " +
                             std::to_string(column)),
          column(column) {}
    index_t column;
};

class UnsupportedFormat : public std::runtime_error {
public:
    explicit UnsupportedFormat(const std::string& what)
        : std::runtime_error("unsupported format: " + what) {}
};

class MalformedEntry : public std::runtime_error {
public:
    MalformedEntry(index_t line, const std::string& what)
        : std::runtime_error("malformed entry at line " + std::to_string(line) + ": " + what),
          line(line) {}
    index_t line;
};

class IndexOutOfRange : public std::runtime_error {
public:
    IndexOutOfRange(index_t line, const std::string& what)
        : std::runtime_error("index out of range at line " + std::to_string(line) + ": " + what),
          line(line) {}
    index_t line;
};

class ZeroRowOrColumn : public std::runtime_error {
public:
    ZeroRowOrColumn(bool is_row, index_t idx)
        : std::runtime_error(std::string(is_row ? "row " : "column ") + std::to_string(idx) +
                             " has no nonzero entries"),
          row(is_row), index(idx) {}
    bool row;
    index_t index;
};

}  // namespace krylov
