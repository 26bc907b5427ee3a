#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "krylov/csr_matrix.hpp"
#include "krylov/types.hpp"

namespace krylov {

/// Reads a Matrix Market coordinate file (real, general or symmetric,
/// 1-based indices, % comments). Symmetric storage is expanded to full;
/// duplicate coordinates are summed. Only square operators are accepted.
inline CsrMatrix read_matrix_market(std::istream& in) {
    std::string line;
    index_t lineno = 0;

    if (!std::getline(in, line)) throw UnsupportedFormat("empty stream");
    ++lineno;
    {
        std::istringstream hs(line);
        std::string banner, object, format, field, symmetry;
        hs >> banner >> object >> format >> field >> symmetry;
        if (banner != "%%MatrixMarket" || object != "matrix")
            throw UnsupportedFormat("missing %%MatrixMarket matrix header");
        if (format != "coordinate") throw UnsupportedFormat("format '" + format + "'");
        if (field != "real") throw UnsupportedFormat("field '" + field + "'");
        if (symmetry != "general" && symmetry != "symmetric")
            throw UnsupportedFormat("symmetry '" + symmetry + "'");

        bool symmetric = (symmetry == "symmetric");

        // size line (after comments)
        index_t rows = 0, cols = 0, nnz = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '%') continue;
            std::istringstream ss(line);
            long long r, c, z;
            if (!(ss >> r >> c >> z) || r < 0 || c < 0 || z < 0)
                throw MalformedEntry(lineno, "size line");
            rows = static_cast<index_t>(r);
            cols = static_cast<index_t>(c);
            nnz = static_cast<index_t>(z);
            break;
        }
        if (rows == 0 || cols == 0) throw MalformedEntry(lineno, "missing size line");
        if (rows != cols) throw UnsupportedFormat("rectangular matrix (square operator required)");

        std::vector<std::tuple<index_t, index_t, double>> trip;
        trip.reserve(symmetric ? 2 * nnz : nnz);
        index_t seen = 0;
        while (seen < nnz && std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '%') continue;
            std::istringstream ss(line);
            long long r, c;
            double v;
            if (!(ss >> r >> c >> v)) throw MalformedEntry(lineno, line);
            if (r < 1 || c < 1 || static_cast<index_t>(r) > rows ||
                static_cast<index_t>(c) > cols)
                throw IndexOutOfRange(lineno, line);
            const index_t i = static_cast<index_t>(r) - 1;
            const index_t j = static_cast<index_t>(c) - 1;
            trip.emplace_back(i, j, v);
            if (symmetric && i != j) trip.emplace_back(j, i, v);
            ++seen;
        }
        if (seen < nnz) throw MalformedEntry(lineno, "fewer entries than announced");
        return CsrMatrix::from_triplets(rows, std::move(trip));
    }
}

namespace detail {

// Shortest decimal that round-trips to the same binary64 value.
inline std::string shortest_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

/// Writes coordinate/real/general full storage, 1-based, with
/// shortest-exact decimal values.
inline void write_matrix_market(std::ostream& out, const CsrMatrix& a) {
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << a.n << ' ' << a.n << ' ' << a.nnz() << '\n';
    for (index_t i = 0; i < a.n; ++i)
        for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
            out << (i + 1) << ' ' << (a.col_idx[k] + 1) << ' '
                << detail::shortest_double(a.vals[k]) << '\n';
}

}  // namespace krylov
