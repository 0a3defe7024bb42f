#ifndef LRMEQ_MATRIX_MARKET_HPP
#define LRMEQ_MATRIX_MARKET_HPP
//
// Project     : lrmeq
// Module      : matrix_market
// Description : Matrix Market I/O (coordinate real general, array real)
//

#include <Eigen/Sparse>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrmeq/low_rank_matrix.hpp"

namespace lrmeq {

using SparseMatrix = Eigen::SparseMatrix<double>;  // compressed sparse column

namespace mm_detail {

inline std::runtime_error parse_error(const std::string& path, Index line,
                                      const std::string& what) {
    return std::runtime_error("matrix market: " + path + ":" +
                              std::to_string(line) + ": " + what);
}

struct Header {
    bool coordinate = true;
    bool symmetric = false;
};

inline Header read_header(std::istream& in, const std::string& path, Index& line) {
    std::string banner;
    if (!std::getline(in, banner)) throw parse_error(path, 1, "empty file");
    ++line;
    std::istringstream hs(banner);
    std::string tag, object, format, field, symmetry;
    hs >> tag >> object >> format >> field >> symmetry;
    if (tag != "%%MatrixMarket" || object != "matrix")
        throw parse_error(path, line, "missing %%MatrixMarket matrix banner");
    Header h;
    if (format == "coordinate")
        h.coordinate = true;
    else if (format == "array")
        h.coordinate = false;
    else
        throw parse_error(path, line, "unsupported format '" + format + "'");
    if (field != "real" && field != "integer")
        throw parse_error(path, line, "unsupported field '" + field + "'");
    if (symmetry == "general")
        h.symmetric = false;
    else if (symmetry == "symmetric")
        h.symmetric = true;
    else
        throw parse_error(path, line, "unsupported symmetry '" + symmetry + "'");
    return h;
}

inline bool next_content_line(std::istream& in, std::string& out, Index& line) {
    while (std::getline(in, out)) {
        ++line;
        std::size_t pos = out.find_first_not_of(" \t\r");
        if (pos == std::string::npos) continue;
        if (out[pos] == '%') continue;
        return true;
    }
    return false;
}

inline void check_finite(double v, const std::string& path, Index line) {
    if (!std::isfinite(v)) throw parse_error(path, line, "non-finite entry");
}

// strtod-based so nan/inf tokens are recognized (and then rejected as
// non-finite) instead of failing extraction
inline double parse_value(const std::string& token, const std::string& path, Index line) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0')
        throw parse_error(path, line, "bad value '" + token + "'");
    check_finite(v, path, line);
    return v;
}

}  // namespace mm_detail

inline SparseMatrix read_matrix_market_sparse(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("matrix market: cannot open " + path);
    Index line = 0;
    const auto header = mm_detail::read_header(in, path, line);
    if (!header.coordinate)
        throw mm_detail::parse_error(path, line, "expected coordinate format");

    std::string buf;
    if (!mm_detail::next_content_line(in, buf, line))
        throw mm_detail::parse_error(path, line, "missing size line");
    Index rows = 0, cols = 0;
    long long nnz = 0;
    {
        std::istringstream ss(buf);
        if (!(ss >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0)
            throw mm_detail::parse_error(path, line, "bad size line");
    }

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(header.symmetric ? 2 * nnz : nnz));
    for (long long k = 0; k < nnz; ++k) {
        if (!mm_detail::next_content_line(in, buf, line))
            throw mm_detail::parse_error(path, line, "truncated entry list");
        std::istringstream ss(buf);
        Index i = 0, j = 0;
        std::string vtok;
        if (!(ss >> i >> j >> vtok))
            throw mm_detail::parse_error(path, line, "bad entry");
        if (i < 1 || i > rows || j < 1 || j > cols)
            throw mm_detail::parse_error(path, line, "index out of range");
        const double v = mm_detail::parse_value(vtok, path, line);
        triplets.emplace_back(i - 1, j - 1, v);
        if (header.symmetric && i != j) triplets.emplace_back(j - 1, i - 1, v);
    }

    SparseMatrix a(rows, cols);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    return a;
}

inline Vector read_matrix_market_vector(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("matrix market: cannot open " + path);
    Index line = 0;
    const auto header = mm_detail::read_header(in, path, line);
    if (header.coordinate)
        throw mm_detail::parse_error(path, line, "expected array format vector");

    std::string buf;
    if (!mm_detail::next_content_line(in, buf, line))
        throw mm_detail::parse_error(path, line, "missing size line");
    Index rows = 0, cols = 0;
    {
        std::istringstream ss(buf);
        if (!(ss >> rows >> cols) || rows < 0 || cols != 1)
            throw mm_detail::parse_error(path, line, "expected an n x 1 array");
    }

    Vector v(rows);
    for (Index i = 0; i < rows; ++i) {
        if (!mm_detail::next_content_line(in, buf, line))
            throw mm_detail::parse_error(path, line, "truncated array");
        std::istringstream ss(buf);
        std::string tok;
        if (!(ss >> tok)) throw mm_detail::parse_error(path, line, "bad value");
        v(i) = mm_detail::parse_value(tok, path, line);
    }
    return v;
}

namespace mm_detail {

inline void open_out(std::ofstream& out, const std::string& path) {
    out.open(path);
    if (!out) throw std::runtime_error("matrix market: cannot write " + path);
    out.precision(std::numeric_limits<double>::max_digits10);
}

}  // namespace mm_detail

inline void write_matrix_market_sparse(const std::string& path, const SparseMatrix& a) {
    std::ofstream out;
    mm_detail::open_out(out, path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << a.rows() << " " << a.cols() << " " << a.nonZeros() << "\n";
    for (int j = 0; j < a.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(a, j); it; ++it)
            out << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
}

inline void write_matrix_market_vector(const std::string& path, const Vector& v) {
    std::ofstream out;
    mm_detail::open_out(out, path);
    out << "%%MatrixMarket matrix array real general\n";
    out << v.size() << " 1\n";
    for (Index i = 0; i < v.size(); ++i) out << v(i) << "\n";
}

}  // namespace lrmeq

#endif  // LRMEQ_MATRIX_MARKET_HPP
