#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "supr/image.hpp"

namespace supr {

/// One sparse row as spans into the matrix storage.
struct SparseRowView {
    std::span<const std::uint32_t> cols;
    std::span<const double> vals;
    double norm_sq;
};

/// Row-compressed nonnegative sparse matrix of ray-pixel intersection
/// lengths. Rows are appended in measurement order and consumed
/// sequentially by the row-action solver; squared row norms are cached at
/// append time.
class SystemMatrix {
public:
    SystemMatrix(std::size_t rows_hint, std::size_t cols) : cols_(cols) {
        row_ptr_.reserve(rows_hint + 1);
        row_ptr_.push_back(0);
        norm_sq_.reserve(rows_hint);
    }

    void append_row(std::span<const std::uint32_t> cols, std::span<const double> vals) {
        if (cols.size() != vals.size()) {
            throw std::invalid_argument("SystemMatrix: column/value count mismatch");
        }
        double n2 = 0.0;
        for (std::size_t p = 0; p < cols.size(); ++p) {
            if (cols[p] >= cols_) throw std::out_of_range("SystemMatrix: column out of range");
            col_.push_back(cols[p]);
            val_.push_back(vals[p]);
            n2 += vals[p] * vals[p];
        }
        row_ptr_.push_back(col_.size());
        norm_sq_.push_back(n2);
    }

    std::size_t rows() const { return norm_sq_.size(); }
    std::size_t cols() const { return cols_; }
    std::size_t nonzeros() const { return val_.size(); }

    SparseRowView row(std::size_t m) const {
        const std::size_t b = row_ptr_[m], e = row_ptr_[m + 1];
        return {std::span(col_).subspan(b, e - b), std::span(val_).subspan(b, e - b), norm_sq_[m]};
    }

    double row_norm_sq(std::size_t m) const { return norm_sq_[m]; }

    /// Recomputes every cached squared row norm and reports the largest
    /// relative deviation from the stored value.
    double max_norm_cache_error() const {
        double worst = 0.0;
        for (std::size_t m = 0; m < rows(); ++m) {
            SparseRowView r = row(m);
            double n2 = 0.0;
            for (double v : r.vals) n2 += v * v;
            const double scale = std::max(std::abs(n2), std::abs(r.norm_sq));
            if (scale > 0.0) worst = std::max(worst, std::abs(n2 - r.norm_sq) / scale);
        }
        return worst;
    }

    const std::vector<std::size_t>& row_pointers() const { return row_ptr_; }
    const std::vector<std::uint32_t>& column_indices() const { return col_; }
    const std::vector<double>& values() const { return val_; }

private:
    std::size_t cols_;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::uint32_t> col_;
    std::vector<double> val_;
    std::vector<double> norm_sq_;
};

/// y = A u.
inline std::vector<double> forward_project(const SystemMatrix& A, const ImageVector& u) {
    if (u.size() != A.cols()) throw std::invalid_argument("forward_project: dimension mismatch");
    const std::vector<double>& x = u.values();
    std::vector<double> y(A.rows(), 0.0);
    for (std::size_t m = 0; m < A.rows(); ++m) {
        SparseRowView r = A.row(m);
        double s = 0.0;
        for (std::size_t p = 0; p < r.cols.size(); ++p) s += r.vals[p] * x[r.cols[p]];
        y[m] = s;
    }
    return y;
}

// ---- binary container -------------------------------------------------
//
// Both containers are little-endian with an 8-byte magic string.
//
//   SUPRSMX1: u64 rows, u64 cols, u64 nnz,
//             i64 row_ptr[rows+1], i64 col_idx[nnz], f64 val[nnz]
//   SUPRSNG1: u64 m, f64 y[m]
//
// (This code assumes a little-endian host, as does everything it runs on.)

namespace detail {

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw std::runtime_error("binary container: unexpected end of file");
    return v;
}

inline void write_magic(std::ofstream& f, const char (&magic)[9]) { f.write(magic, 8); }

inline void expect_magic(std::ifstream& f, const char (&magic)[9], const std::string& what) {
    char got[8];
    f.read(got, 8);
    if (!f || std::memcmp(got, magic, 8) != 0) {
        throw std::runtime_error("binary container: bad magic, not a " + what + " file");
    }
}

}  // namespace detail

inline void save_system_matrix(const SystemMatrix& A, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_system_matrix: cannot open " + path.string());
    detail::write_magic(f, "SUPRSMX1");
    detail::write_pod<std::uint64_t>(f, A.rows());
    detail::write_pod<std::uint64_t>(f, A.cols());
    detail::write_pod<std::uint64_t>(f, A.nonzeros());
    for (std::size_t p : A.row_pointers()) detail::write_pod<std::int64_t>(f, static_cast<std::int64_t>(p));
    for (std::uint32_t c : A.column_indices()) detail::write_pod<std::int64_t>(f, c);
    for (double v : A.values()) detail::write_pod<double>(f, v);
    if (!f) throw std::runtime_error("save_system_matrix: write failed for " + path.string());
}

inline SystemMatrix load_system_matrix(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_system_matrix: cannot open " + path.string());
    detail::expect_magic(f, "SUPRSMX1", "system matrix");
    const auto rows = detail::read_pod<std::uint64_t>(f);
    const auto cols = detail::read_pod<std::uint64_t>(f);
    const auto nnz = detail::read_pod<std::uint64_t>(f);

    std::vector<std::int64_t> row_ptr(rows + 1);
    for (auto& p : row_ptr) p = detail::read_pod<std::int64_t>(f);
    std::vector<std::uint32_t> col(nnz);
    for (auto& c : col) c = static_cast<std::uint32_t>(detail::read_pod<std::int64_t>(f));
    std::vector<double> val(nnz);
    for (auto& v : val) v = detail::read_pod<double>(f);

    SystemMatrix A(rows, cols);
    for (std::uint64_t m = 0; m < rows; ++m) {
        const auto b = static_cast<std::size_t>(row_ptr[m]);
        const auto e = static_cast<std::size_t>(row_ptr[m + 1]);
        A.append_row(std::span(col).subspan(b, e - b), std::span(val).subspan(b, e - b));
    }
    return A;
}

}  // namespace supr
