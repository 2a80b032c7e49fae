#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "supr/image.hpp"
#include "supr/system_matrix.hpp"

namespace supr {

struct ArtConfig {
    double lambda = 1.0;  // relaxation, in (0, 2); rows are swept in ascending order

    void validate() const {
        if (!(lambda > 0.0 && lambda < 2.0)) {
            throw std::invalid_argument("ArtConfig: lambda must lie in (0,2)");
        }
    }
};

namespace detail {

inline void project_row_inplace(std::vector<double>& x, const SparseRowView& row, double y_m,
                                double lambda) {
    double dot = 0.0;
    for (std::size_t p = 0; p < row.cols.size(); ++p) dot += row.vals[p] * x[row.cols[p]];
    const double f = lambda * (y_m - dot) / row.norm_sq;
    for (std::size_t p = 0; p < row.cols.size(); ++p) x[row.cols[p]] += f * row.vals[p];
}

}  // namespace detail

/// Relaxed projection onto one measurement hyperplane:
/// u + lambda * (y_m - <a,u>) / ||a||^2 * a. Touches only the row support.
inline ImageVector project_row(const ImageVector& u, const SparseRowView& row, double y_m,
                               double lambda) {
    if (!(row.norm_sq > 0.0)) throw std::logic_error("project_row: zero-norm row");
    ImageVector out = u;
    detail::project_row_inplace(out.values(), row, y_m, lambda);
    return out;
}

/// One full sweep of relaxed row projections, m = 0..M-1 in order; this is
/// the basic algorithmic operator handed to the engine. Zero-norm rows
/// (rays that miss the grid) carry no constraint and are skipped.
inline ImageVector art_sweep(const SystemMatrix& A, std::span<const double> y,
                             const ArtConfig& cfg, ImageVector u) {
    if (y.size() != A.rows() || u.size() != A.cols()) {
        throw std::invalid_argument("art_sweep: dimension mismatch");
    }
    cfg.validate();
    std::vector<double>& x = u.values();
    for (std::size_t m = 0; m < A.rows(); ++m) {
        SparseRowView row = A.row(m);
        if (row.norm_sq <= 0.0) continue;
        detail::project_row_inplace(x, row, y[m], cfg.lambda);
    }
    return u;
}

/// Euclidean residual ||A u - y||.
inline double proximity(const SystemMatrix& A, std::span<const double> y, const ImageVector& u) {
    if (y.size() != A.rows() || u.size() != A.cols()) {
        throw std::invalid_argument("proximity: dimension mismatch");
    }
    const std::vector<double>& x = u.values();
    double s = 0.0;
    for (std::size_t m = 0; m < A.rows(); ++m) {
        SparseRowView row = A.row(m);
        double dot = 0.0;
        for (std::size_t p = 0; p < row.cols.size(); ++p) dot += row.vals[p] * x[row.cols[p]];
        const double r = dot - y[m];
        s += r * r;
    }
    return std::sqrt(s);
}

}  // namespace supr
