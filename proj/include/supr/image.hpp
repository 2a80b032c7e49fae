#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace supr {

/// Square pixel grid. Pixels are indexed by (i, j) with 0 <= i, j < side,
/// where i runs along x (columns) and j along y (rows). The flat index is
/// j * side + i; every module in this library shares that ordering.
struct ImageGrid {
    int side = 0;              // J
    double pixel_size = 1.0;   // physical side length of one pixel

    std::size_t pixel_count() const { return static_cast<std::size_t>(side) * side; }
    double physical_side() const { return side * pixel_size; }

    std::size_t flat_index(int i, int j) const {
        return static_cast<std::size_t>(j) * side + i;
    }

    bool operator==(const ImageGrid& o) const {
        return side == o.side && pixel_size == o.pixel_size;
    }
};

/// Image vector: grid plus one value per pixel in the shared flat order.
class ImageVector {
public:
    ImageVector() = default;

    explicit ImageVector(ImageGrid grid)
        : grid_(grid), values_(grid.pixel_count(), 0.0) {}

    ImageVector(ImageGrid grid, std::vector<double> values)
        : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.pixel_count()) {
            throw std::invalid_argument("ImageVector: value count does not match grid");
        }
    }

    const ImageGrid& grid() const { return grid_; }
    int side() const { return grid_.side; }
    std::size_t size() const { return values_.size(); }

    double operator()(int i, int j) const { return values_[grid_.flat_index(i, j)]; }
    double& operator()(int i, int j) { return values_[grid_.flat_index(i, j)]; }

    double at(int i, int j) const {
        check_index(i, j);
        return (*this)(i, j);
    }
    double& at(int i, int j) {
        check_index(i, j);
        return (*this)(i, j);
    }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    ImageVector& operator+=(const ImageVector& o) {
        require_same_grid(o);
        for (std::size_t p = 0; p < values_.size(); ++p) values_[p] += o.values_[p];
        return *this;
    }

    ImageVector& operator-=(const ImageVector& o) {
        require_same_grid(o);
        for (std::size_t p = 0; p < values_.size(); ++p) values_[p] -= o.values_[p];
        return *this;
    }

    ImageVector& operator*=(double s) {
        for (double& v : values_) v *= s;
        return *this;
    }

    friend ImageVector operator+(ImageVector a, const ImageVector& b) { return a += b; }
    friend ImageVector operator-(ImageVector a, const ImageVector& b) { return a -= b; }

    double norm() const {
        double s = 0.0;
        for (double v : values_) s += v * v;
        return std::sqrt(s);
    }

private:
    void check_index(int i, int j) const {
        if (i < 0 || i >= grid_.side || j < 0 || j >= grid_.side) {
            throw std::out_of_range("ImageVector: pixel index (" + std::to_string(i) + "," +
                                    std::to_string(j) + ") outside " +
                                    std::to_string(grid_.side) + "x" + std::to_string(grid_.side) +
                                    " grid");
        }
    }
    void require_same_grid(const ImageVector& o) const {
        if (!(grid_ == o.grid_)) throw std::invalid_argument("ImageVector: grid mismatch");
    }

    ImageGrid grid_;
    std::vector<double> values_;
};

/// Horizontal forward difference: u(i+1,j) - u(i,j), zero at the i = J-1 boundary.
inline double dx(const ImageVector& u, int i, int j) {
    u.at(i, j);
    if (i + 1 >= u.side()) return 0.0;
    return u(i + 1, j) - u(i, j);
}

/// Vertical forward difference: u(i,j+1) - u(i,j), zero at the j = J-1 boundary.
inline double dy(const ImageVector& u, int i, int j) {
    u.at(i, j);
    if (j + 1 >= u.side()) return 0.0;
    return u(i, j + 1) - u(i, j);
}

/// Discrete isotropic total variation: sum over all pixels of
/// sqrt(dx(u,i,j)^2 + dy(u,i,j)^2).
inline double total_variation(const ImageVector& u) {
    const int n = u.side();
    const std::vector<double>& v = u.values();
    double tv = 0.0;
    for (int j = 0; j < n; ++j) {
        const std::size_t row = static_cast<std::size_t>(j) * n;
        for (int i = 0; i < n; ++i) {
            const double c = v[row + i];
            const double gx = (i + 1 < n) ? v[row + i + 1] - c : 0.0;
            const double gy = (j + 1 < n) ? v[row + n + i] - c : 0.0;
            tv += std::sqrt(gx * gx + gy * gy);
        }
    }
    return tv;
}

/// Linear grayscale windowing to 8-bit. Values <= lo map to 0, values >= hi
/// to 255, linear with round-to-nearest in between. The raster is returned
/// top row first (j = side-1 first), matching the PGM layout.
inline std::vector<std::uint8_t> window_to_display(const ImageVector& u, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("window_to_display: requires lo < hi");
    const int n = u.side();
    std::vector<std::uint8_t> out(u.size());
    std::size_t p = 0;
    for (int j = n - 1; j >= 0; --j) {
        for (int i = 0; i < n; ++i) {
            const double v = u(i, j);
            double g;
            if (v <= lo) {
                g = 0.0;
            } else if (v >= hi) {
                g = 255.0;
            } else {
                g = std::round((v - lo) / (hi - lo) * 255.0);
            }
            out[p++] = static_cast<std::uint8_t>(g);
        }
    }
    return out;
}

/// Binary PGM (P5), maxval 255.
inline void write_pgm(const std::filesystem::path& path, int width, int height,
                      const std::vector<std::uint8_t>& raster) {
    if (raster.size() != static_cast<std::size_t>(width) * height) {
        throw std::invalid_argument("write_pgm: raster size does not match dimensions");
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm: cannot open " + path.string());
    f << "P5\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (!f) throw std::runtime_error("write_pgm: write failed for " + path.string());
}

}  // namespace supr
