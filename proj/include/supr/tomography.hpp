#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "supr/image.hpp"
#include "supr/system_matrix.hpp"

namespace supr {

struct Point2 {
    double x = 0.0, y = 0.0;
};

/// Fan-beam acquisition: a point source at distance source_radius (in units
/// of the grid's physical side) from the grid center, rays spread
/// symmetrically over [-fan_half_angle, +fan_half_angle] about the central
/// direction, one fan per view angle.
struct FanBeamGeometry {
    double source_radius = 2.0;
    int detector_count = 0;
    double fan_half_angle = 0.0;  // radians
    std::vector<double> view_angles;

    std::size_t ray_count() const { return view_angles.size() * static_cast<std::size_t>(detector_count); }

    void validate(const ImageGrid& grid) const {
        if (detector_count < 1) throw std::invalid_argument("FanBeamGeometry: detector_count must be >= 1");
        if (!(fan_half_angle > 0.0)) throw std::invalid_argument("FanBeamGeometry: fan_half_angle must be positive");
        if (view_angles.empty()) throw std::invalid_argument("FanBeamGeometry: no view angles");
        // Source must sit outside the disk circumscribing the grid.
        if (!(source_radius * grid.physical_side() > std::numbers::sqrt2 / 2.0 * grid.physical_side())) {
            throw std::invalid_argument("FanBeamGeometry: source inside the image disk");
        }
    }

    /// Defaults used throughout: source two grid sides from the center,
    /// 2J rays per view spanning exactly the grid's circumscribed circle,
    /// and equally spaced full-circle view angles.
    static FanBeamGeometry standard(int views, const ImageGrid& grid) {
        if (views < 1) throw std::invalid_argument("FanBeamGeometry: views must be >= 1");
        FanBeamGeometry g;
        g.source_radius = 2.0;
        g.detector_count = 2 * grid.side;
        g.fan_half_angle = std::asin((std::numbers::sqrt2 / 2.0) / g.source_radius);
        g.view_angles.resize(views);
        for (int v = 0; v < views; ++v) {
            g.view_angles[v] = 2.0 * std::numbers::pi * v / views;
        }
        return g;
    }
};

namespace detail {

// Modified Shepp-Logan ellipses: intensity in tenths, semi-axes, center,
// rotation. Integer intensities keep pixel values exact multiples of 0.1.
struct PhantomEllipse {
    int tenths;
    double a, b, x0, y0, phi_deg;
};

inline constexpr PhantomEllipse kSheppLogan[10] = {
    {10, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
};

}  // namespace detail

/// Shepp-Logan phantom (modified intensities, values in [0, 1]) rasterized
/// on a J x J grid: each pixel gets the summed intensity of the ellipses
/// containing its center, with centers placed on [-1, 1]^2.
inline ImageVector shepp_logan(int J) {
    if (J < 16) throw std::invalid_argument("shepp_logan: J must be >= 16");
    ImageVector u(ImageGrid{J, 1.0});
    for (int j = 0; j < J; ++j) {
        const double yn = (2.0 * j + 1.0) / J - 1.0;
        for (int i = 0; i < J; ++i) {
            const double xn = (2.0 * i + 1.0) / J - 1.0;
            int tenths = 0;
            for (const auto& e : detail::kSheppLogan) {
                const double phi = e.phi_deg * std::numbers::pi / 180.0;
                const double dxn = xn - e.x0, dyn = yn - e.y0;
                const double xr = dxn * std::cos(phi) + dyn * std::sin(phi);
                const double yr = -dxn * std::sin(phi) + dyn * std::cos(phi);
                if ((xr / e.a) * (xr / e.a) + (yr / e.b) * (yr / e.b) <= 1.0) tenths += e.tenths;
            }
            u(i, j) = tenths / 10.0;
        }
    }
    return u;
}

/// Exact intersection lengths of the ray src + t*dir (t >= 0, ||dir|| = 1)
/// with the pixels of the grid, as (flat index, length) pairs. The grid is
/// centered at the origin. Entry/exit parameters come from slab clipping;
/// interior crossings with the two plane families are merged in sorted
/// order and each segment is attributed to the pixel containing its
/// midpoint, so lengths sum to the chord length. A ray missing the grid
/// yields an empty row.
inline std::vector<std::pair<std::uint32_t, double>> trace_ray(const ImageGrid& grid, Point2 src,
                                                               Point2 dir) {
    const double dn = std::sqrt(dir.x * dir.x + dir.y * dir.y);
    if (std::abs(dn - 1.0) > 1e-12) throw std::invalid_argument("trace_ray: dir must be a unit vector");

    const int n = grid.side;
    const double h = grid.pixel_size;
    const double half = grid.physical_side() / 2.0;

    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    const double s[2] = {src.x, src.y};
    const double d[2] = {dir.x, dir.y};
    for (int ax = 0; ax < 2; ++ax) {
        if (d[ax] == 0.0) {
            if (s[ax] <= -half || s[ax] >= half) return {};
        } else {
            double t1 = (-half - s[ax]) / d[ax];
            double t2 = (half - s[ax]) / d[ax];
            if (t1 > t2) std::swap(t1, t2);
            tmin = std::max(tmin, t1);
            tmax = std::min(tmax, t2);
        }
    }
    if (!(tmax > tmin)) return {};

    // Crossing parameters with each plane family, ascending in t.
    auto crossings = [&](int ax) {
        std::vector<double> ts;
        if (d[ax] == 0.0) return ts;
        ts.reserve(n - 1);
        if (d[ax] > 0.0) {
            for (int q = 1; q < n; ++q) {
                const double t = (-half + q * h - s[ax]) / d[ax];
                if (t > tmin && t < tmax) ts.push_back(t);
            }
        } else {
            for (int q = n - 1; q >= 1; --q) {
                const double t = (-half + q * h - s[ax]) / d[ax];
                if (t > tmin && t < tmax) ts.push_back(t);
            }
        }
        return ts;
    };
    const std::vector<double> tx = crossings(0);
    const std::vector<double> ty = crossings(1);

    std::vector<double> ts;
    ts.reserve(tx.size() + ty.size() + 2);
    ts.push_back(tmin);
    std::merge(tx.begin(), tx.end(), ty.begin(), ty.end(), std::back_inserter(ts));
    ts.push_back(tmax);

    std::vector<std::pair<std::uint32_t, double>> row;
    row.reserve(ts.size());
    for (std::size_t q = 0; q + 1 < ts.size(); ++q) {
        const double len = ts[q + 1] - ts[q];
        if (!(len > 0.0)) continue;
        const double tm = 0.5 * (ts[q] + ts[q + 1]);
        const int i = std::clamp(static_cast<int>(std::floor((src.x + tm * dir.x + half) / h)), 0, n - 1);
        const int j = std::clamp(static_cast<int>(std::floor((src.y + tm * dir.y + half) / h)), 0, n - 1);
        row.emplace_back(static_cast<std::uint32_t>(grid.flat_index(i, j)), len);
    }
    return row;
}

/// One matrix row per (view, detector) pair, views outer and detectors
/// inner. Detector t of a view gets the direction at angle
/// base - fha + (t + 1/2) * (2 fha / detector_count) where base points from
/// the source at the grid center.
inline SystemMatrix build_system_matrix(const FanBeamGeometry& geometry, const ImageGrid& grid) {
    geometry.validate(grid);
    const double r = geometry.source_radius * grid.physical_side();
    const double step = 2.0 * geometry.fan_half_angle / geometry.detector_count;

    SystemMatrix A(geometry.ray_count(), grid.pixel_count());
    std::vector<std::uint32_t> cols;
    std::vector<double> vals;
    for (double view : geometry.view_angles) {
        const Point2 src{r * std::cos(view), r * std::sin(view)};
        const double base = std::atan2(-src.y, -src.x);
        for (int t = 0; t < geometry.detector_count; ++t) {
            const double ang = base - geometry.fan_half_angle + (t + 0.5) * step;
            const auto row = trace_ray(grid, src, Point2{std::cos(ang), std::sin(ang)});
            cols.clear();
            vals.clear();
            for (const auto& [c, v] : row) {
                cols.push_back(c);
                vals.push_back(v);
            }
            A.append_row(cols, vals);
        }
    }
    return A;
}

namespace detail {

// Uniform double in [0, 1) from the top 53 bits; fully determined by the
// mt19937_64 stream, unlike std::generate_canonical.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Box-Muller standard normal, bit-reproducible across standard libraries.
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : gen_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01(gen_);  // (0, 1]
        const double u2 = uniform01(gen_);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace detail

/// Adds seeded Gaussian noise rescaled so that ||noise|| = level * ||y||
/// exactly. level 0 returns y unchanged; a fixed seed gives bit-identical
/// output.
inline std::vector<double> add_noise(std::span<const double> y, double level, std::uint64_t seed) {
    if (level < 0.0) throw std::invalid_argument("add_noise: level must be nonnegative");
    std::vector<double> out(y.begin(), y.end());
    if (level == 0.0 || y.empty()) return out;

    detail::NormalSource normal(seed);
    std::vector<double> e(y.size());
    double en = 0.0, yn = 0.0;
    for (std::size_t m = 0; m < y.size(); ++m) {
        e[m] = normal.next();
        en += e[m] * e[m];
        yn += y[m] * y[m];
    }
    en = std::sqrt(en);
    yn = std::sqrt(yn);
    if (en == 0.0 || yn == 0.0) return out;

    const double scale = level * yn / en;
    for (std::size_t m = 0; m < y.size(); ++m) out[m] += scale * e[m];
    return out;
}

/// Measurement vector with the geometry and noise provenance it came from.
struct Sinogram {
    std::vector<double> y;
    FanBeamGeometry geometry;
    double noise_level = 0.0;
    std::int64_t seed = 0;
};

// Sinogram container: magic SUPRSNG1, then u64 detector_count, u64 views,
// f64 source_radius, f64 fan_half_angle, f64 noise_level, i64 seed,
// f64 view_angles[views], u64 m, f64 y[m]. Little-endian throughout.
inline void save_sinogram(const Sinogram& s, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_sinogram: cannot open " + path.string());
    detail::write_magic(f, "SUPRSNG1");
    detail::write_pod<std::uint64_t>(f, static_cast<std::uint64_t>(s.geometry.detector_count));
    detail::write_pod<std::uint64_t>(f, s.geometry.view_angles.size());
    detail::write_pod<double>(f, s.geometry.source_radius);
    detail::write_pod<double>(f, s.geometry.fan_half_angle);
    detail::write_pod<double>(f, s.noise_level);
    detail::write_pod<std::int64_t>(f, s.seed);
    for (double a : s.geometry.view_angles) detail::write_pod<double>(f, a);
    detail::write_pod<std::uint64_t>(f, s.y.size());
    for (double v : s.y) detail::write_pod<double>(f, v);
    if (!f) throw std::runtime_error("save_sinogram: write failed for " + path.string());
}

inline Sinogram load_sinogram(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_sinogram: cannot open " + path.string());
    detail::expect_magic(f, "SUPRSNG1", "sinogram");
    Sinogram s;
    s.geometry.detector_count = static_cast<int>(detail::read_pod<std::uint64_t>(f));
    const auto views = detail::read_pod<std::uint64_t>(f);
    s.geometry.source_radius = detail::read_pod<double>(f);
    s.geometry.fan_half_angle = detail::read_pod<double>(f);
    s.noise_level = detail::read_pod<double>(f);
    s.seed = detail::read_pod<std::int64_t>(f);
    s.geometry.view_angles.resize(views);
    for (auto& a : s.geometry.view_angles) a = detail::read_pod<double>(f);
    const auto m = detail::read_pod<std::uint64_t>(f);
    s.y.resize(m);
    for (auto& v : s.y) v = detail::read_pod<double>(f);
    return s;
}

}  // namespace supr
