#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include "supr/engine.hpp"
#include "supr/image.hpp"
#include "supr/schedule.hpp"

namespace supr {

/// Magnitude clamp: min{theta, |alpha|} * sgn(alpha).
inline double clamp(double alpha, double theta) {
    if (alpha > 0.0) return std::min(theta, alpha);
    if (alpha < 0.0) return -std::min(theta, -alpha);
    return 0.0;
}

enum class Axis { X, Y };

/// Component-wise smoothing direction built from clamped neighbor
/// differences: w(i,j) = (clamp(dx(i,j)) - clamp(dx(i-1,j))) / 2 along x,
/// and the same with dy and j-1 along y. Out-of-range back differences are
/// zero. Every component satisfies |w(i,j)| <= theta, so ||w|| <= theta*sqrt(L).
inline ImageVector cw_direction(const ImageVector& u, Axis axis, double theta) {
    if (!(theta > 0.0)) throw std::invalid_argument("cw_direction: theta must be positive");
    const int n = u.side();
    ImageVector w(u.grid());
    if (axis == Axis::X) {
        for (int j = 0; j < n; ++j) {
            double prev = 0.0;  // clamped dx(i-1, j)
            for (int i = 0; i < n; ++i) {
                const double cur = (i + 1 < n) ? clamp(u(i + 1, j) - u(i, j), theta) : 0.0;
                w(i, j) = 0.5 * (cur - prev);
                prev = cur;
            }
        }
    } else {
        for (int i = 0; i < n; ++i) {
            double prev = 0.0;  // clamped dy(i, j-1)
            for (int j = 0; j < n; ++j) {
                const double cur = (j + 1 < n) ? clamp(u(i, j + 1) - u(i, j), theta) : 0.0;
                w(i, j) = 0.5 * (cur - prev);
                prev = cur;
            }
        }
    }
    return w;
}

/// Result of one component-wise TV step, with the intermediate acceptance
/// outcomes exposed for tests and diagnostics.
struct CwStep {
    ImageVector displacement;
    ImageVector next;
    bool x_accepted = false;
    bool y_accepted = false;
    double tv_before = 0.0;
    double tv_after = 0.0;
};

/// One derivative-free TV perturbation of total budget delta: an x sub-step
/// followed by a y sub-step on the (possibly updated) image, each with
/// budget delta/2 (component clamp (delta/2)/sqrt(L)) and each kept only if
/// it does not increase TV. The total displacement d therefore satisfies
/// ||d|| <= delta and TV(u + d) <= TV(u); the zero step is the worst case.
inline CwStep cw_step(const ImageVector& u, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("cw_step: delta must be positive");
    const double theta = (delta / 2.0) / std::sqrt(static_cast<double>(u.size()));

    CwStep step;
    step.tv_before = total_variation(u);
    step.displacement = ImageVector(u.grid());

    ImageVector current = u;
    double tv_current = step.tv_before;

    ImageVector wx = cw_direction(current, Axis::X, theta);
    ImageVector cand = current + wx;
    double tv_cand = total_variation(cand);
    if (tv_cand <= tv_current) {
        step.x_accepted = true;
        step.displacement += wx;
        current = std::move(cand);
        tv_current = tv_cand;
    }

    ImageVector wy = cw_direction(current, Axis::Y, theta);
    cand = current + wy;
    tv_cand = total_variation(cand);
    if (tv_cand <= tv_current) {
        step.y_accepted = true;
        step.displacement += wy;
        current = std::move(cand);
        tv_current = tv_cand;
    }

    // When every clamp saturates and the two sub-directions align, ||d||
    // reaches delta analytically and the computed norm can land an ulp
    // above it. Pull the step back inside the ball and re-gate; the zero
    // step remains the fallback.
    const double nd = step.displacement.norm();
    if (nd > delta) {
        step.displacement *= (delta / nd) * (1.0 - 4.0 * std::numeric_limits<double>::epsilon());
        current = u + step.displacement;
        tv_current = total_variation(current);
        if (tv_current > step.tv_before) {
            step.displacement = ImageVector(u.grid());
            step.x_accepted = step.y_accepted = false;
            current = u;
            tv_current = step.tv_before;
        }
    }

    step.next = std::move(current);
    step.tv_after = tv_current;
    return step;
}

/// Displacement-only view of cw_step.
inline ImageVector cw_oracle(const ImageVector& u, double delta) {
    return cw_step(u, delta).displacement;
}

struct NgConfig {
    double gamma_tol = 1e-12;        // denominator stabilizer
    double grad_norm_floor = 1e-12;  // below this the direction is taken as zero
};

/// Gradient of the discrete isotropic TV with stabilized denominators.
/// Each pixel collects the partial derivatives of the up to three
/// square-root terms it appears in: its own term and the terms of its left
/// and lower neighbors.
inline ImageVector tv_gradient(const ImageVector& u, const NgConfig& cfg = {}) {
    const int n = u.side();
    ImageVector g(u.grid());
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double c = u(i, j);
            const double gx = (i + 1 < n) ? u(i + 1, j) - c : 0.0;
            const double gy = (j + 1 < n) ? u(i, j + 1) - c : 0.0;
            const double den = cfg.gamma_tol + std::sqrt(gx * gx + gy * gy);
            const double s = (gx + gy) / den;
            g(i, j) -= s;
            if (i + 1 < n) g(i + 1, j) += gx / den;
            if (j + 1 < n) g(i, j + 1) += gy / den;
        }
    }
    return g;
}

namespace detail {
// A rejected candidate is retried with the next (smaller) eta; this cap turns
// an eta underflow into a flagged zero step instead of an endless search.
inline constexpr long long kNgSearchLimit = 1'000'000;
}  // namespace detail

struct NgStep {
    ImageVector displacement;
    ImageVector next;
    long long ell = 0;  // schedule index the step was accepted at
    double delta_used = 0.0;
    bool flagged = false;  // search limit hit, zero step returned
};

/// Negative-gradient TV step: d = -eta_ell * g / ||g|| with the stabilized
/// gradient g, retried with ell incremented until TV(u + d) <= TV(u). The
/// returned ell is the accepted index; the caller applies the ordinary
/// per-inner-step increment on top. A zero gradient yields the zero step.
inline NgStep ng_step(const ImageVector& u, const Schedule& schedule, long long ell,
                      const NgConfig& cfg = {}) {
    NgStep step;
    step.displacement = ImageVector(u.grid());

    const ImageVector g = tv_gradient(u, cfg);
    const double gn = g.norm();
    if (gn <= cfg.grad_norm_floor) {
        step.next = u;
        step.ell = ell;
        step.delta_used = schedule.eta(ell);
        return step;
    }

    const double tv0 = total_variation(u);
    for (long long tries = 0; tries < detail::kNgSearchLimit; ++tries) {
        const double eta = schedule.eta(ell);
        ImageVector d = g;
        d *= -eta / gn;
        // keep the computed norm at or below eta; the analytic value is
        // exactly eta, but the floating norm may land one ulp above
        double nd = d.norm();
        if (nd > eta) {
            d *= (eta / nd) * (1.0 - 4.0 * std::numeric_limits<double>::epsilon());
        }
        ImageVector cand = u + d;
        if (total_variation(cand) <= tv0) {
            step.displacement = std::move(d);
            step.next = std::move(cand);
            step.ell = ell;
            step.delta_used = eta;
            return step;
        }
        ++ell;
    }

    step.next = u;
    step.ell = ell;
    step.delta_used = schedule.eta(ell);
    step.flagged = true;
    return step;
}

/// (d, updated ell) form of ng_step: the returned index is the accepted one
/// plus the per-step increment, so search retries consume schedule terms on
/// top of the ordinary advance.
inline std::pair<ImageVector, long long> ng_oracle(const ImageVector& u, const Schedule& schedule,
                                                   long long ell, const NgConfig& cfg = {}) {
    NgStep step = ng_step(u, schedule, ell, cfg);
    return {std::move(step.displacement), step.ell + 1};
}

/// Engine-facing oracle using component-wise TV steps of budget eta_ell.
inline NonascentOracle make_cw_tv_oracle() {
    NonascentOracle oracle;
    oracle.target = [](const ImageVector& y) { return total_variation(y); };
    oracle.direction = [](const ImageVector& y, ScheduleCursor& cursor) {
        CwStep cw = cw_step(y, cursor.eta());
        OracleStep out;
        out.displacement = std::move(cw.displacement);
        out.next = std::move(cw.next);
        out.delta_used = cursor.eta();
        return out;
    };
    return oracle;
}

/// Engine-facing oracle using negative-gradient TV steps; rejected
/// candidates advance the cursor before retrying.
inline NonascentOracle make_ng_tv_oracle(NgConfig cfg = {}) {
    NonascentOracle oracle;
    oracle.target = [](const ImageVector& y) { return total_variation(y); };
    oracle.direction = [cfg](const ImageVector& y, ScheduleCursor& cursor) {
        NgStep ng = ng_step(y, cursor.schedule(), cursor.index(), cfg);
        while (cursor.index() < ng.ell) cursor.advance();
        OracleStep out;
        out.displacement = std::move(ng.displacement);
        out.next = std::move(ng.next);
        out.delta_used = ng.delta_used;
        out.flagged = ng.flagged;
        return out;
    };
    return oracle;
}

/// Oracle that always returns the zero step; turns the engine into the plain
/// basic algorithm while keeping the same trace and stopping logic.
inline NonascentOracle make_zero_oracle(std::function<double(const ImageVector&)> target) {
    NonascentOracle oracle;
    oracle.target = std::move(target);
    oracle.direction = [](const ImageVector& y, ScheduleCursor& cursor) {
        OracleStep out;
        out.displacement = ImageVector(y.grid());
        out.next = y;
        out.delta_used = cursor.eta();
        return out;
    };
    return oracle;
}

}  // namespace supr
