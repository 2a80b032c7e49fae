#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "supr/image.hpp"
#include "supr/schedule.hpp"
#include "supr/tomography.hpp"
#include "supr/tv_perturbations.hpp"

using namespace supr;

namespace {

ImageVector random_image(int side, std::mt19937_64& gen, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    ImageVector u(ImageGrid{side, 1.0});
    for (double& v : u.values()) v = dist(gen);
    return u;
}

// Literal double-loop transcription of the clamped-difference formulas,
// kept independent of cw_direction.
ImageVector cw_direction_reference(const ImageVector& u, Axis axis, double theta) {
    const int n = u.side();
    ImageVector w(u.grid());
    auto cl = [theta](double a) {
        const double m = std::min(theta, std::abs(a));
        return a > 0 ? m : (a < 0 ? -m : 0.0);
    };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            if (axis == Axis::X) {
                const double cur = dx(u, i, j);
                const double prev = (i >= 1) ? cl(dx(u, i - 1, j)) : 0.0;
                w(i, j) = 0.5 * (cl(cur) - prev);
            } else {
                const double cur = dy(u, i, j);
                const double prev = (j >= 1) ? cl(dy(u, i, j - 1)) : 0.0;
                w(i, j) = 0.5 * (cl(cur) - prev);
            }
        }
    }
    return w;
}

// 3x3 image whose rows all read [0, 10, 0] along x.
ImageVector spike_column_image() {
    ImageVector u(ImageGrid{3, 1.0});
    for (int j = 0; j < 3; ++j) u(1, j) = 10.0;
    return u;
}

}  // namespace

TEST_CASE("magnitude clamp", "[tv_perturbations]") {
    CHECK(clamp(0.5, 0.2) == 0.2);
    CHECK(clamp(-0.05, 0.1) == -0.05);
    CHECK(clamp(0.0, 3.0) == 0.0);
    CHECK(clamp(-7.0, 2.0) == -2.0);

    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> dist(-4.0, 4.0);
    for (int rep = 0; rep < 1000; ++rep) {
        const double a = dist(gen);
        const double theta = std::abs(dist(gen)) + 1e-6;
        const double c = clamp(a, theta);
        CHECK(clamp(c, theta) == c);  // idempotent
        CHECK(std::abs(c) <= std::min(theta, std::abs(a)));
        CHECK(c * a >= 0.0);  // sign preserved
    }
}

TEST_CASE("component-wise direction on hand-checked images", "[tv_perturbations]") {
    SECTION("constant image gives the zero vector") {
        ImageVector c(ImageGrid{4, 1.0});
        for (double& v : c.values()) v = 3.25;
        for (Axis ax : {Axis::X, Axis::Y}) {
            const ImageVector w = cw_direction(c, ax, 1.0);
            for (double v : w.values()) CHECK(v == 0.0);
        }
    }

    SECTION("rows [0,10,0] with theta 1 give [0.5,-1,0.5]") {
        const ImageVector u = spike_column_image();
        const ImageVector w = cw_direction(u, Axis::X, 1.0);
        for (int j = 0; j < 3; ++j) {
            CHECK(w(0, j) == 0.5);
            CHECK(w(1, j) == -1.0);
            CHECK(w(2, j) == 0.5);
        }
        // No variation along y, so the y direction is zero.
        const ImageVector wy = cw_direction(u, Axis::Y, 1.0);
        for (double v : wy.values()) CHECK(v == 0.0);
    }

    CHECK_THROWS_AS(cw_direction(spike_column_image(), Axis::X, 0.0), std::invalid_argument);
}

TEST_CASE("component-wise direction equals the reference evaluation", "[tv_perturbations]") {
    std::mt19937_64 gen(17);
    for (int rep = 0; rep < 100; ++rep) {
        const ImageVector u = random_image(6, gen, -1.0, 1.0);
        const double theta = 0.01 + (gen() % 100) / 50.0;
        for (Axis ax : {Axis::X, Axis::Y}) {
            const ImageVector got = cw_direction(u, ax, theta);
            const ImageVector want = cw_direction_reference(u, ax, theta);
            REQUIRE(got.values() == want.values());
        }
    }
}

TEST_CASE("norm bound of the component-wise direction", "[tv_perturbations]") {
    std::mt19937_64 gen(23);
    const double sqrtL = 8.0;  // 8x8 grid
    for (int rep = 0; rep < 500; ++rep) {
        const ImageVector u = random_image(8, gen, -2.0, 2.0);
        const double theta = 1e-3 + (gen() % 1000) / 250.0;
        for (Axis ax : {Axis::X, Axis::Y}) {
            CHECK(cw_direction(u, ax, theta).norm() <= theta * sqrtL);
        }
        // With the clamp chosen as delta / sqrt(L), the direction stays
        // inside the delta-ball.
        const double delta = 1e-3 + (gen() % 1000) / 100.0;
        CHECK(cw_direction(u, Axis::X, delta / sqrtL).norm() <= delta);
    }
}

TEST_CASE("unclamped limit reduces to the plain averaging direction", "[tv_perturbations]") {
    std::mt19937_64 gen(31);
    for (int rep = 0; rep < 50; ++rep) {
        const ImageVector u = random_image(6, gen, -1.0, 1.0);
        double max_diff = 0.0;
        for (int j = 0; j < 6; ++j) {
            for (int i = 0; i < 6; ++i) {
                max_diff = std::max({max_diff, std::abs(dx(u, i, j)), std::abs(dy(u, i, j))});
            }
        }
        const double theta = 10.0 * max_diff + 1.0;  // clamp never active
        for (Axis ax : {Axis::X, Axis::Y}) {
            const ImageVector w = cw_direction(u, ax, theta);
            for (int j = 0; j < 6; ++j) {
                for (int i = 0; i < 6; ++i) {
                    const double cur = (ax == Axis::X) ? dx(u, i, j) : dy(u, i, j);
                    const double prev = (ax == Axis::X) ? (i >= 1 ? dx(u, i - 1, j) : 0.0)
                                                        : (j >= 1 ? dy(u, i, j - 1) : 0.0);
                    REQUIRE(w(i, j) == 0.5 * (cur - prev));
                }
            }
        }
    }
}

TEST_CASE("gated component-wise step", "[tv_perturbations]") {
    SECTION("constant image: zero displacement, TV unchanged") {
        ImageVector c(ImageGrid{4, 1.0});
        for (double& v : c.values()) v = 1.5;
        const CwStep step = cw_step(c, 0.8);
        CHECK(step.displacement.norm() == 0.0);
        CHECK(step.tv_before == 0.0);
        CHECK(step.tv_after == 0.0);
        CHECK(step.next.values() == c.values());
    }

    SECTION("spike column with sub-step theta 1: accepted, TV 60 -> 51") {
        const ImageVector u = spike_column_image();
        // delta = 6 makes the per-substep clamp (delta/2)/sqrt(9) = 1.
        const CwStep step = cw_step(u, 6.0);
        CHECK(step.x_accepted);
        CHECK(step.tv_before == Catch::Approx(60.0).margin(1e-12));
        CHECK(step.tv_after == Catch::Approx(51.0).margin(1e-12));
        for (int j = 0; j < 3; ++j) {
            CHECK(step.next(0, j) == 0.5);
            CHECK(step.next(1, j) == 9.0);
            CHECK(step.next(2, j) == 0.5);
        }
        CHECK(cw_oracle(u, 6.0).values() == step.displacement.values());
    }

    SECTION("membership in the nonascending delta-ball on random images") {
        std::mt19937_64 gen(37);
        for (int rep = 0; rep < 300; ++rep) {
            const ImageVector u = random_image(8, gen);
            const double delta = 1e-3 + (gen() % 1000) / 200.0;
            const CwStep step = cw_step(u, delta);
            CHECK(step.displacement.norm() <= delta);
            CHECK(step.tv_after <= step.tv_before);
            CHECK(total_variation(step.next) == step.tv_after);
        }
    }
}

TEST_CASE("stabilized TV gradient", "[tv_perturbations]") {
    SECTION("constant image has zero gradient") {
        ImageVector c(ImageGrid{5, 1.0});
        for (double& v : c.values()) v = 0.3;
        const ImageVector g = tv_gradient(c);
        for (double v : g.values()) CHECK(v == 0.0);
    }

    SECTION("matches central finite differences on smooth random images") {
        std::mt19937_64 gen(41);
        const double h = 1e-6;
        for (int rep = 0; rep < 25; ++rep) {
            // A linear ramp keeps every denominator well away from zero.
            ImageVector u = random_image(8, gen, 0.0, 0.25);
            for (int j = 0; j < 8; ++j) {
                for (int i = 0; i < 8; ++i) u(i, j) += 0.5 * i + 0.25 * j;
            }
            const ImageVector g = tv_gradient(u);
            double max_err = 0.0, gmax = 0.0;
            for (int j = 0; j < 8; ++j) {
                for (int i = 0; i < 8; ++i) {
                    ImageVector up = u, um = u;
                    up(i, j) += h;
                    um(i, j) -= h;
                    const double fd = (total_variation(up) - total_variation(um)) / (2.0 * h);
                    max_err = std::max(max_err, std::abs(g(i, j) - fd));
                    gmax = std::max(gmax, std::abs(fd));
                }
            }
            REQUIRE(max_err / gmax <= 1e-4);
        }
    }

    SECTION("interior spike: gradient peaks at the spike, pulls neighbors up") {
        ImageVector u(ImageGrid{7, 1.0});
        u(3, 3) = 1.0;
        const ImageVector g = tv_gradient(u);
        double gmax = 0.0;
        for (double v : g.values()) gmax = std::max(gmax, std::abs(v));
        CHECK(std::abs(g(3, 3)) == gmax);
        CHECK(g(3, 3) > 0.0);   // descent lowers the spike
        CHECK(g(2, 3) < 0.0);   // and raises the pixels beside it
        CHECK(g(4, 3) < 0.0);
        CHECK(g(3, 2) < 0.0);
        CHECK(g(3, 4) < 0.0);
        CHECK(g(0, 0) == 0.0);  // flat far field
    }
}

TEST_CASE("negative-gradient step", "[tv_perturbations]") {
    const Schedule schedule{0.2, 0.995, {10}};

    SECTION("constant image: zero step, index advances once") {
        ImageVector c(ImageGrid{4, 1.0});
        for (double& v : c.values()) v = 2.0;
        const auto [d, ell] = ng_oracle(c, schedule, 5);
        CHECK(d.norm() == 0.0);
        CHECK(ell == 6);
    }

    SECTION("first candidate accepted: ||d|| = eta exactly") {
        // A smooth ramp: eta(0) = 0.2 is small against the structure, so
        // the very first candidate already lowers TV.
        ImageVector u(ImageGrid{8, 1.0});
        for (int j = 0; j < 8; ++j) {
            for (int i = 0; i < 8; ++i) u(i, j) = 2.0 * i + 3.0 * j;
        }
        const NgStep step = ng_step(u, schedule, 0);
        CHECK(step.ell == 0);
        CHECK_FALSE(step.flagged);
        CHECK(step.displacement.norm() == Catch::Approx(schedule.eta(0)).epsilon(1e-14));
        CHECK(step.displacement.norm() <= schedule.eta(0));
        CHECK(total_variation(step.next) <= total_variation(u));

        const auto [d, ell] = ng_oracle(u, schedule, 0);
        CHECK(ell == 1);
        CHECK(d.values() == step.displacement.values());
    }

    SECTION("piecewise-constant phantom rejects overlarge candidates") {
        // At low contrast the unit-norm step of size eta(0) = 0.2 inverts
        // the phantom's edges and raises TV until eta has shrunk.
        ImageVector ph = shepp_logan(16);
        ph *= 1e-3;
        const NgStep step = ng_step(ph, schedule, 0);
        CHECK(step.ell >= 1);
        CHECK_FALSE(step.flagged);
        CHECK(step.displacement.norm() <= schedule.eta(step.ell));
        CHECK(total_variation(step.next) <= total_variation(ph));
    }

    SECTION("small-amplitude image forces several index increments") {
        std::mt19937_64 gen(43);
        ImageVector u = random_image(8, gen, 0.0, 1e-4);
        const NgStep step = ng_step(u, schedule, 0);
        CHECK(step.ell > 100);  // eta must decay to the image scale first
        CHECK_FALSE(step.flagged);
        CHECK(step.displacement.norm() <= schedule.eta(step.ell));
        CHECK(total_variation(step.next) <= total_variation(u));

        const auto [d, ell] = ng_oracle(u, schedule, 0);
        CHECK(ell == step.ell + 1);
        CHECK(d.norm() > 0.0);
    }

    SECTION("acceptance failure guard returns a flagged zero step") {
        // With an astronomically large eta0 and a kernel this close to 1,
        // every candidate within the search limit stays astronomically
        // large and is rejected.
        const Schedule frozen{1e100, 1.0 - 1e-12, {10}};
        ImageVector u(ImageGrid{4, 1.0});
        u(1, 1) = 1.0;
        const NgStep step = ng_step(u, frozen, 0);
        CHECK(step.flagged);
        CHECK(step.displacement.norm() == 0.0);
        CHECK(step.next.values() == u.values());
        CHECK(step.ell == 1'000'000);
    }
}
