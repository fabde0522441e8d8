/// @file test_grid_fields.cpp
/// @brief Grid geometry, masks and the staggered difference operators.

#include "urans/grid_fields.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace urans;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Grid periodic_grid(int n) {
    return make_grid(Box{0.0, 0.0, kTwoPi, kTwoPi}, n, n, BoundaryKind::Periodic, BoundaryKind::Periodic, {});
}

Grid annulus_grid(int n) {
    const Circle outer{0.0, 0.0, 1.0};
    return make_grid(Box{-1.0, -1.0, 2.0, 2.0}, n, n, BoundaryKind::NoSlip, BoundaryKind::NoSlip,
                     {Circle{0.5, 0.0, 0.1}}, &outer);
}

double max_abs(const Array2D& a) {
    double m = 0.0;
    for (double v : a.raw()) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace

TEST_CASE("wall distance in the unit box is 0.5 at the centre") {
    const Grid g = make_grid(Box{0.0, 0.0, 1.0, 1.0}, 8, 8, BoundaryKind::NoSlip, BoundaryKind::NoSlip, {});
    CHECK(g.geometry().wall_distance(0.5, 0.5) == doctest::Approx(0.5));
    CHECK(g.has_walls());
}

TEST_CASE("annulus wall distance at the origin is 0.4") {
    const Grid g = annulus_grid(64);
    // |(0,0) - (0.5,0)| - 0.1 = 0.4 < 1 - 0
    CHECK(g.geometry().wall_distance(0.0, 0.0) == doctest::Approx(0.4));
    CHECK(g.geometry().inside_solid(0.5, 0.0));
    CHECK(g.geometry().inside_solid(0.95, 0.95));
    CHECK_FALSE(g.geometry().inside_solid(0.0, 0.5));
}

TEST_CASE("periodic box without obstacles has infinite wall distance") {
    const Grid g = periodic_grid(8);
    CHECK(std::isinf(g.geometry().wall_distance(1.0, 1.0)));
    CHECK(std::isinf(g.wall_distance()(3, 3)));
    CHECK_FALSE(g.has_walls());
    CHECK(g.fluid_cell_count() == 64u);
}

TEST_CASE("wall distance is non-negative and zero next to walls and solids") {
    const Grid g = annulus_grid(32);
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            CHECK(g.wall_distance()(i, j) >= 0.0);
            if (g.solid(i, j)) CHECK(g.wall_distance()(i, j) == 0.0);
        }
}

TEST_CASE("an unresolved obstacle is a configuration error") {
    // obstacle diameter 0.2 < 2 * dx = 0.25
    CHECK_THROWS_AS(annulus_grid(16), ConfigError);
    CHECK_THROWS_AS(make_grid(Box{0.0, 0.0, 1.0, 1.0}, 3, 8, BoundaryKind::NoSlip, BoundaryKind::NoSlip, {}),
                    ConfigError);
}

TEST_CASE("deformation of a constant field vanishes") {
    const Grid g = periodic_grid(16);
    VectorField vel(16, 16);
    vel.u.fill(1.3);
    vel.v.fill(-0.4);
    CHECK(max_abs(deformation_tensor_magsq(vel, g)) < 1e-14);
}

TEST_CASE("uniform shear (y, 0) gives |grad^s v|^2 = 1/2") {
    // x periodic, no-slip at y = 0; u = y satisfies the mirrored ghost rule at the bottom wall
    const int n = 16;
    const Grid g = make_grid(Box{0.0, 0.0, 1.0, 1.0}, n, n, BoundaryKind::Periodic, BoundaryKind::NoSlip, {});
    VectorField vel(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) vel.u(i, j) = g.yc(j);
    const ScalarField m = deformation_tensor_magsq(vel, g);
    for (int j = 0; j < n - 1; ++j)
        for (int i = 0; i < n; ++i) CHECK(m(i, j) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("(sin y, 0) gives cos^2(y)/2 to second order") {
    auto max_error = [](int n) {
        const Grid g = periodic_grid(n);
        VectorField vel(n, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) vel.u(i, j) = std::sin(g.yc(j));
        const ScalarField m = deformation_tensor_magsq(vel, g);
        double err = 0.0;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) err = std::max(err, std::abs(m(i, j) - 0.5 * std::pow(std::cos(g.yc(j)), 2)));
        return err;
    };
    const double e1 = max_error(32), e2 = max_error(64), e3 = max_error(128);
    CHECK(std::log2(e1 / e2) >= 1.9);
    CHECK(std::log2(e2 / e3) >= 1.9);
}

TEST_CASE("divergence of (x, -y) vanishes on interior cells") {
    const int n = 12;
    const Grid g = make_grid(Box{0.0, 0.0, 1.0, 1.0}, n, n, BoundaryKind::NoSlip, BoundaryKind::NoSlip, {});
    VectorField vel(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            vel.u(i, j) = g.xf(i);
            vel.v(i, j) = -g.yf(j);
        }
    const ScalarField d = divergence(vel, g);
    for (int j = 0; j < n - 1; ++j)
        for (int i = 0; i < n - 1; ++i) CHECK(std::abs(d(i, j)) < 1e-12);
}

TEST_CASE("gradient and divergence are negative adjoints") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (const Grid& g : {periodic_grid(16), annulus_grid(32)}) {
        ScalarField p(g.nx(), g.ny());
        VectorField w(g.nx(), g.ny());
        for (double& x : p.raw()) x = dist(rng);
        for (double& x : w.u.raw()) x = dist(rng);
        for (double& x : w.v.raw()) x = dist(rng);
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i < g.nx(); ++i) {
                if (g.fixed_u(i, j)) w.u(i, j) = 0.0;
                if (g.fixed_v(i, j)) w.v(i, j) = 0.0;
            }
        const double lhs = dot_faces(gradient(p, g), w, g);
        const double rhs = -dot_cells(p, divergence(w, g), g);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("gradient and divergence converge at second order") {
    auto errors = [](int n) {
        const Grid g = periodic_grid(n);
        VectorField vel(n, n);
        ScalarField p(n, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                vel.u(i, j) = std::sin(g.xf(i)) * std::cos(g.yc(j));
                vel.v(i, j) = std::cos(g.xc(i)) * std::sin(g.yf(j));
                p(i, j) = std::sin(g.xc(i) + 2.0 * g.yc(j));
            }
        const ScalarField d = divergence(vel, g);
        const VectorField gp = gradient(p, g);
        double ed = 0.0, eg = 0.0;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                ed = std::max(ed, std::abs(d(i, j) - 2.0 * std::cos(g.xc(i)) * std::cos(g.yc(j))));
                eg = std::max(eg, std::abs(gp.u(i, j) - std::cos(g.xf(i) + 2.0 * g.yc(j))));
            }
        return std::pair{ed, eg};
    };
    const auto [d1, g1] = errors(16);
    const auto [d2, g2] = errors(32);
    const auto [d3, g3] = errors(64);
    CHECK(std::log2(d2 / d3) >= 1.9);
    CHECK(std::log2(g2 / g3) >= 1.9);
    CHECK(std::log2(d1 / d2) >= 1.8);
    CHECK(std::log2(g1 / g2) >= 1.8);
}

TEST_CASE("advection with zero velocity has zero tendency") {
    const Grid g = periodic_grid(8);
    VectorField vel(8, 8);
    ScalarField k(8, 8, 0.7);
    k(2, 3) = 2.0;
    CHECK(max_abs(advect(vel, k, g)) == 0.0);
    VectorField x(8, 8);
    x.u.fill(1.0);
    const VectorField t = advect(vel, x, g);
    CHECK(max_abs(t.u) == 0.0);
    CHECK(max_abs(t.v) == 0.0);
}

TEST_CASE("upwind advection conserves the integral and keeps k non-negative") {
    const int n = 16;
    const Grid g = periodic_grid(n);
    VectorField vel(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            vel.u(i, j) = std::sin(g.yc(j));
            vel.v(i, j) = std::cos(g.xc(i));
        }
    ScalarField k(n, n);
    k(4, 4) = 1.0;
    const double dt = upwind_stable_dt(vel, g);
    const ScalarField tend = advect(vel, k, g);
    double total = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            total += tend(i, j);
            CHECK(k(i, j) + dt * tend(i, j) >= -1e-15);
        }
    CHECK(std::abs(total) < 1e-13);
}

TEST_CASE("skew-symmetric convection does no work") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const Grid g = annulus_grid(32);
    VectorField w(32, 32), x(32, 32), out(32, 32);
    for (double& v : w.u.raw()) v = dist(rng);
    for (double& v : w.v.raw()) v = dist(rng);
    for (double& v : x.u.raw()) v = dist(rng);
    for (double& v : x.v.raw()) v = dist(rng);
    for (int j = 0; j < 32; ++j) {
        w.u(0, j) = x.u(0, j) = 0.0;
        w.v(j, 0) = x.v(j, 0) = 0.0;
    }
    apply_convection(w, x, out, g);
    CHECK(std::abs(dot_faces(out, x, g)) < 1e-10 * dot_faces(x, x, g));
}
