/// @file test_closure.cpp
/// @brief Length scales, eddy viscosity, initial k and the k-equation step.

#include "urans/closure.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace urans;

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

Grid periodic_grid(int n) {
    return make_grid(Box{0.0, 0.0, 1.0, 1.0}, n, n, BoundaryKind::Periodic, BoundaryKind::Periodic, {});
}

ClosureConfig closure(LengthScaleMode mode, double tau = 1.0) {
    ClosureConfig c;
    c.mode = mode;
    c.tau = tau;
    return c;
}

/// Uniform k0 at rest on a periodic box, advanced to t_end with k_step.
double uniform_decay(const ClosureConfig& c, double k0, double l0, double dt, int steps) {
    const int n = 4;
    const Grid g = periodic_grid(n);
    ScalarField k(n, n, k0);
    const VectorField rest(n, n);
    const LengthScaleField l{Array2D(n, n, l0)};
    for (int s = 0; s < steps; ++s) k = k_step(k, rest, rest, c, l, g, dt);
    return k(1, 2);
}

}  // namespace

TEST_CASE("static length scale") {
    CHECK(static_length_scale(0.0, 1e4) == 0.0);
    CHECK(static_length_scale(0.001, 1e4) == doctest::Approx(4.1e-4));
    CHECK(static_length_scale(0.5, 1e4) == doctest::Approx(8.2e-4));
}

TEST_CASE("static length scale on a periodic box is the cap everywhere") {
    const LengthScaleField l = static_length_scale(periodic_grid(8), 1e4);
    for (double v : l.l.raw()) CHECK(v == doctest::Approx(8.2e-4));
}

TEST_CASE("static length scale vanishes on wall-adjacent cells") {
    const Grid g = make_grid(Box{0.0, 0.0, 1.0, 1.0}, 8, 8, BoundaryKind::Periodic, BoundaryKind::NoSlip, {});
    const LengthScaleField l = static_length_scale(g, 1e4);
    for (int i = 0; i < 8; ++i) CHECK(l.l(i, 0) == 0.0);
}

TEST_CASE("kinematic length scale") {
    ScalarField k(2, 1);
    k(0, 0) = 0.0;
    k(1, 0) = 0.5;
    const LengthScaleField l = kinematic_length_scale(k, 1.0);
    CHECK(l.l(0, 0) == 0.0);
    CHECK(l.l(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
    ScalarField k2(1, 1, 2.0);
    CHECK(kinematic_length_scale(k2, 0.5).l(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("geometric length scale") {
    CHECK(geometric_length_scale(3.0, 7.0, 1.0) == doctest::Approx(3.0));
    CHECK(geometric_length_scale(3.0, 7.0, 0.0) == doctest::Approx(7.0));
    CHECK(geometric_length_scale(4.0, 1.0, 0.5) == doctest::Approx(2.0));
    CHECK(geometric_length_scale(0.0, 5.0, 0.5) == 0.0);
}

TEST_CASE("eddy viscosity") {
    const LengthScaleField l{Array2D(1, 1, 1.0)};
    ScalarField k(1, 1, 0.0);
    CHECK(eddy_viscosity(l, k, 0.55)(0, 0) == 0.0);
    k(0, 0) = 1.0;
    CHECK(eddy_viscosity(l, k, 0.55)(0, 0) == doctest::Approx(0.55));
    // Kinematic: sqrt2 mu k tau
    CHECK(model_eddy_viscosity(closure(LengthScaleMode::Kinematic), 0.0, 0.5) ==
          doctest::Approx(kSqrt2 * 0.55 * 0.5).epsilon(1e-14));
    CHECK(model_eddy_viscosity(closure(LengthScaleMode::Kinematic), 0.0, 0.5) == doctest::Approx(0.3889).epsilon(1e-4));
}

TEST_CASE("kinematic eddy viscosity is linear and increasing in tau at frozen k") {
    const double a = model_eddy_viscosity(closure(LengthScaleMode::Kinematic, 1.0), 0.0, 1.0);
    const double b = model_eddy_viscosity(closure(LengthScaleMode::Kinematic, 2.0), 0.0, 1.0);
    CHECK(b / a == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(model_eddy_viscosity(closure(LengthScaleMode::Kinematic, 0.0), 0.0, 1.0) == 0.0);
}

TEST_CASE("initial k from l0 and its round trip") {
    Array2D l0(3, 1);
    l0(0, 0) = 0.0;
    l0(1, 0) = 4.1e-4;
    l0(2, 0) = 0.37;
    const ScalarField k = initial_k_from_l0(LengthScaleField{l0}, 1.0);
    CHECK(k(0, 0) == 0.0);
    CHECK(k(1, 0) == doctest::Approx(8.405e-8).epsilon(1e-12));
    const LengthScaleField back = kinematic_length_scale(k, 1.0);
    for (int i = 0; i < 3; ++i) CHECK(back.l(i, 0) == doctest::Approx(l0(i, 0)).epsilon(1e-14));
}

TEST_CASE("duct initial k") {
    CHECK(duct_intensity(1e4) == doctest::Approx(0.16 * std::pow(1e4, -0.125)));
    const Grid g = periodic_grid(4);
    VectorField vel(4, 4);
    CHECK(initial_k_duct(vel, g, 1e4)(1, 1) == 0.0);
    vel.u.fill(1.0);
    const double i = duct_intensity(1e4);
    const double k1 = initial_k_duct(vel, g, 1e4)(1, 1);
    CHECK(k1 == doctest::Approx(1.5 * i * i));
    CHECK(k1 == doctest::Approx(3.84e-3).epsilon(1e-2));
    vel.u.fill(2.0);
    CHECK(initial_k_duct(vel, g, 1e4)(1, 1) == doctest::Approx(4.0 * k1));
}

TEST_CASE("closure config validation") {
    ClosureConfig c;
    c.mu = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ClosureConfig{};
    c.mode = LengthScaleMode::Geometric;
    c.theta = 2.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.theta = 1.0;
    c.tau = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK(length_scale_mode_from_string(to_string(LengthScaleMode::Geometric)) == LengthScaleMode::Geometric);
    CHECK_THROWS_AS(length_scale_mode_from_string("bogus"), ConfigError);
}

TEST_CASE("decay oracle closed forms") {
    CHECK(decay_ode_oracle(1.0, closure(LengthScaleMode::Kinematic), 1.0, kSqrt2) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
    CHECK(decay_ode_oracle(1.0, closure(LengthScaleMode::Static), 1.0, 2.0) == doctest::Approx(0.25).epsilon(1e-8));
    // theta = 1 reduces to Static and theta = 0 to Kinematic
    ClosureConfig g = closure(LengthScaleMode::Geometric);
    g.theta = 1.0;
    CHECK(decay_ode_oracle(1.0, g, 1.0, 2.0) == doctest::Approx(0.25).epsilon(1e-8));
    g.theta = 0.0;
    CHECK(decay_ode_oracle(1.0, g, 1.0, kSqrt2) == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
}

TEST_CASE("geometric decay oracle has late log-log slope -1.3") {
    ClosureConfig g = closure(LengthScaleMode::Geometric);
    g.theta = 2.0 / 1.3;
    const double lambda = 0.5 * g.theta * relaxation_rate(g, 1.0, 1.0);
    const double t1 = 500.0, t2 = 1000.0;
    const double slope = std::log(decay_ode_oracle(1.0, g, 1.0, t2) / decay_ode_oracle(1.0, g, 1.0, t1)) /
                         std::log((1.0 + lambda * t2) / (1.0 + lambda * t1));
    CHECK(slope == doctest::Approx(-1.3).epsilon(1e-6));
}

TEST_CASE("k stays zero at rest") {
    CHECK(uniform_decay(closure(LengthScaleMode::Kinematic), 0.0, 1.0, 0.1, 10) == 0.0);
    CHECK(uniform_decay(closure(LengthScaleMode::Static), 0.0, 1.0, 0.1, 10) == 0.0);
}

TEST_CASE("uniform kinematic decay converges at first order to exp(-t/(sqrt2 tau))") {
    const ClosureConfig c = closure(LengthScaleMode::Kinematic);
    const double exact = decay_ode_oracle(1.0, c, 1.0, kSqrt2);
    CHECK(exact == doctest::Approx(0.3679).epsilon(1e-4));
    const double e1 = std::abs(uniform_decay(c, 1.0, 1.0, kSqrt2 / 100, 100) - exact);
    const double e2 = std::abs(uniform_decay(c, 1.0, 1.0, kSqrt2 / 200, 200) - exact);
    CHECK(e1 < 5e-3);
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("uniform static decay converges at first order to k0 (1 + sqrt(k0) t / (2 l))^-2") {
    const ClosureConfig c = closure(LengthScaleMode::Static);
    const double e1 = std::abs(uniform_decay(c, 1.0, 1.0, 0.02, 100) - 0.25);
    const double e2 = std::abs(uniform_decay(c, 1.0, 1.0, 0.01, 200) - 0.25);
    CHECK(e1 < 5e-3);
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("k_step keeps k non-negative under strong shear and records clamped mass") {
    const int n = 16;
    const Grid g = make_grid(Box{0.0, 0.0, 1.0, 1.0}, n, n, BoundaryKind::Periodic, BoundaryKind::NoSlip, {});
    VectorField vel(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            vel.u(i, j) = 5.0 * std::sin(6.0 * g.yc(j));
            vel.v(i, j) = j == 0 ? 0.0 : std::cos(4.0 * g.xc(i));
        }
    ScalarField k(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) k(i, j) = (i + j) % 3 == 0 ? 1.0 : 0.0;
    const LengthScaleField l0 = static_length_scale(g, 100.0);
    for (LengthScaleMode mode : {LengthScaleMode::Kinematic, LengthScaleMode::Static, LengthScaleMode::Geometric}) {
        KStepDiagnostics d;
        const ScalarField out = k_step(k, vel, vel, closure(mode), l0, g, 0.01, &d);
        for (double v : out.raw()) CHECK(v >= 0.0);
        CHECK(d.clamped_mass >= 0.0);
        // l0 = 0 on the wall row, where the Static and Geometric sinks force k = 0
        if (mode != LengthScaleMode::Kinematic)
            for (int i = 0; i < n; ++i) CHECK(out(i, 0) == 0.0);
    }
}
