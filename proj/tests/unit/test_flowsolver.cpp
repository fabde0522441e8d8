/// @file test_flowsolver.cpp
/// @brief Forcing, momentum/projection steps, energy audit, checkpoints and linear solvers.

#include "urans/flowsolver.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
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

BodyForce zero_force() {
    return [](double, double, double) { return std::pair{0.0, 0.0}; };
}

BodyForce annulus_force() {
    return [](double x, double y, double t) { return body_force_annulus(x, y, t, true); };
}

double max_abs(const Array2D& a) {
    double m = 0.0;
    for (double v : a.raw()) m = std::max(m, std::abs(v));
    return m;
}

ClosureConfig kinematic() {
    ClosureConfig c;
    c.mode = LengthScaleMode::Kinematic;
    return c;
}

}  // namespace

TEST_CASE("annulus body force") {
    auto [fx0, fy0] = body_force_annulus(0.0, 0.0, 3.0, true);
    CHECK(fx0 == 0.0);
    CHECK(fy0 == 0.0);
    auto [fx, fy] = body_force_annulus(0.5, 0.0, 2.0, true);
    CHECK(fx == doctest::Approx(0.0));
    CHECK(fy == doctest::Approx(1.5));
    auto [rx, ry] = body_force_annulus(0.5, 0.0, 0.5, true);
    CHECK(ry == doctest::Approx(0.75));
    CHECK(rx == doctest::Approx(0.0));
    auto [ux, uy] = body_force_annulus(0.5, 0.0, 0.5, false);
    CHECK(uy == doctest::Approx(1.5));
    CHECK(ux == doctest::Approx(0.0));
    for (double a : {0.0, 0.7, 2.1, 4.0}) {
        auto [cx, cy] = body_force_annulus(std::cos(a), std::sin(a), 5.0, true);
        CHECK(std::abs(cx) < 1e-14);
        CHECK(std::abs(cy) < 1e-14);
    }
}

TEST_CASE("solver config validation") {
    SolverConfig c;
    c.dt = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.penal_eta = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.proj_tol = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("rest state without forcing is a fixed point") {
    const Grid g = annulus_grid(32);
    const FlowSolver solver(g, kinematic(), SolverConfig{}, zero_force(), static_length_scale(g, 1e4));
    const FlowState rest(32, 32);
    FlowState s = rest;
    for (int n = 0; n < 3; ++n) s = solver.step(s);
    CHECK(max_abs(s.vel.u) == 0.0);
    CHECK(max_abs(s.vel.v) == 0.0);
    CHECK(max_abs(s.k) == 0.0);
    CHECK(s.t == doctest::Approx(0.03));
    CHECK(s.step == 3);
}

TEST_CASE("penalization drives solid velocity to zero within 50 steps") {
    const Grid g = annulus_grid(32);
    SolverConfig cfg;
    cfg.penal_eta = 1e-6;
    const FlowSolver solver(g, kinematic(), cfg, zero_force(), static_length_scale(g, 1e4));
    FlowState s(32, 32);
    for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i) {
            s.vel.u(i, j) = g.fixed_u(i, j) ? 0.0 : -g.yc(j);
            s.vel.v(i, j) = g.fixed_v(i, j) ? 0.0 : g.xc(i);
        }
    const double before = std::max(max_abs(s.vel.u), max_abs(s.vel.v));
    FlowState next = solver.step(s);
    for (int n = 0; n < 49; ++n) next = solver.step(next);
    double solid_max = 0.0;
    for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i) {
            if (g.chi_u(i, j) == 1.0 && g.solid(i, j) && (i == 0 || g.solid(i - 1, j)))
                solid_max = std::max(solid_max, std::abs(next.vel.u(i, j)));
            if (g.chi_v(i, j) == 1.0 && g.solid(i, j) && (j == 0 || g.solid(i, j - 1)))
                solid_max = std::max(solid_max, std::abs(next.vel.v(i, j)));
        }
    CHECK(solid_max < 1e-3 * before);
}

TEST_CASE("projection annihilates gradients and enforces the divergence tolerance") {
    const Grid g = annulus_grid(32);
    SolverConfig cfg;
    const FlowSolver solver(g, kinematic(), cfg, zero_force(), static_length_scale(g, 1e4));
    ScalarField q(32, 32);
    for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i) q(i, j) = std::sin(2.0 * g.xc(i)) * std::cos(g.yc(j)) + g.xc(i) * g.yc(j);
    const VectorField grad_q = gradient(q, g);
    const Projection proj = solver.pressure_project(grad_q);
    CHECK(std::max(max_abs(proj.vel.u), max_abs(proj.vel.v)) < 1e-6 * std::max(max_abs(grad_q.u), max_abs(grad_q.v)));

    std::mt19937 rng(11);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    VectorField w(32, 32);
    for (double& v : w.u.raw()) v = dist(rng);
    for (double& v : w.v.raw()) v = dist(rng);
    for (int j = 0; j < 32; ++j) {
        w.u(0, j) = 0.0;
        w.v(j, 0) = 0.0;
    }
    const Projection p2 = solver.pressure_project(w);
    CHECK(max_abs(divergence(p2.vel, g)) <= cfg.proj_tol);
}

TEST_CASE("a divergence-free field passes the projection unchanged") {
    const int n = 32;
    const Grid g = periodic_grid(n);
    const FlowSolver solver(g, kinematic(), SolverConfig{}, zero_force(), static_length_scale(g, 1e4));
    VectorField w(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            w.u(i, j) = std::sin(g.xf(i)) * std::cos(g.yc(j));
            w.v(i, j) = -std::cos(g.xc(i)) * std::sin(g.yf(j));
        }
    const Projection p = solver.pressure_project(w);
    double change = 0.0;
    for (std::size_t m = 0; m < w.u.size(); ++m)
        change = std::max({change, std::abs(p.vel.u.raw()[m] - w.u.raw()[m]), std::abs(p.vel.v.raw()[m] - w.v.raw()[m])});
    CHECK(change <= 1e-8);
}

TEST_CASE("energy audit is non-positive and its numerical dissipation is first order in dt") {
    const int n = 24;
    const Grid g = periodic_grid(n);
    BodyForce force = [](double, double y, double) { return std::pair{std::sin(y), 0.0}; };
    ClosureConfig c = kinematic();
    c.nu = 0.05;
    auto total_audit = [&](double dt) {
        SolverConfig cfg;
        cfg.dt = dt;
        cfg.ramp = false;
        const FlowSolver solver(g, c, cfg, force, static_length_scale(g, 1e4));
        FlowState s(n, n);
        s.k.fill(0.05);
        double total = 0.0, worst = -1.0;
        const int steps = static_cast<int>(std::lround(1.0 / dt));
        for (int k = 0; k < steps; ++k) {
            StepDiagnostics d;
            s = solver.step(s, &d);
            total += d.energy_audit;
            worst = std::max(worst, d.energy_audit);
        }
        return std::pair{total, worst};
    };
    const auto [a1, w1] = total_audit(0.02);
    const auto [a2, w2] = total_audit(0.01);
    CHECK(w1 <= 1e-12);
    CHECK(w2 <= 1e-12);
    CHECK(a1 / a2 == doctest::Approx(2.0).epsilon(0.3));
}

TEST_CASE("tau = 0 reproduces the closure-free step bitwise") {
    const Grid g = annulus_grid(32);
    ClosureConfig zero_tau = kinematic();
    zero_tau.tau = 0.0;
    ClosureConfig off;
    off.mode = LengthScaleMode::None;
    const LengthScaleField l0 = static_length_scale(g, 1e4);
    const FlowSolver a(g, zero_tau, SolverConfig{}, annulus_force(), l0);
    const FlowSolver b(g, off, SolverConfig{}, annulus_force(), l0);
    FlowState sa(32, 32), sb(32, 32);
    for (int n = 0; n < 5; ++n) {
        sa = a.step(sa);
        sb = b.step(sb);
    }
    CHECK(sa.vel == sb.vel);
    CHECK(sa.p == sb.p);
}

TEST_CASE("closure stays off before model_start") {
    const Grid g = annulus_grid(32);
    SolverConfig cfg;
    cfg.model_start = 0.05;
    const FlowSolver solver(g, kinematic(), cfg, annulus_force(), static_length_scale(g, 1e4));
    CHECK_FALSE(solver.closure_active(0.04));
    CHECK(solver.closure_active(0.05));
    FlowState s(32, 32);
    s.k.fill(0.01);
    for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i)
            if (g.solid(i, j)) s.k(i, j) = 0.0;
    const ScalarField k0 = s.k;
    for (int n = 0; n < 5; ++n) s = solver.step(s);
    CHECK(s.k == k0);
    s = solver.step(s);
    CHECK_FALSE(s.k == k0);
}

TEST_CASE("CFL guard raises a solver error") {
    const int n = 16;
    const Grid g = periodic_grid(n);
    SolverConfig cfg;
    cfg.dt = 1.0;
    const FlowSolver solver(g, kinematic(), cfg, zero_force(), static_length_scale(g, 1e4));
    FlowState s(n, n);
    s.vel.u.fill(1.0);
    CHECK_THROWS_AS(solver.step(s), SolverError);
}

TEST_CASE("checkpoint round trip and restart are bitwise") {
    const Grid g = annulus_grid(32);
    const FlowSolver solver(g, kinematic(), SolverConfig{}, annulus_force(), static_length_scale(g, 1e4));
    FlowState s(32, 32);
    s.k = initial_k_from_l0(static_length_scale(g, 1e4), 1.0);
    FlowState straight = s;
    for (int n = 0; n < 6; ++n) straight = solver.step(straight);

    FlowState half = s;
    for (int n = 0; n < 3; ++n) half = solver.step(half);
    const std::string path = (std::filesystem::temp_directory_path() / "urans_test_checkpoint.bin").string();
    write_checkpoint(path, half);
    FlowState restarted = read_checkpoint(path);
    std::remove(path.c_str());
    CHECK(restarted == half);
    for (int n = 0; n < 3; ++n) restarted = solver.step(restarted);
    CHECK(restarted == straight);
}

TEST_CASE("reading a foreign file as a checkpoint fails") {
    const std::string path = (std::filesystem::temp_directory_path() / "urans_test_bad.bin").string();
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("not a checkpoint at all, definitely not sixty-four bytes of header", f);
        std::fclose(f);
    }
    CHECK_THROWS(read_checkpoint(path));
    std::remove(path.c_str());
}

TEST_CASE("multigrid-preconditioned CG solves the periodic Poisson problem") {
    const int n = 32;
    const double h = 1.0 / n;
    PoissonMultigrid mg(n, n, h, h, true, true);
    std::vector<double> exact(n * n), b(n * n), x(n * n, 0.0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) exact[j * n + i] = std::sin(kTwoPi * (i + 0.5) * h) * std::cos(kTwoPi * (j + 0.5) * h);
    mg.apply(exact, b);
    SolveControl ctl;
    ctl.rel_tol = 1e-12;
    const SolveStats st = pcg([&](std::span<const double> in, std::span<double> out) { mg.apply(in, out); },
                              [&](std::span<const double> in, std::span<double> out) { mg.precondition(in, out); }, b,
                              x, ctl);
    CHECK(st.converged);
    CHECK(st.iterations < 30);
    remove_mean(x);
    double err = 0.0;
    for (int m = 0; m < n * n; ++m) err = std::max(err, std::abs(x[m] - exact[m]));
    CHECK(err < 1e-9);
}

TEST_CASE("BiCGSTAB with Jacobi solves a nonsymmetric tridiagonal system") {
    const int n = 50;
    auto apply = [n](std::span<const double> in, std::span<double> out) {
        for (int i = 0; i < n; ++i) {
            out[i] = 4.0 * in[i];
            if (i > 0) out[i] -= 1.5 * in[i - 1];
            if (i + 1 < n) out[i] -= 0.5 * in[i + 1];
        }
    };
    std::vector<double> exact(n), b(n), x(n, 0.0);
    for (int i = 0; i < n; ++i) exact[i] = std::cos(0.3 * i);
    apply(exact, b);
    SolveControl ctl;
    ctl.rel_tol = 1e-12;
    const SolveStats st = bicgstab(apply, jacobi_preconditioner(std::vector<double>(n, 4.0)), b, x, ctl);
    CHECK(st.converged);
    for (int i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx(exact[i]).epsilon(1e-9));
}
