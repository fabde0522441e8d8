/// @file test_statistics.cpp
/// @brief Flow statistics, scales, CSV output and time averaging.

#include "urans/statistics.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace urans;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Grid periodic_grid(int n) {
    return make_grid(Box{0.0, 0.0, kTwoPi, kTwoPi}, n, n, BoundaryKind::Periodic, BoundaryKind::Periodic, {});
}

/// (sin y, 0) on the periodic box.
FlowState sine_shear(const Grid& g, double amplitude = 1.0) {
    FlowState s(g.nx(), g.ny());
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) s.vel.u(i, j) = amplitude * std::sin(g.yc(j));
    return s;
}

ClosureConfig mode(LengthScaleMode m, double nu = 1e-4) {
    ClosureConfig c;
    c.mode = m;
    c.nu = nu;
    return c;
}

LengthScaleField uniform_l(const Grid& g, double l) { return LengthScaleField{Array2D(g.nx(), g.ny(), l)}; }

/// Uniform k giving nu_T = target for the Kinematic closure.
double k_for_nu_t(const ClosureConfig& c, double target) { return target / (std::numbers::sqrt2 * c.mu * c.tau); }

}  // namespace

TEST_CASE("dissipation rate") {
    const Grid g = periodic_grid(32);
    const ClosureConfig kin = mode(LengthScaleMode::Kinematic);
    FlowState rest(32, 32);
    CHECK(dissipation_rate(rest, kin, uniform_l(g, 1.0), g) == 0.0);
    rest.k.fill(1.0);
    CHECK(dissipation_rate(rest, kin, uniform_l(g, 1.0), g) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    // (sin y, 0): mean |grad^s v|^2 = <cos^2 y>/2 = 1/4, so eps = 2 nu / 4
    const FlowState shear = sine_shear(g);
    CHECK(dissipation_rate(shear, kin, uniform_l(g, 1.0), g) == doctest::Approx(0.5e-4).epsilon(1e-2));
}

TEST_CASE("pure shear dissipation uses 2 nu |grad^s v|^2 = nu") {
    // x periodic, no-slip at y = 0: u = y is resolved exactly below the top row
    const int n = 16;
    const Grid g = make_grid(Box{0.0, 0.0, 1.0, 1.0}, n, n, BoundaryKind::Periodic, BoundaryKind::NoSlip, {});
    FlowState s(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) s.vel.u(i, j) = g.yc(j);
    const ScalarField m = deformation_tensor_magsq(s.vel, g);
    CHECK(2.0 * 1e-4 * m(3, 5) == doctest::Approx(1e-4).epsilon(1e-12));
}

TEST_CASE("intensity") {
    const Grid g = periodic_grid(8);
    FlowState s(8, 8);
    CHECK_FALSE(intensity(s, g).has_value());
    s.vel.u.fill(1.0);
    CHECK(intensity(s, g).value() == 0.0);
    s.k.fill(0.5);
    CHECK(intensity(s, g).value() == doctest::Approx(1.0));
    s.vel.u.fill(2.0);
    CHECK(intensity(s, g).value() == doctest::Approx(0.25));
}

TEST_CASE("effective viscosity and viscosity ratio") {
    const Grid g = periodic_grid(32);
    ClosureConfig kin = mode(LengthScaleMode::Kinematic, 1e-3);
    const LengthScaleField l0 = uniform_l(g, 1.0);
    FlowState s = sine_shear(g);
    CHECK(effective_viscosity(s, kin, l0, g).value() == doctest::Approx(1e-3));
    CHECK(viscosity_ratio(s, kin, l0, g).value() == 0.0);
    s.k.fill(k_for_nu_t(kin, 1e-3));
    CHECK(effective_viscosity(s, kin, l0, g).value() == doctest::Approx(2e-3));
    CHECK(viscosity_ratio(s, kin, l0, g).value() == doctest::Approx(0.5));
    s.k.fill(k_for_nu_t(kin, 2e-3));
    CHECK(viscosity_ratio(s, kin, l0, g).value() == doctest::Approx(1.0));
    const FlowState still(32, 32);
    CHECK_FALSE(effective_viscosity(still, kin, l0, g).has_value());
    CHECK_FALSE(viscosity_ratio(still, kin, l0, g).has_value());
}

TEST_CASE("effective viscosity with varying nu_T matches a finer-grid quadrature") {
    auto nu_eff = [](int n) {
        const Grid g = periodic_grid(n);
        ClosureConfig kin = mode(LengthScaleMode::Kinematic, 1e-3);
        FlowState s = sine_shear(g);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) s.k(i, j) = 0.01 * (1.5 + std::sin(g.xc(i)) * std::cos(2.0 * g.yc(j)) + std::cos(g.yc(j)));
        return effective_viscosity(s, kin, uniform_l(g, 1.0), g).value();
    };
    CHECK(nu_eff(32) == doctest::Approx(nu_eff(128)).epsilon(0.01));
}

TEST_CASE("Taylor microscale") {
    const Grid g = periodic_grid(64);
    const FlowState s = sine_shear(g);
    CHECK(taylor_microscale(s.vel, g).value() == doctest::Approx(std::sqrt(2.0)).epsilon(2e-3));
    const FlowState s3 = sine_shear(g, 3.0);
    CHECK(taylor_microscale(s3.vel, g).value() == doctest::Approx(taylor_microscale(s.vel, g).value()).epsilon(1e-13));
    CHECK_FALSE(taylor_microscale(FlowState(64, 64).vel, g).has_value());
    const Grid coarse = periodic_grid(32);
    CHECK(taylor_microscale(sine_shear(coarse).vel, coarse).value() ==
          doctest::Approx(taylor_microscale(s.vel, g).value()).epsilon(0.01));
}

TEST_CASE("average length scale and eddy viscosity") {
    const Grid g = periodic_grid(8);
    FlowState s(8, 8);
    const ClosureConfig st = mode(LengthScaleMode::Static);
    CHECK(avg_l(s, st, uniform_l(g, 0.0), g, 2.0) == 0.0);
    CHECK(avg_l(s, st, uniform_l(g, 0.3), g, 2.0) == doctest::Approx(0.15));
    const ClosureConfig kin = mode(LengthScaleMode::Kinematic);
    s.k.fill(0.2);
    CHECK(avg_nu_t(s, kin, uniform_l(g, 1.0), g, 2.0, 0.5) ==
          doctest::Approx(std::numbers::sqrt2 * kin.mu * 0.2 * kin.tau / (2.0 * 0.5)));
}

TEST_CASE("force scales") {
    const Grid g = periodic_grid(16);
    VectorField f(16, 16);
    CHECK_THROWS_AS(force_scales(f, g), std::domain_error);
    f.u.fill(3.0);
    f.v.fill(4.0);
    const ForceScales c = force_scales(f, g);
    CHECK(c.F == doctest::Approx(5.0));
    CHECK(c.L == doctest::Approx(c.L_domain));
    CHECK(c.L_domain == doctest::Approx(kTwoPi));

    VectorField s(16, 16);
    for (int j = 0; j < 16; ++j)
        for (int i = 0; i < 16; ++i) s.u(i, j) = std::sin(g.yc(j));
    const ForceScales a = force_scales(s, g);
    for (double& v : s.u.raw()) v *= 2.0;
    const ForceScales b = force_scales(s, g);
    CHECK(b.F == doctest::Approx(2.0 * a.F));
    CHECK(b.L == doctest::Approx(a.L));
}

TEST_CASE("annulus force scales satisfy the gradient bounds and converge under refinement") {
    auto scales = [](int n) {
        const Circle outer{0.0, 0.0, 1.0};
        const Grid g = make_grid(Box{-1.0, -1.0, 2.0, 2.0}, n, n, BoundaryKind::NoSlip, BoundaryKind::NoSlip,
                                 {Circle{0.5, 0.0, 0.1}}, &outer);
        VectorField f(n, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                f.u(i, j) = body_force_annulus(g.xf(i), g.yc(j), 2.0, true).first;
                f.v(i, j) = body_force_annulus(g.xc(i), g.yf(j), 2.0, true).second;
            }
        return force_scales(f, g);
    };
    const ForceScales c = scales(64);
    const ForceScales fine = scales(256);
    CHECK(c.grad_sup <= c.F / c.L * (1.0 + 1e-2));
    CHECK(c.grad_rms <= c.F / c.L * (1.0 + 1e-2));
    CHECK(c.L <= c.L_domain);
    CHECK(c.F == doctest::Approx(fine.F).epsilon(0.05));
    CHECK(c.L == doctest::Approx(fine.L).epsilon(0.1));
}

TEST_CASE("compute_scales") {
    const Grid g = periodic_grid(16);
    VectorField f(16, 16);
    f.u.fill(1.0);
    const FlowScales s = compute_scales(f, 4.0, g, 0.01);
    CHECK(s.U == doctest::Approx(2.0));
    CHECK(s.Re == doctest::Approx(kTwoPi * 2.0 / 0.01));
    CHECK(s.Tstar == doctest::Approx(kTwoPi / 2.0));
}

TEST_CASE("time averages") {
    const std::vector<double> t = {0.0, 0.5, 1.0, 1.5, 2.0};
    CHECK(time_average(t, std::vector<double>(5, 3.0), 0.0, 2.0) == doctest::Approx(3.0));
    CHECK(time_average(t, t, 0.0, 2.0) == doctest::Approx(1.0));
    CHECK(time_average(t, t, 0.25, 1.75) == doctest::Approx(1.0));
    CHECK(time_average(t, t, 1.0, 2.0) == doctest::Approx(1.5));
    CHECK_THROWS_AS(time_average(t, t, 2.0, 2.0), std::invalid_argument);
    std::vector<std::optional<double>> gap = {0.0, 0.5, std::nullopt, 1.5, 2.0};
    CHECK(time_average(t, gap, 0.0, 2.0) == doctest::Approx((0.125 + 0.875) / 1.0));
    std::vector<std::optional<double>> none(5);
    CHECK_THROWS_AS(time_average(t, none, 0.0, 2.0), std::invalid_argument);
    // averaging a constant extension of an average returns it unchanged
    const double m = time_average(t, t, 0.0, 2.0);
    CHECK(time_average(t, std::vector<double>(5, m), 0.0, 2.0) == doctest::Approx(m));
}

TEST_CASE("online averager matches the batch average") {
    const std::vector<double> t = {0.0, 0.3, 0.9, 1.4, 2.0, 2.2};
    const std::vector<double> v = {1.0, 4.0, -2.0, 0.5, 3.0, 1.0};
    TimeAverager avg(0.5);
    CHECK_FALSE(avg.value().has_value());
    for (std::size_t n = 0; n < t.size(); ++n) avg.add(t[n], v[n]);
    CHECK(avg.value().value() == doctest::Approx(time_average(t, v, 0.5, 2.2)));
    CHECK(avg.covered() == doctest::Approx(1.7));
}

TEST_CASE("Cauchy-Schwarz holds for time averages") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> t, a, b, ab, a2, b2;
        double time = 0.0;
        for (int n = 0; n < 50; ++n) {
            time += 0.05 + 0.1 * std::abs(dist(rng));
            t.push_back(time);
            a.push_back(dist(rng));
            b.push_back(dist(rng));
            ab.push_back(a.back() * b.back());
            a2.push_back(a.back() * a.back());
            b2.push_back(b.back() * b.back());
        }
        const double T = t.back();
        const double lhs = time_average(t, ab, t.front(), T);
        // the product of two piecewise-linear series is not piecewise linear, so compare
        // against the averages of the sampled squares with a small quadrature allowance
        CHECK(lhs <= std::sqrt(time_average(t, a2, t.front(), T) * time_average(t, b2, t.front(), T)) + 1e-12);
    }
}

TEST_CASE("statistics are invariant under periodic translation") {
    const int n = 16;
    const Grid g = periodic_grid(n);
    FlowState s(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            s.vel.u(i, j) = std::sin(g.yc(j)) + 0.3 * std::cos(g.xf(i) + g.yc(j));
            s.vel.v(i, j) = 0.2 * std::sin(2.0 * g.xc(i));
            s.k(i, j) = 0.1 + 0.05 * std::cos(g.xc(i));
        }
    FlowState shifted(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int si = (i + 5) % n, sj = (j + 3) % n;
            shifted.vel.u(si, sj) = s.vel.u(i, j);
            shifted.vel.v(si, sj) = s.vel.v(i, j);
            shifted.k(si, sj) = s.k(i, j);
        }
    const ClosureConfig kin = mode(LengthScaleMode::Kinematic);
    const StatRecord a = sample_statistics(s, kin, uniform_l(g, 0.5), g);
    const StatRecord b = sample_statistics(shifted, kin, uniform_l(g, 0.5), g);
    CHECK(a.kinetic_energy == doctest::Approx(b.kinetic_energy).epsilon(1e-13));
    CHECK(a.eps_model == doctest::Approx(b.eps_model).epsilon(1e-13));
    CHECK(a.intensity.value() == doctest::Approx(b.intensity.value()).epsilon(1e-13));
    CHECK(a.nu_effective.value() == doctest::Approx(b.nu_effective.value()).epsilon(1e-13));
    CHECK(a.taylor_microscale.value() == doctest::Approx(b.taylor_microscale.value()).epsilon(1e-13));
}

TEST_CASE("statistics CSV round trip with the exact header and empty missing cells") {
    const std::string path = (std::filesystem::temp_directory_path() / "urans_test_stats.csv").string();
    std::vector<StatRecord> records(2);
    records[0].t = 0.0;
    records[0].kinetic_energy = 0.0;
    records[1].t = 0.1;
    records[1].kinetic_energy = 1.0 / 3.0;
    records[1].intensity = 0.25;
    records[1].avg_l_over_L = 1e-17;
    write_stat_csv(path, records);
    {
        std::ifstream in(path);
        std::string header, first;
        std::getline(in, header);
        std::getline(in, first);
        CHECK(header == kStatCsvHeader);
        CHECK(first == "0,0,0,,,,,,");
    }
    const auto back = read_stat_csv(path);
    std::filesystem::remove(path);
    REQUIRE(back.size() == 2);
    CHECK(back[1].kinetic_energy == records[1].kinetic_energy);
    CHECK(back[1].intensity.value() == 0.25);
    CHECK_FALSE(back[0].intensity.has_value());
    CHECK(back[1].avg_l_over_L.value() == 1e-17);
}
