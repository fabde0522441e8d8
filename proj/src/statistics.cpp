#include "urans/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace urans {

ScalarField cell_speed_sq(const VectorField& vel, const Grid& grid) {
    ScalarField out(grid.nx(), grid.ny());
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) {
            const double uw = grid.u_at(vel.u, i, j);
            const double ue = grid.u_at(vel.u, i + 1, j);
            const double vs = grid.v_at(vel.v, i, j);
            const double vn = grid.v_at(vel.v, i, j + 1);
            out(i, j) = 0.5 * (uw * uw + ue * ue) + 0.5 * (vs * vs + vn * vn);
        }
    return out;
}

double fluid_integral(const ScalarField& field, const Grid& grid) {
    double s = 0.0;
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i)
            if (grid.fluid(i, j)) s += field(i, j);
    return s * grid.cell_area();
}

double fluid_mean(const ScalarField& field, const Grid& grid) { return fluid_integral(field, grid) / grid.fluid_area(); }

ForceScales force_scales(const VectorField& force, const Grid& grid) {
    ForceScales s;
    s.F = std::sqrt(fluid_mean(cell_speed_sq(force, grid), grid));
    if (!(s.F > 0.0)) throw std::domain_error("force scales undefined for zero forcing");
    const ScalarField grad = deformation_tensor_magsq(force, grid);
    double sup = 0.0;
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i)
            if (grid.fluid(i, j)) sup = std::max(sup, grad(i, j));
    s.grad_sup = std::sqrt(sup);
    s.grad_rms = std::sqrt(fluid_mean(grad, grid));
    s.L_domain = grid.domain_length();
    s.L = s.L_domain;
    if (s.grad_sup > 0.0) s.L = std::min(s.L, s.F / s.grad_sup);
    if (s.grad_rms > 0.0) s.L = std::min(s.L, s.F / s.grad_rms);
    return s;
}

FlowScales compute_scales(const ForceScales& force, double mean_velocity_sq, double nu) {
    FlowScales s;
    s.F = force.F;
    s.L = force.L;
    s.U = std::sqrt(std::max(mean_velocity_sq, 0.0));
    s.Re = nu > 0.0 ? s.L * s.U / nu : std::numeric_limits<double>::infinity();
    s.Tstar = s.U > 0.0 ? s.L / s.U : std::numeric_limits<double>::infinity();
    return s;
}

FlowScales compute_scales(const VectorField& force, double mean_velocity_sq, const Grid& grid, double nu) {
    return compute_scales(force_scales(force, grid), mean_velocity_sq, nu);
}

double kinetic_energy(const VectorField& vel, const Grid& grid) {
    return 0.5 * fluid_integral(cell_speed_sq(vel, grid), grid);
}

namespace {

// Integrals shared by several statistics.
struct Moments {
    double grad_sq = 0.0;     // ∫|grad^s v|^2
    double nu_t_grad = 0.0;   // ∫nu_T |grad^s v|^2
    double speed_sq = 0.0;    // ∫|v|^2
    double k = 0.0;           // ∫k
    double sink = 0.0;        // ∫k^{3/2}/l
    double l_sq = 0.0;        // ∫l^2
    double nu_t = 0.0;        // ∫nu_T
};

Moments moments(const FlowState& state, const ClosureConfig& closure, const LengthScaleField& l0, const Grid& grid) {
    const ScalarField grad = deformation_tensor_magsq(state.vel, grid);
    const ScalarField speed = cell_speed_sq(state.vel, grid);
    Moments m;
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) {
            if (!grid.fluid(i, j)) continue;
            const double k = state.k(i, j);
            const double nu_t = model_eddy_viscosity(closure, l0.l(i, j), k);
            const double l = model_length_scale(closure, l0.l(i, j), k);
            m.grad_sq += grad(i, j);
            m.nu_t_grad += nu_t * grad(i, j);
            m.speed_sq += speed(i, j);
            m.k += k;
            m.sink += dissipation_density(closure, l0.l(i, j), k);
            m.l_sq += l * l;
            m.nu_t += nu_t;
        }
    const double a = grid.cell_area();
    m.grad_sq *= a;
    m.nu_t_grad *= a;
    m.speed_sq *= a;
    m.k *= a;
    m.sink *= a;
    m.l_sq *= a;
    m.nu_t *= a;
    return m;
}

std::optional<double> ratio(double num, double den) {
    if (!(den > 0.0)) return std::nullopt;
    return num / den;
}

}  // namespace

double dissipation_rate(const FlowState& state, const ClosureConfig& closure, const LengthScaleField& l0,
                        const Grid& grid) {
    const Moments m = moments(state, closure, l0, grid);
    return (2.0 * closure.nu * m.grad_sq + m.sink) / grid.fluid_area();
}

std::optional<double> intensity(const FlowState& state, const Grid& grid) {
    return ratio(2.0 * fluid_integral(state.k, grid), fluid_integral(cell_speed_sq(state.vel, grid), grid));
}

std::optional<double> effective_viscosity(const FlowState& state, const ClosureConfig& closure,
                                          const LengthScaleField& l0, const Grid& grid) {
    const Moments m = moments(state, closure, l0, grid);
    return ratio(closure.nu * m.grad_sq + m.nu_t_grad, m.grad_sq);
}

std::optional<double> viscosity_ratio(const FlowState& state, const ClosureConfig& closure,
                                      const LengthScaleField& l0, const Grid& grid) {
    const Moments m = moments(state, closure, l0, grid);
    return ratio(m.nu_t_grad, 2.0 * closure.nu * m.grad_sq);
}

std::optional<double> taylor_microscale(const VectorField& vel, const Grid& grid) {
    const double grad = fluid_integral(deformation_tensor_magsq(vel, grid), grid);
    const double speed = fluid_integral(cell_speed_sq(vel, grid), grid);
    if (!(grad > 0.0) || !(speed > 0.0)) return std::nullopt;
    return std::sqrt(speed / grad);
}

double avg_l(const FlowState& state, const ClosureConfig& closure, const LengthScaleField& l0, const Grid& grid,
             double L) {
    const Moments m = moments(state, closure, l0, grid);
    return std::sqrt(m.l_sq / grid.fluid_area()) / L;
}

double avg_nu_t(const FlowState& state, const ClosureConfig& closure, const LengthScaleField& l0,
                const Grid& grid, double L, double U) {
    const Moments m = moments(state, closure, l0, grid);
    return m.nu_t / grid.fluid_area() / (L * U);
}

StatRecord sample_statistics(const FlowState& state, const ClosureConfig& closure, const LengthScaleField& l0,
                             const Grid& grid) {
    const Moments m = moments(state, closure, l0, grid);
    const double area = grid.fluid_area();
    StatRecord r;
    r.t = state.t;
    r.kinetic_energy = 0.5 * m.speed_sq;
    r.eps_model = (2.0 * closure.nu * m.grad_sq + m.sink) / area;
    r.intensity = ratio(2.0 * m.k, m.speed_sq);
    r.nu_effective = ratio(closure.nu * m.grad_sq + m.nu_t_grad, m.grad_sq);
    r.viscosity_ratio = ratio(m.nu_t_grad, 2.0 * closure.nu * m.grad_sq);
    if (m.grad_sq > 0.0 && m.speed_sq > 0.0) r.taylor_microscale = std::sqrt(m.speed_sq / m.grad_sq);
    r.rms_l = std::sqrt(m.l_sq / area);
    r.mean_nu_t = m.nu_t / area;
    r.mean_production = m.nu_t_grad / area;
    r.mean_velocity_sq = m.speed_sq / area;
    r.k_integral = m.k;
    return r;
}

void normalize(std::vector<StatRecord>& records, const FlowScales& scales) {
    for (StatRecord& r : records) {
        r.avg_l_over_L = scales.L > 0.0 ? std::optional<double>(r.rms_l / scales.L) : std::nullopt;
        r.avg_nuT_over_LU = ratio(r.mean_nu_t, scales.L * scales.U);
    }
}

namespace {

std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format(const std::optional<double>& v) { return v ? format(*v) : std::string(); }

std::optional<double> parse_optional(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}

}  // namespace

void write_stat_csv(const std::string& path, const std::vector<StatRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << kStatCsvHeader << '\n';
    for (const StatRecord& r : records) {
        out << format(r.t) << ',' << format(r.kinetic_energy) << ',' << format(r.eps_model) << ','
            << format(r.intensity) << ',' << format(r.nu_effective) << ',' << format(r.viscosity_ratio) << ','
            << format(r.taylor_microscale) << ',' << format(r.avg_l_over_L) << ',' << format(r.avg_nuT_over_LU)
            << '\n';
    }
}

std::vector<StatRecord> read_stat_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != kStatCsvHeader) throw std::runtime_error("unexpected header in " + path);
    std::vector<StatRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (cells.size() != 9) throw std::runtime_error("malformed row in " + path + ": " + line);
        StatRecord r;
        r.t = std::stod(cells[0]);
        r.kinetic_energy = std::stod(cells[1]);
        r.eps_model = std::stod(cells[2]);
        r.intensity = parse_optional(cells[3]);
        r.nu_effective = parse_optional(cells[4]);
        r.viscosity_ratio = parse_optional(cells[5]);
        r.taylor_microscale = parse_optional(cells[6]);
        r.avg_l_over_L = parse_optional(cells[7]);
        r.avg_nuT_over_LU = parse_optional(cells[8]);
        records.push_back(r);
    }
    return records;
}

double time_average(const std::vector<double>& times, const std::vector<std::optional<double>>& values, double t0,
                    double T) {
    if (times.size() != values.size()) throw std::invalid_argument("time_average: size mismatch");
    if (!(T > t0)) throw std::invalid_argument("time_average: empty window (T <= t0)");
    double integral = 0.0;
    double covered = 0.0;
    for (std::size_t n = 1; n < times.size(); ++n) {
        const double ta = times[n - 1];
        const double tb = times[n];
        if (!values[n - 1] || !values[n] || !(tb > ta)) continue;
        const double a = std::max(ta, t0);
        const double b = std::min(tb, T);
        if (!(b > a)) continue;
        const double ya = *values[n - 1];
        const double slope = (*values[n] - ya) / (tb - ta);
        const double fa = ya + slope * (a - ta);
        const double fb = ya + slope * (b - ta);
        integral += 0.5 * (fa + fb) * (b - a);
        covered += b - a;
    }
    if (!(covered > 0.0)) throw std::invalid_argument("time_average: no samples inside the window");
    return integral / covered;
}

double time_average(const std::vector<double>& times, const std::vector<double>& values, double t0, double T) {
    std::vector<std::optional<double>> wrapped(values.begin(), values.end());
    return time_average(times, wrapped, t0, T);
}

void TimeAverager::add(double t, std::optional<double> value) {
    if (last_t_ && value && last_value_ && t > *last_t_) {
        const double a = std::max(*last_t_, t0_);
        if (t > a) {
            const double slope = (*value - *last_value_) / (t - *last_t_);
            const double fa = *last_value_ + slope * (a - *last_t_);
            integral_ += 0.5 * (fa + *value) * (t - a);
            covered_ += t - a;
        }
    }
    last_t_ = t;
    last_value_ = value;
}

std::optional<double> TimeAverager::value() const {
    if (!(covered_ > 0.0)) return std::nullopt;
    return integral_ / covered_;
}

}  // namespace urans
