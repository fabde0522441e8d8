#include "urans/closure.hpp"

#include <Eigen/SparseCholesky>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace urans {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kInf = std::numeric_limits<double>::infinity();

double harmonic(double a, double b) { return (a + b) > 0.0 ? 2.0 * a * b / (a + b) : 0.0; }
}  // namespace

std::string to_string(LengthScaleMode mode) {
    switch (mode) {
        case LengthScaleMode::None: return "none";
        case LengthScaleMode::Static: return "static";
        case LengthScaleMode::Kinematic: return "kinematic";
        case LengthScaleMode::Geometric: return "geometric";
    }
    return "unknown";
}

LengthScaleMode length_scale_mode_from_string(const std::string& name) {
    if (name == "none") return LengthScaleMode::None;
    if (name == "static") return LengthScaleMode::Static;
    if (name == "kinematic") return LengthScaleMode::Kinematic;
    if (name == "geometric") return LengthScaleMode::Geometric;
    throw ConfigError("unknown length-scale mode '" + name + "'");
}

void ClosureConfig::validate() const {
    if (!(mu > 0.0)) throw ConfigError("closure: mu must be positive");
    if (!(nu >= 0.0)) throw ConfigError("closure: nu must be non-negative");
    if (!(tau >= 0.0)) throw ConfigError("closure: tau must be non-negative");
    if (mode == LengthScaleMode::Geometric && !(tau > 0.0)) throw ConfigError("closure: geometric mode needs tau > 0");
    if (mode == LengthScaleMode::Geometric && !(theta >= 0.0 && theta <= 2.0))
        throw ConfigError("closure: theta must lie in [0, 2]");
    if (!(k_floor >= 0.0)) throw ConfigError("closure: k_floor must be non-negative");
}

double static_length_scale(double wall_distance, double re) {
    return std::min(kKarman * wall_distance, kStaticCapFactor / std::sqrt(re));
}

LengthScaleField static_length_scale(const Grid& grid, double re) {
    if (!(re > 0.0)) throw ConfigError("static length scale needs Re > 0");
    LengthScaleField out{Array2D(grid.nx(), grid.ny())};
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) out.l(i, j) = static_length_scale(grid.wall_distance()(i, j), re);
    return out;
}

LengthScaleField kinematic_length_scale(const ScalarField& k, double tau) {
    LengthScaleField out{Array2D(k.nx(), k.ny())};
    for (std::size_t n = 0; n < k.size(); ++n) {
        const double kv = k.raw()[n];
        if (kv < 0.0) throw std::invalid_argument("kinematic_length_scale: negative k (clamp before use)");
        out.l.raw()[n] = kSqrt2 * std::sqrt(kv) * tau;
    }
    return out;
}

double geometric_length_scale(double l0, double lk, double theta) {
    if (theta > 0.0 && l0 == 0.0) return 0.0;
    return std::pow(l0, theta) * std::pow(lk, 1.0 - theta);
}

LengthScaleField geometric_length_scale(const LengthScaleField& l0, const LengthScaleField& lk, double theta) {
    LengthScaleField out{Array2D(l0.l.nx(), l0.l.ny())};
    for (std::size_t n = 0; n < l0.l.size(); ++n)
        out.l.raw()[n] = geometric_length_scale(l0.l.raw()[n], lk.l.raw()[n], theta);
    return out;
}

ScalarField eddy_viscosity(const LengthScaleField& l, const ScalarField& k, double mu) {
    ScalarField out(k.nx(), k.ny());
    for (std::size_t n = 0; n < k.size(); ++n) out.raw()[n] = mu * l.l.raw()[n] * std::sqrt(std::max(k.raw()[n], 0.0));
    return out;
}

ScalarField initial_k_from_l0(const LengthScaleField& l0, double tau) {
    if (!(tau > 0.0)) throw ConfigError("initial_k_from_l0 needs tau > 0");
    ScalarField out(l0.l.nx(), l0.l.ny());
    for (std::size_t n = 0; n < out.size(); ++n) {
        const double l = l0.l.raw()[n];
        out.raw()[n] = l * l / (2.0 * tau * tau);
    }
    return out;
}

double duct_intensity(double re) { return 0.16 * std::pow(re, -1.0 / 8.0); }

ScalarField initial_k_duct(const VectorField& vel0, const Grid& grid, double re) {
    if (!(re > 0.0)) throw ConfigError("initial_k_duct needs Re > 0");
    const double intensity = duct_intensity(re);
    Array2D uc, vc;
    cell_velocity(vel0, grid, uc, vc);
    ScalarField out(grid.nx(), grid.ny());
    for (std::size_t n = 0; n < out.size(); ++n) {
        const double speed2 = uc.raw()[n] * uc.raw()[n] + vc.raw()[n] * vc.raw()[n];
        out.raw()[n] = 1.5 * speed2 * intensity * intensity;
    }
    return out;
}

double model_length_scale(const ClosureConfig& closure, double l0, double k) {
    const double kp = std::max(k, 0.0);
    switch (closure.mode) {
        case LengthScaleMode::None: return 0.0;
        case LengthScaleMode::Static: return l0;
        case LengthScaleMode::Kinematic: return kSqrt2 * std::sqrt(kp) * closure.tau;
        case LengthScaleMode::Geometric:
            return geometric_length_scale(l0, kSqrt2 * std::sqrt(kp) * closure.tau, closure.theta);
    }
    return 0.0;
}

LengthScaleField model_length_scale(const ClosureConfig& closure, const LengthScaleField& l0, const ScalarField& k,
                                    const Grid& grid) {
    LengthScaleField out{Array2D(grid.nx(), grid.ny())};
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i)
            out.l(i, j) = grid.solid(i, j) ? 0.0 : model_length_scale(closure, l0.l(i, j), k(i, j));
    return out;
}

double model_eddy_viscosity(const ClosureConfig& closure, double l0, double k) {
    const double kp = std::max(k, 0.0);
    switch (closure.mode) {
        case LengthScaleMode::None: return 0.0;
        case LengthScaleMode::Static: return closure.mu * l0 * std::sqrt(kp);
        case LengthScaleMode::Kinematic: return kSqrt2 * closure.mu * kp * closure.tau;
        case LengthScaleMode::Geometric: {
            const double theta = closure.theta;
            if (theta > 0.0 && l0 == 0.0) return 0.0;
            return closure.mu * std::pow(l0, theta) * std::pow(kSqrt2 * closure.tau, 1.0 - theta) *
                   std::pow(kp, 1.0 - 0.5 * theta);
        }
    }
    return 0.0;
}

ScalarField model_eddy_viscosity(const ClosureConfig& closure, const LengthScaleField& l0, const ScalarField& k,
                                 const Grid& grid) {
    ScalarField out(grid.nx(), grid.ny());
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i)
            out(i, j) = grid.solid(i, j) ? 0.0 : model_eddy_viscosity(closure, l0.l(i, j), k(i, j));
    return out;
}

double relaxation_rate(const ClosureConfig& closure, double l0, double k) {
    const double kp = std::max(k, 0.0);
    switch (closure.mode) {
        case LengthScaleMode::None: return 0.0;
        case LengthScaleMode::Kinematic: return closure.tau > 0.0 ? 1.0 / (kSqrt2 * closure.tau) : kInf;
        case LengthScaleMode::Static: return l0 > 0.0 ? std::sqrt(kp) / l0 : kInf;
        case LengthScaleMode::Geometric:
            return l0 > 0.0 ? std::pow(kp, 0.5 * closure.theta) * std::pow(kSqrt2 * closure.tau, closure.theta - 1.0) /
                                  std::pow(l0, closure.theta)
                            : kInf;
    }
    return 0.0;
}

double dissipation_density(const ClosureConfig& closure, double l0, double k) {
    const double kp = std::max(k, 0.0);
    if (kp == 0.0) return 0.0;
    return relaxation_rate(closure, l0, kp) * kp;
}

ScalarField k_step(const ScalarField& k, const VectorField& vel_adv, const VectorField& vel_prod,
                   const ClosureConfig& closure, const LengthScaleField& l0, const Grid& grid, double dt,
                   KStepDiagnostics* diagnostics) {
    KStepDiagnostics diag;
    const int nx = grid.nx();
    const int ny = grid.ny();
    if (closure.mode == LengthScaleMode::None) {
        if (diagnostics) *diagnostics = diag;
        return k;
    }
    if (closure.mode == LengthScaleMode::Kinematic && closure.tau == 0.0) {
        if (diagnostics) *diagnostics = diag;
        return ScalarField(nx, ny);
    }

    const ScalarField nu_t = model_eddy_viscosity(closure, l0, k, grid);
    const ScalarField magsq = deformation_tensor_magsq(vel_prod, grid);

    // explicit upwind advection, sub-cycled so each sub-step is a convex combination
    ScalarField k_adv = k;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            if (grid.solid(i, j)) k_adv(i, j) = 0.0;
    const double dt_stable = upwind_stable_dt(vel_adv, grid);
    const int substeps = std::isfinite(dt_stable) ? std::max(1, static_cast<int>(std::ceil(dt / (0.9 * dt_stable)))) : 1;
    const double dts = dt / substeps;
    for (int s = 0; s < substeps; ++s) {
        const ScalarField tendency = advect(vel_adv, k_adv, grid);
        for (std::size_t n = 0; n < k_adv.size(); ++n) k_adv.raw()[n] += dts * tendency.raw()[n];
    }
    diag.advection_substeps = substeps;

    // implicit diffusion + sink
    std::vector<std::uint8_t> fixed(k.size(), 0);
    Array2D rate(nx, ny);
    Array2D diffusivity(nx, ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const std::size_t c = grid.index(i, j);
            rate(i, j) = relaxation_rate(closure, l0.l(i, j), k(i, j));
            fixed[c] = (grid.solid(i, j) || !std::isfinite(rate(i, j))) ? 1 : 0;
            diffusivity(i, j) = closure.nu + nu_t(i, j);
        }
    }
    // face coefficients: ax(i,j) couples (i-1,j)-(i,j); ay(i,j) couples (i,j-1)-(i,j)
    Array2D ax(nx + 1, ny), ay(nx, ny + 1);
    const double idx2 = 1.0 / (grid.dx() * grid.dx());
    const double idy2 = 1.0 / (grid.dy() * grid.dy());
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            if (grid.periodic_x()) {
                ax(i, j) = harmonic(diffusivity(grid.wrap_x(i - 1), j), diffusivity(grid.wrap_x(i), j)) * idx2;
            } else if (i == 0 || i == nx) {
                ax(i, j) = 2.0 * closure.nu * idx2;  // Dirichlet k = 0 on the wall face
            } else {
                ax(i, j) = harmonic(diffusivity(i - 1, j), diffusivity(i, j)) * idx2;
            }
        }
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i < nx; ++i) {
            if (grid.periodic_y()) {
                ay(i, j) = harmonic(diffusivity(i, grid.wrap_y(j - 1)), diffusivity(i, grid.wrap_y(j))) * idy2;
            } else if (j == 0 || j == ny) {
                ay(i, j) = 2.0 * closure.nu * idy2;
            } else {
                ay(i, j) = harmonic(diffusivity(i, j - 1), diffusivity(i, j)) * idy2;
            }
        }

    std::vector<double> diagonal(k.size(), 1.0), rhs(k.size(), 0.0), solution(k.size(), 0.0);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const std::size_t c = grid.index(i, j);
            if (fixed[c]) continue;
            diagonal[c] = 1.0 / dt + rate(i, j) + ax(i, j) + ax(i + 1, j) + ay(i, j) + ay(i, j + 1);
            rhs[c] = k_adv(i, j) / dt + nu_t(i, j) * magsq(i, j);
        }
    }
    const bool px = grid.periodic_x();
    const bool py = grid.periodic_y();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(5 * k.size());
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const auto c = static_cast<int>(grid.index(i, j));
            triplets.emplace_back(c, c, diagonal[c]);
            if (fixed[c]) continue;
            auto couple = [&](bool exists, int ii, int jj, double coef) {
                if (!exists) return;
                const auto n = static_cast<int>(grid.index(grid.wrap_x(ii), grid.wrap_y(jj)));
                if (!fixed[n]) triplets.emplace_back(c, n, -coef);
            };
            couple(px || i > 0, i - 1, j, ax(i, j));
            couple(px || i < nx - 1, i + 1, j, ax(i + 1, j));
            couple(py || j > 0, i, j - 1, ay(i, j));
            couple(py || j < ny - 1, i, j + 1, ay(i, j + 1));
        }
    }
    Eigen::SparseMatrix<double> matrix(static_cast<Eigen::Index>(k.size()), static_cast<Eigen::Index>(k.size()));
    matrix.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor(matrix);
    if (factor.info() != Eigen::Success) throw SolverError("k-equation factorization failed", SolveStats{});
    const Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
    Eigen::Map<Eigen::VectorXd> x(solution.data(), static_cast<Eigen::Index>(solution.size()));
    x = factor.solve(b);
    const Eigen::VectorXd residual = b - matrix * x;
    diag.solve.iterations = 1;
    diag.solve.residual_l2 = residual.norm();
    diag.solve.residual_inf = residual.lpNorm<Eigen::Infinity>();
    diag.solve.converged = factor.info() == Eigen::Success && std::isfinite(diag.solve.residual_l2);
    if (!diag.solve.converged) throw SolverError("k-equation diffusion solve failed", diag.solve);

    ScalarField out(nx, ny);
    double min_value = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < solution.size(); ++c) {
        if (fixed[c]) continue;
        min_value = std::min(min_value, solution[c]);
        if (solution[c] < closure.k_floor) {
            diag.clamped_mass += (closure.k_floor - solution[c]) * grid.cell_area();
            solution[c] = closure.k_floor;
        }
        out.raw()[c] = solution[c];
    }
    diag.min_before_clamp = std::isfinite(min_value) ? min_value : 0.0;
    if (diagnostics) *diagnostics = diag;
    return out;
}

double decay_ode_oracle(double k0, const ClosureConfig& closure, double l0, double t) {
    if (k0 < 0.0) throw std::invalid_argument("decay_ode_oracle: k0 must be non-negative");
    if (k0 == 0.0 || t <= 0.0 || closure.mode == LengthScaleMode::None) return k0;
    if (!std::isfinite(relaxation_rate(closure, l0, k0))) return 0.0;
    namespace odeint = boost::numeric::odeint;
    using Stepper = odeint::runge_kutta_dopri5<double, double, double, double, odeint::vector_space_algebra>;
    // integrate log k so the tolerance is relative to k over many decades
    double log_k = std::log(k0);
    auto rhs = [&](const double& y, double& dydt, double) { dydt = -relaxation_rate(closure, l0, std::exp(y)); };
    odeint::integrate_adaptive(odeint::make_controlled(1e-10, 1e-10, Stepper()), rhs, log_k, 0.0, t, t * 1e-6);
    return std::exp(log_k);
}

}  // namespace urans
