/// @file closure.hpp
/// @brief One-equation closure: turbulence length scales, eddy viscosity and the k-equation step.
///
/// Three length-scale choices share one k-equation
///
///   k_t + v.grad k - div((nu + nu_T) grad k) + k^{3/2} / l = nu_T |grad^s v|^2,   nu_T = mu l sqrt(k)
///
///   Static     l = l0(x) = min(0.41 y, 0.082 Re^{-1/2})
///   Kinematic  l = sqrt(2) k^{1/2} tau       (sink becomes linear: k / (sqrt(2) tau))
///   Geometric  l = l0^theta l_K^{1-theta}
///
/// `None` switches the closure off entirely (nu_T == 0, k untouched), which is the
/// Navier-Stokes reference used for the tau -> 0 comparison.
#pragma once

#include "urans/grid_fields.hpp"
#include "urans/linear_solvers.hpp"

#include <string>

namespace urans {

enum class LengthScaleMode { None, Static, Kinematic, Geometric };

std::string to_string(LengthScaleMode mode);
LengthScaleMode length_scale_mode_from_string(const std::string& name);

struct ClosureConfig {
    double mu = 0.55;
    double tau = 1.0;
    LengthScaleMode mode = LengthScaleMode::Kinematic;
    double theta = 2.0 / 1.3;
    double nu = 1e-4;
    double k_floor = 0.0;

    /// Throws ConfigError unless mu > 0, nu >= 0, tau >= 0 (tau > 0 for Geometric),
    /// theta in [0, 2] and k_floor >= 0. tau == 0 in Kinematic mode is the exact NSE limit.
    void validate() const;
};

/// Cell-centered turbulence length scale.
struct LengthScaleField {
    Array2D l;
};

/// Karman slope and cap factor of the static mixing length.
inline constexpr double kKarman = 0.41;
inline constexpr double kStaticCapFactor = 0.082;

/// l0 = min(0.41 y, 0.082 Re^{-1/2}); cap only on grids without walls.
double static_length_scale(double wall_distance, double re);
LengthScaleField static_length_scale(const Grid& grid, double re);

/// l = sqrt(2) k^{1/2} tau. Negative k is a contract violation (std::invalid_argument).
LengthScaleField kinematic_length_scale(const ScalarField& k, double tau);

/// l0^theta lk^{1-theta}; l0 == 0 gives 0 for theta > 0.
double geometric_length_scale(double l0, double lk, double theta);
LengthScaleField geometric_length_scale(const LengthScaleField& l0, const LengthScaleField& lk, double theta);

/// Prandtl-Kolmogorov nu_T = mu l sqrt(k).
ScalarField eddy_viscosity(const LengthScaleField& l, const ScalarField& k, double mu);

/// k(x,0) = l0^2 / (2 tau^2), so that the kinematic length scale starts at l0.
ScalarField initial_k_from_l0(const LengthScaleField& l0, double tau);

/// Square-duct initializer k = 1.5 |u0|^2 I^2 with I = 0.16 Re^{-1/8}; velocities are
/// averaged to cell centers.
double duct_intensity(double re);
ScalarField initial_k_duct(const VectorField& vel0, const Grid& grid, double re);

// -- model-dependent pointwise closures ------------------------------------

/// Length scale actually used by the configured mode.
double model_length_scale(const ClosureConfig& closure, double l0, double k);
LengthScaleField model_length_scale(const ClosureConfig& closure, const LengthScaleField& l0, const ScalarField& k,
                                    const Grid& grid);

/// nu_T for the configured mode, evaluated in closed form (no 0 * inf for Geometric).
double model_eddy_viscosity(const ClosureConfig& closure, double l0, double k);
ScalarField model_eddy_viscosity(const ClosureConfig& closure, const LengthScaleField& l0, const ScalarField& k,
                                 const Grid& grid);

/// Rate r with sink = r k, i.e. r = sqrt(k) / l. +inf where the length scale vanishes
/// (Static / Geometric with l0 = 0, Kinematic with tau = 0).
double relaxation_rate(const ClosureConfig& closure, double l0, double k);

/// The sink k^{3/2} / l itself; finite everywhere (0 where k = 0).
double dissipation_density(const ClosureConfig& closure, double l0, double k);

struct KStepDiagnostics {
    SolveStats solve;
    int advection_substeps = 0;
    double clamped_mass = 0.0;       // mass added by the floor clamp
    double min_before_clamp = 0.0;
};

/// One step of the k-equation:
///   explicit upwind advection by `vel_adv` (sub-cycled to stay monotone),
///   implicit diffusion with nu + nu_T(k_old),
///   implicit sink r(k_old) k_new (linear for Kinematic, lagged sqrt(k) otherwise),
///   explicit production nu_T(k_old) |grad^s vel_prod|^2.
/// Solid cells and cells with a vanishing length scale hold k = 0; no-slip walls are
/// homogeneous Dirichlet. Throws SolverError if the diffusion solve fails.
ScalarField k_step(const ScalarField& k, const VectorField& vel_adv, const VectorField& vel_prod,
                   const ClosureConfig& closure, const LengthScaleField& l0, const Grid& grid, double dt,
                   KStepDiagnostics* diagnostics = nullptr);

/// High-accuracy solution of the zero-velocity k-equation k' = -k^{3/2} / l(k)
/// with l0 held constant (adaptive Dormand-Prince, tolerance 1e-10).
double decay_ode_oracle(double k0, const ClosureConfig& closure, double l0, double t);

}  // namespace urans
