/// @file flowsolver.hpp
/// @brief Semi-implicit incremental pressure-correction integrator for the closed momentum/k system.
///
/// One step:
///   1. momentum: (v* - v^n)/dt + C(v^n) v* - div((2 nu + nu_T) grad^s v*) + chi/eta v* = f^{n+1} - grad p^n
///   2. projection: -Lap phi = -div v*/dt, v^{n+1} = v* - dt grad phi, p^{n+1} = p^n + phi
///   3. k-equation with production from v^{n+1} (see closure.hpp)
///
/// C(w) is skew-symmetric, so the convective term neither creates nor destroys discrete energy.
#pragma once

#include "urans/closure.hpp"
#include "urans/grid_fields.hpp"
#include "urans/linear_solvers.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <string>
#include <utility>

namespace urans {

struct FlowState {
    VectorField vel;
    ScalarField p;
    ScalarField k;
    double t = 0.0;
    long step = 0;

    FlowState() = default;
    FlowState(int nx, int ny) : vel(nx, ny), p(nx, ny), k(nx, ny) {}
    bool operator==(const FlowState&) const = default;
};

struct SolverConfig {
    double dt = 0.01;
    double t_end = 10.0;
    double proj_tol = 1e-8;
    double penal_eta = 1e-6;
    bool ramp = true;
    double cfl_max = 0.9;
    double momentum_rel_tol = 1e-10;
    bool momentum_direct = false;  // sparse LU instead of BiCGSTAB
    /// The closure is switched on once t >= model_start; before that nu_T = 0 and k is held.
    double model_start = 0.0;

    void validate() const;
};

using BodyForce = std::function<std::pair<double, double>(double x, double y, double t)>;

/// Counter-clockwise annulus forcing min{t,1} (-4y(1-r^2), 4x(1-r^2)).
std::pair<double, double> body_force_annulus(double x, double y, double t, bool ramp);

/// Force sampled on the faces (u-component on x-faces, v-component on y-faces).
VectorField sample_force(const BodyForce& force, const Grid& grid, double t);

struct Projection {
    VectorField vel;
    ScalarField phi;  // pressure increment
    SolveStats stats;
};

struct StepDiagnostics {
    SolveStats momentum;
    SolveStats pressure;
    KStepDiagnostics k;
    double cfl = 0.0;
    double max_divergence = 0.0;
    /// E^{n+1} - E^n + dt D^{n+1} - dt (f, v^{n+1}) with E = 1/2|v|^2 + int k over the whole box.
    double energy_audit = 0.0;
    double forcing_power = 0.0;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Momentum step as a linear system over the packed unknowns [u; v] (u block first,
/// row-major, i fastest). Fixed wall faces are identity rows with zero right-hand side.
struct MomentumSystem {
    SparseMatrix matrix;
    Eigen::VectorXd rhs;
};

class FlowSolver {
public:
    FlowSolver(const Grid& grid, ClosureConfig closure, SolverConfig config, BodyForce force, LengthScaleField l0);

    const Grid& grid() const { return grid_; }
    const ClosureConfig& closure() const { return closure_; }
    const SolverConfig& config() const { return config_; }
    const LengthScaleField& l0() const { return l0_; }
    const BodyForce& force() const { return force_; }

    MomentumSystem assemble_momentum(const FlowState& state) const;
    /// Intermediate velocity v*.
    VectorField momentum_step(const FlowState& state, StepDiagnostics* diagnostics = nullptr) const;
    /// Projects onto discretely divergence-free fields; max |div| <= proj_tol.
    Projection pressure_project(const VectorField& intermediate) const;
    /// momentum -> projection -> k. Throws SolverError on a CFL violation or failed solve.
    FlowState step(const FlowState& state, StepDiagnostics* diagnostics = nullptr) const;

    /// Face-weighted 1/2 |v|^2 + int k over the whole box (audit energy).
    double audit_energy(const FlowState& state) const;
    /// int 2 nu |grad^s v|^2 + k-sink over the whole box (Brinkman drag is left out, so the
    /// audit of a penalized run is an inequality).
    double audit_dissipation(const FlowState& state, bool with_sink = true) const;
    /// Whether the step starting at time t uses the closure.
    bool closure_active(double t) const;

private:
    const Grid& grid_;
    ClosureConfig closure_;
    SolverConfig config_;
    BodyForce force_;
    LengthScaleField l0_;
    PoissonMultigrid poisson_;
};

/// Binary checkpoint: 64-byte little-endian header followed by u, v, p, k as float64.
///
///   offset  size  field
///        0     8  magic "URANSCK1"
///        8     4  uint32 version (= 1)
///       12     4  uint32 nx
///       16     4  uint32 ny
///       20     4  uint32 field count (= 4)
///       24     8  float64 t
///       32     8  int64 step
///       40    24  zero padding
///       64     -  u[nx*ny], v[nx*ny], p[nx*ny], k[nx*ny], row-major, i fastest
void write_checkpoint(const std::string& path, const FlowState& state);
FlowState read_checkpoint(const std::string& path);

}  // namespace urans
