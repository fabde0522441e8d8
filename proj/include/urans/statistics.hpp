/// @file statistics.hpp
/// @brief Flow statistics, force/velocity scales and long-time averages.
///
/// All spatial integrals run over fluid cells only; ⟨·⟩_Ω denotes the fluid-area mean.
/// Ratios whose denominator vanishes are reported as missing (std::nullopt), never as 0.
#pragma once

#include "urans/closure.hpp"
#include "urans/flowsolver.hpp"
#include "urans/grid_fields.hpp"

#include <optional>
#include <string>
#include <vector>

namespace urans {

/// Cell-centered |v|^2 as the mean of the squared face values on either side.
ScalarField cell_speed_sq(const VectorField& vel, const Grid& grid);

/// Integral over fluid cells.
double fluid_integral(const ScalarField& field, const Grid& grid);
/// Fluid-area mean ⟨field⟩_Ω.
double fluid_mean(const ScalarField& field, const Grid& grid);

/// Force-only part of the scales.
struct ForceScales {
    double F = 0.0;           // (⟨|f|^2⟩_Ω)^{1/2}
    double grad_sup = 0.0;    // sup |grad^s f|
    double grad_rms = 0.0;    // (⟨|grad^s f|^2⟩_Ω)^{1/2}
    double L_domain = 0.0;
    double L = 0.0;
};

/// Throws std::domain_error for a vanishing force (scales undefined).
ForceScales force_scales(const VectorField& force, const Grid& grid);

struct FlowScales {
    double F = 0.0;
    double L = 0.0;
    double U = 0.0;
    double Re = 0.0;     // L U / nu
    double Tstar = 0.0;  // L / U
};

/// `mean_velocity_sq` is the time average of ⟨|v|^2⟩_Ω over the harvesting window.
FlowScales compute_scales(const VectorField& force, double mean_velocity_sq, const Grid& grid, double nu);
FlowScales compute_scales(const ForceScales& force, double mean_velocity_sq, double nu);

// -- pointwise-in-time statistics -------------------------------------------

/// 1/2 ∫|v|^2 over the fluid.
double kinetic_energy(const VectorField& vel, const Grid& grid);

/// (1/|Ω|) ∫ 2 nu |grad^s v|^2 + k^{3/2}/l.
double dissipation_rate(const FlowState& state, const ClosureConfig& closure, const LengthScaleField& l0,
                        const Grid& grid);

/// 2 ∫k / ∫|v|^2.
std::optional<double> intensity(const FlowState& state, const Grid& grid);

/// ∫(nu + nu_T)|grad^s v|^2 / ∫|grad^s v|^2.
std::optional<double> effective_viscosity(const FlowState& state, const ClosureConfig& closure,
                                          const LengthScaleField& l0, const Grid& grid);

/// ∫nu_T |grad^s v|^2 / ∫2 nu |grad^s v|^2.
std::optional<double> viscosity_ratio(const FlowState& state, const ClosureConfig& closure,
                                      const LengthScaleField& l0, const Grid& grid);

/// (∫|grad^s v|^2 / ∫|v|^2)^{-1/2}.
std::optional<double> taylor_microscale(const VectorField& vel, const Grid& grid);

/// (⟨l^2⟩_Ω)^{1/2} / L.
double avg_l(const FlowState& state, const ClosureConfig& closure, const LengthScaleField& l0, const Grid& grid,
             double L);

/// ⟨nu_T⟩_Ω / (L U).
double avg_nu_t(const FlowState& state, const ClosureConfig& closure, const LengthScaleField& l0,
                const Grid& grid, double L, double U);

/// One sample of every statistic. The scale-normalized entries stay empty until
/// normalize() is called with the run's scales.
struct StatRecord {
    double t = 0.0;
    double kinetic_energy = 0.0;
    double eps_model = 0.0;
    std::optional<double> intensity;
    std::optional<double> nu_effective;
    std::optional<double> viscosity_ratio;
    std::optional<double> taylor_microscale;
    std::optional<double> avg_l_over_L;
    std::optional<double> avg_nuT_over_LU;

    double rms_l = 0.0;             // (⟨l^2⟩_Ω)^{1/2}
    double mean_nu_t = 0.0;         // ⟨nu_T⟩_Ω
    double mean_production = 0.0;   // ⟨nu_T |grad^s v|^2⟩_Ω
    double mean_velocity_sq = 0.0;  // ⟨|v|^2⟩_Ω
    double k_integral = 0.0;        // ∫k
};

StatRecord sample_statistics(const FlowState& state, const ClosureConfig& closure, const LengthScaleField& l0,
                             const Grid& grid);

/// Fills avg_l_over_L and avg_nuT_over_LU from the raw means.
void normalize(std::vector<StatRecord>& records, const FlowScales& scales);

/// Exact CSV header of the time-series file.
inline constexpr const char* kStatCsvHeader = "t,energy,eps_model,intensity,nu_eff,vr,taylor,avg_l_over_L,avg_nuT_over_LU";

void write_stat_csv(const std::string& path, const std::vector<StatRecord>& records);
std::vector<StatRecord> read_stat_csv(const std::string& path);

// -- time averaging ---------------------------------------------------------

/// Trapezoidal (1/(T - t0)) ∫_{t0}^{T} φ dt over a sampled series, with linear
/// interpolation at the window ends. Segments touching a missing sample are skipped
/// and the average is taken over the covered time. Throws std::invalid_argument for
/// T <= t0 or a window with no covered time.
double time_average(const std::vector<double>& times, const std::vector<std::optional<double>>& values, double t0,
                    double T);
double time_average(const std::vector<double>& times, const std::vector<double>& values, double t0, double T);

/// Online version of time_average with an open right end.
class TimeAverager {
public:
    explicit TimeAverager(double t0 = 0.0) : t0_(t0) {}

    void add(double t, std::optional<double> value);
    double t0() const { return t0_; }
    double covered() const { return covered_; }
    /// Empty until some time after t0 has been covered.
    std::optional<double> value() const;

private:
    double t0_;
    double integral_ = 0.0;
    double covered_ = 0.0;
    std::optional<double> last_t_;
    std::optional<double> last_value_;
};

}  // namespace urans
