/// @file verification.hpp
/// @brief Numerical checks of the model's structural properties on simulated runs.
///
/// Every check returns a ConditionReport instead of throwing when the property fails;
/// exceptions are reserved for unusable input (missing scales, wrong closure mode).
#pragma once

#include "urans/runner.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace urans {

struct ConditionReport {
    std::string condition;  // "1", "3", "4", "Lemma1", "KEnergy", "Decay", ...
    bool pass = false;
    nlohmann::json measured = nlohmann::json::object();
    nlohmann::json bound = nlohmann::json::object();
    double tolerance = 0.0;
    nlohmann::json config = nlohmann::json::object();  // tau, mu, grid, dt, T
    std::string note;
};

nlohmann::json to_json(const ConditionReport& report);

/// Least-squares slope of y against x.
double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Copy of a run restricted to t <= t_end, with the scales recomputed over the shorter
/// window. Equal to a run configured with that t_end (the time stepping is deterministic).
RunRecord truncate_run(const RunRecord& record, double t_end);

/// k >= 0 at every step and total clamped mass < clamp_tol * ∫k.
ConditionReport check_positivity(const RunRecord& record, double clamp_tol = 1e-12);

/// Post-projection max |div v| <= proj_tol at every step.
ConditionReport check_divergence(const RunRecord& record);

/// Bounded audit energy E = 1/2|v|^2 + ∫k: the supremum is attained before 0.9 T or the
/// relative late slope (last 10% of the run, per unit time) is <= slope_tol, and
/// E(t) <= exp(-alpha t / 2) E(0) + C holds at every step with alpha = min_{t >= t0} D/E
/// and C = 2 max(f, v) / alpha, D being the dissipation recovered from the step audit.
ConditionReport check_condition3(const RunRecord& record, double slope_tol = 1e-3);

/// Time-averaged eps_model over [t0, T] against 4 (1 + 1/Re) U^3 / L within `tol`. The
/// hypothesis tau / T* <= mu^{-1/2} is reported in measured["in_hypothesis"].
ConditionReport check_condition4(const RunRecord& record, const FlowScales& scales, const ClosureConfig& closure,
                                 double t0, double tol = 0.05);

/// Production/relaxation balance <nu_T> = 2 mu tau^2 <nu_T |grad^s v|^2> over [t0, t_short]
/// and [t0, T]: the relative discrepancy must be <= tol at t_short and strictly smaller at T
/// (or already below 1e-12).
/// Throws ConfigError unless the closure is Kinematic.
ConditionReport check_lemma1(const RunRecord& record, const ClosureConfig& closure, double t0, double t_short,
                             double tol = 0.1);

/// Runs the base scenario once with the closure off and once per tau (Kinematic). The gap is
/// the max over samples of the fluid RMS velocity difference to the reference; it must
/// decrease strictly along `taus` (given in decreasing order) and end below gap_tol * U.
/// Also checks that nu_T at frozen k increases with tau.
ConditionReport check_condition1(const ScenarioConfig& base, const std::vector<double>& taus,
                                 double gap_tol = 1e-3);

/// First-order behaviour of the discrete k budget: max |k_residual| of the coarse run over
/// that of a run with dt/2 must be 2 within `tol` (relative).
ConditionReport check_k_energy_equality(const RunRecord& coarse, const RunRecord& fine, double tol = 0.2);
ConditionReport check_k_energy_equality(const ScenarioConfig& base, double tol = 0.2);

/// Zero-velocity decay of a uniform k on the decay_ode scenario for Kinematic (log-linear
/// slope -1/(sqrt2 tau), 1%), Static (log-log slope -2, 2%) and Geometric with theta = 2/1.3
/// (log-log slope -1.3, 2%). Slopes are fitted over the second half of the run.
ConditionReport check_decay_exponents(const ScenarioConfig& base);

/// Static versus Kinematic trends on paired runs: the time-averaged <nu_T>/(LU) of the
/// Kinematic run at `reference_tau` is below the Static one; its nu_effective decays to 1.5 nu
/// first (first sample t >= t0 with nu_effective <= 1.5 nu); avg l/L increases with tau at
/// every sample t >= t0; and the largest tau sits closer to the Static curve than the smallest.
/// Samples at or before model_start are skipped: there every run has l = l0 and nu_T = 0.
ConditionReport check_trends(const RunRecord& static_run, const std::vector<RunRecord>& kinematic_runs,
                             const std::vector<double>& taus, double reference_tau, double t0);

/// Manufactured solution v = a(t) (sin x cos y, -cos x sin y), p = -a^2 (cos 2x + cos 2y)/4
/// on the periodic box [0, 2pi]^2 with the closure off and forcing f = (a' + 2 nu a) v / a.
struct MmsResult {
    std::vector<double> h;      // grid spacing or time step per level
    std::vector<double> error;  // RMS face error (spatial) or successive-level difference (temporal)
    std::vector<double> order;
};

/// Steady a = 1 on N = 16, 32, 64 (t_end chosen so that the start-up transient has decayed).
MmsResult mms_spatial(const std::vector<int>& levels = {16, 32, 64}, double nu = 0.5);
/// a(t) = 1 + sin(2t)/2 on a 32^2 grid; self-convergence over four time-step levels.
MmsResult mms_temporal(const std::vector<double>& dts = {0.04, 0.02, 0.01, 0.005}, double nu = 0.5,
                       double t_end = 0.4);

ConditionReport check_mms(double spatial_order = 1.9, double temporal_order = 0.9);

/// Runs the checks selected in config.verify["checks"] and writes verification_report.json
/// into the run's output directory (returned through `report_path`).
std::vector<ConditionReport> run_verification(const ScenarioConfig& config, std::string* report_path = nullptr);

}  // namespace urans
