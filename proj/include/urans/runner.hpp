/// @file runner.hpp
/// @brief Scenario configuration, end-to-end runs, comparisons and parameter sweeps.
///
/// A run is described by one JSON document whose keys carry their units, e.g.
///
///   {
///     "scenario": "annulus2d",
///     "grid": {"nx": 64, "ny": 64},
///     "closure": {"mode": "kinematic", "mu": 0.55, "tau_s": 1.0, "nu_m2s": 1e-4},
///     "solver": {"dt_s": 0.01, "t_end_s": 10.0, "model_start_s": 1.0},
///     "statistics": {"t0_s": 1.0, "sample_every": 10},
///     "output": {"dir": "annulus", "checkpoint_times_s": [5.0]}
///   }
///
/// Missing keys take the defaults of ScenarioConfig. Output directories are resolved
/// against $URANS_OUTPUT_ROOT (default "runs").
#pragma once

#include "urans/closure.hpp"
#include "urans/flowsolver.hpp"
#include "urans/grid_fields.hpp"
#include "urans/statistics.hpp"

#include <json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace urans {

enum class ScenarioKind { Annulus2d, PeriodicBox, Channel, DecayOde };

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& name);

enum class InitialK { FromL0, Uniform, Duct };

struct ScenarioConfig {
    ScenarioKind scenario = ScenarioKind::Annulus2d;
    int nx = 64;
    int ny = 64;
    ClosureConfig closure;
    SolverConfig solver;

    double reynolds_l0 = 1e4;  // Re in the static length-scale cap
    double force_scale = 1.0;

    InitialK initial_k = InitialK::FromL0;
    std::optional<double> initial_k_tau;  // tau used by FromL0 (default: closure tau)
    double k0 = 0.0;                      // Uniform, and the decay_ode scenario
    double decay_l0 = 1.0;                // decay_ode: uniform l0

    double t0 = 1.0;  // start of the harvesting window
    int sample_every = 10;

    std::string output_dir;  // relative to the output root; empty: "<scenario>-<hash>"
    std::vector<double> checkpoint_times;
    std::vector<double> snapshot_times;
    std::string restart_from;

    std::string sweep_param;
    std::vector<double> sweep_values;

    nlohmann::json verify = nlohmann::json::object();

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

ScenarioConfig parse_config(const nlohmann::json& doc);
ScenarioConfig load_config(const std::string& path);
/// Canonical, fully populated document (key order irrelevant: objects are sorted).
nlohmann::json to_json(const ScenarioConfig& config);
/// FNV-1a 64 of the canonical document, as 16 hex digits.
std::string config_hash(const ScenarioConfig& config);

/// Applies `param = value` (tau, mu, theta, nu, dt, force_scale, k0).
void set_parameter(ScenarioConfig& config, const std::string& param, double value);

/// Geometry, forcing, static length scale and initial state of a scenario.
struct Scenario {
    std::shared_ptr<const Grid> grid;
    BodyForce force;
    LengthScaleField l0;
    FlowState initial;
    std::string geometry_note;
};

Scenario build_scenario(const ScenarioConfig& config);

/// Per-step solver diagnostics.
struct StepRecord {
    double t = 0.0;
    double audit_energy = 0.0;
    double energy_audit = 0.0;  // see StepDiagnostics::energy_audit
    double max_divergence = 0.0;
    double clamped_mass = 0.0;
    double min_k = 0.0;
    double k_integral = 0.0;
    /// (∫k^{n+1} - ∫k^n - clamped)/dt + ∫k^n-sink - ∫nu_T^n |grad^s v^n|^2 over the box;
    /// empty while the closure is off.
    std::optional<double> k_residual;
    double forcing_power = 0.0;
    double cfl = 0.0;
    int momentum_iterations = 0;
    int pressure_iterations = 0;
};

struct RunRecord {
    ScenarioConfig config;
    std::string geometry_note;
    std::vector<StatRecord> stats;
    std::vector<StepRecord> steps;
    double initial_audit_energy = 0.0;
    std::optional<ForceScales> force;  // empty for unforced scenarios
    std::optional<FlowScales> scales;
    FlowState final_state;
    bool failed = false;
    long failure_step = -1;
    std::string error;
    double wall_seconds = 0.0;
};

/// Called with the initial state and after every step.
using StepObserver = std::function<void(const FlowState&)>;

/// Runs the scenario from its initial state (or from `start`) to t_end. Solver
/// failures are recorded in the result rather than thrown.
RunRecord simulate(const ScenarioConfig& config, const StepObserver& observer = {}, const FlowState* start = nullptr);

struct RunManifest {
    std::string config_hash;
    std::string output_dir;
    std::string start_time;  // ISO-8601 UTC
    std::string end_time;
    double wall_seconds = 0.0;
    std::vector<std::string> files;  // relative to output_dir
    nlohmann::json diagnostics;
    nlohmann::json scales;
    nlohmann::json config;
    std::string geometry_note;
    std::string status = "ok";
    long failure_step = -1;
    std::string error;
};

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& doc);

/// $URANS_OUTPUT_ROOT or "runs".
std::string output_root();

/// End-to-end run: simulate, then write stats.csv, steps.csv, snapshots, checkpoints
/// and manifest.json under output_root()/<dir>. `record` receives the in-memory result.
RunManifest run(const ScenarioConfig& config, RunRecord* record = nullptr);

/// Field snapshot `x,y,u,v,p,k,nu_t` at cell centers.
void write_snapshot(const std::string& path, const FlowState& state, const Scenario& scenario,
                    const ClosureConfig& closure);

/// Paired statistics of two runs sampled at the same times.
struct Comparison {
    std::vector<double> t;
    std::vector<std::string> names;                                 // statistic names (CSV columns)
    std::vector<std::vector<std::optional<double>>> a, b;           // [stat][sample]
    std::vector<std::optional<double>> mean_a, mean_b, mean_diff;   // time averages over [t0, T]
};

/// Throws std::invalid_argument if the sampling times differ.
Comparison compare(const std::vector<StatRecord>& a, const std::vector<StatRecord>& b, double t0);
/// Loads both manifests, writes comparison.csv and comparison.json into `out_dir`.
Comparison compare_manifests(const std::string& manifest_a, const std::string& manifest_b, const std::string& out_dir);
void write_comparison_csv(const std::string& path, const Comparison& comparison);

/// First sample time >= t_from at which the series is <= threshold (empty if never).
std::optional<double> first_crossing_below(const std::vector<double>& t, const std::vector<std::optional<double>>& v,
                                           double threshold, double t_from);

/// One run per value; runs execute on a pool of hardware_concurrency() workers.
std::vector<RunManifest> sweep(const ScenarioConfig& base, const std::string& param, const std::vector<double>& values,
                               std::vector<RunRecord>* records = nullptr);

}  // namespace urans
