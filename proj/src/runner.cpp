#include "urans/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace urans {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::Annulus2d: return "annulus2d";
        case ScenarioKind::PeriodicBox: return "periodic_box";
        case ScenarioKind::Channel: return "channel";
        case ScenarioKind::DecayOde: return "decay_ode";
    }
    return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
    if (name == "annulus2d") return ScenarioKind::Annulus2d;
    if (name == "periodic_box") return ScenarioKind::PeriodicBox;
    if (name == "channel") return ScenarioKind::Channel;
    if (name == "decay_ode") return ScenarioKind::DecayOde;
    throw ConfigError("unknown scenario '" + name + "'");
}

namespace {

std::string to_string(InitialK kind) {
    switch (kind) {
        case InitialK::FromL0: return "from_l0";
        case InitialK::Uniform: return "uniform";
        case InitialK::Duct: return "duct";
    }
    return "unknown";
}

InitialK initial_k_from_string(const std::string& name) {
    if (name == "from_l0") return InitialK::FromL0;
    if (name == "uniform") return InitialK::Uniform;
    if (name == "duct") return InitialK::Duct;
    throw ConfigError("unknown initial_k kind '" + name + "'");
}

void require_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) known = known || item.key() == key;
        if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
}

std::vector<double> number_list(const json& obj, const char* key) {
    std::vector<double> out;
    if (!obj.contains(key)) return out;
    for (const auto& v : obj.at(key)) out.push_back(v.get<double>());
    return out;
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string iso_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

void ScenarioConfig::validate() const {
    if (nx < 4 || ny < 4) throw ConfigError("grid: nx, ny must be >= 4");
    closure.validate();
    solver.validate();
    if (!(reynolds_l0 > 0.0)) throw ConfigError("reynolds_l0 must be positive");
    if (!(k0 >= 0.0)) throw ConfigError("initial_k: k0 must be non-negative");
    if (initial_k_tau && !(*initial_k_tau >= 0.0)) throw ConfigError("initial_k: tau must be non-negative");
    if (!(decay_l0 >= 0.0)) throw ConfigError("decay: l0 must be non-negative");
    if (!(t0 >= 0.0)) throw ConfigError("statistics: t0 must be non-negative");
    if (sample_every < 1) throw ConfigError("statistics: sample_every must be >= 1");
    if (!sweep_param.empty() && sweep_values.empty()) throw ConfigError("sweep: values must be non-empty");
}

ScenarioConfig parse_config(const json& doc) {
    require_keys(doc, "config",
                 {"description", "scenario", "grid", "closure", "solver", "reynolds_l0", "force_scale", "initial_k",
                  "decay", "statistics", "output", "restart_from", "sweep", "verify"});
    ScenarioConfig c;
    c.scenario = scenario_kind_from_string(doc.value("scenario", std::string("annulus2d")));
    if (c.scenario == ScenarioKind::DecayOde) {
        c.nx = c.ny = 8;
        c.initial_k = InitialK::Uniform;
        c.k0 = 1.0;
        c.t0 = 0.0;
    }
    if (doc.contains("grid")) {
        const json& g = doc.at("grid");
        require_keys(g, "grid", {"nx", "ny"});
        c.nx = g.value("nx", c.nx);
        c.ny = g.value("ny", c.ny);
    }
    if (doc.contains("closure")) {
        const json& j = doc.at("closure");
        require_keys(j, "closure", {"mode", "mu", "tau_s", "theta", "nu_m2s", "k_floor_m2s2"});
        if (j.contains("mode")) c.closure.mode = length_scale_mode_from_string(j.at("mode").get<std::string>());
        c.closure.mu = j.value("mu", c.closure.mu);
        c.closure.tau = j.value("tau_s", c.closure.tau);
        c.closure.theta = j.value("theta", c.closure.theta);
        c.closure.nu = j.value("nu_m2s", c.closure.nu);
        c.closure.k_floor = j.value("k_floor_m2s2", c.closure.k_floor);
    }
    c.solver.model_start = c.scenario == ScenarioKind::Annulus2d ? 1.0 : 0.0;
    if (doc.contains("solver")) {
        const json& j = doc.at("solver");
        require_keys(j, "solver",
                     {"dt_s", "t_end_s", "proj_tol_per_s", "penal_eta_s", "ramp", "cfl_max", "momentum_rel_tol",
                      "momentum_direct", "model_start_s"});
        c.solver.dt = j.value("dt_s", c.solver.dt);
        c.solver.t_end = j.value("t_end_s", c.solver.t_end);
        c.solver.proj_tol = j.value("proj_tol_per_s", c.solver.proj_tol);
        c.solver.penal_eta = j.value("penal_eta_s", c.solver.penal_eta);
        c.solver.ramp = j.value("ramp", c.solver.ramp);
        c.solver.cfl_max = j.value("cfl_max", c.solver.cfl_max);
        c.solver.momentum_rel_tol = j.value("momentum_rel_tol", c.solver.momentum_rel_tol);
        c.solver.momentum_direct = j.value("momentum_direct", c.solver.momentum_direct);
        c.solver.model_start = j.value("model_start_s", c.solver.model_start);
    }
    c.reynolds_l0 = doc.value("reynolds_l0", c.reynolds_l0);
    c.force_scale = doc.value("force_scale", c.force_scale);
    if (doc.contains("initial_k")) {
        const json& j = doc.at("initial_k");
        require_keys(j, "initial_k", {"kind", "tau_s", "k0_m2s2"});
        if (j.contains("kind")) c.initial_k = initial_k_from_string(j.at("kind").get<std::string>());
        if (j.contains("tau_s")) c.initial_k_tau = j.at("tau_s").get<double>();
        c.k0 = j.value("k0_m2s2", c.k0);
    }
    if (doc.contains("decay")) {
        const json& j = doc.at("decay");
        require_keys(j, "decay", {"l0_m"});
        c.decay_l0 = j.value("l0_m", c.decay_l0);
    }
    if (doc.contains("statistics")) {
        const json& j = doc.at("statistics");
        require_keys(j, "statistics", {"t0_s", "sample_every"});
        c.t0 = j.value("t0_s", c.t0);
        c.sample_every = j.value("sample_every", c.sample_every);
    }
    if (doc.contains("output")) {
        const json& j = doc.at("output");
        require_keys(j, "output", {"dir", "checkpoint_times_s", "snapshot_times_s"});
        c.output_dir = j.value("dir", c.output_dir);
        c.checkpoint_times = number_list(j, "checkpoint_times_s");
        c.snapshot_times = number_list(j, "snapshot_times_s");
    }
    c.restart_from = doc.value("restart_from", c.restart_from);
    if (doc.contains("sweep")) {
        const json& j = doc.at("sweep");
        require_keys(j, "sweep", {"param", "values"});
        c.sweep_param = j.value("param", std::string());
        c.sweep_values = number_list(j, "values");
    }
    if (doc.contains("verify")) c.verify = doc.at("verify");
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
    return parse_config(doc);
}

json to_json(const ScenarioConfig& c) {
    json doc;
    doc["scenario"] = to_string(c.scenario);
    doc["grid"] = {{"nx", c.nx}, {"ny", c.ny}};
    doc["closure"] = {{"mode", to_string(c.closure.mode)}, {"mu", c.closure.mu},       {"tau_s", c.closure.tau},
                      {"theta", c.closure.theta},          {"nu_m2s", c.closure.nu}, {"k_floor_m2s2", c.closure.k_floor}};
    doc["solver"] = {{"dt_s", c.solver.dt},
                     {"t_end_s", c.solver.t_end},
                     {"proj_tol_per_s", c.solver.proj_tol},
                     {"penal_eta_s", c.solver.penal_eta},
                     {"ramp", c.solver.ramp},
                     {"cfl_max", c.solver.cfl_max},
                     {"momentum_rel_tol", c.solver.momentum_rel_tol},
                     {"momentum_direct", c.solver.momentum_direct},
                     {"model_start_s", c.solver.model_start}};
    doc["reynolds_l0"] = c.reynolds_l0;
    doc["force_scale"] = c.force_scale;
    doc["initial_k"] = {{"kind", to_string(c.initial_k)}, {"k0_m2s2", c.k0}};
    if (c.initial_k_tau) doc["initial_k"]["tau_s"] = *c.initial_k_tau;
    doc["decay"] = {{"l0_m", c.decay_l0}};
    doc["statistics"] = {{"t0_s", c.t0}, {"sample_every", c.sample_every}};
    doc["output"] = {{"dir", c.output_dir},
                     {"checkpoint_times_s", c.checkpoint_times},
                     {"snapshot_times_s", c.snapshot_times}};
    if (!c.restart_from.empty()) doc["restart_from"] = c.restart_from;
    if (!c.sweep_param.empty()) doc["sweep"] = {{"param", c.sweep_param}, {"values", c.sweep_values}};
    if (!c.verify.empty()) doc["verify"] = c.verify;
    return doc;
}

std::string config_hash(const ScenarioConfig& config) {
    const std::string text = to_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void set_parameter(ScenarioConfig& config, const std::string& param, double value) {
    if (param == "tau") {
        config.closure.tau = value;
    } else if (param == "mu") {
        config.closure.mu = value;
    } else if (param == "theta") {
        config.closure.theta = value;
    } else if (param == "nu") {
        config.closure.nu = value;
    } else if (param == "dt") {
        config.solver.dt = value;
    } else if (param == "force_scale") {
        config.force_scale = value;
    } else if (param == "k0") {
        config.k0 = value;
    } else {
        throw ConfigError("unknown sweep parameter '" + param + "'");
    }
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

Scenario build_scenario(const ScenarioConfig& c) {
    Scenario sc;
    const double scale = c.force_scale;
    const bool ramp = c.solver.ramp;
    auto ramp_factor = [ramp](double t) { return ramp ? std::min(t, 1.0) : 1.0; };
    constexpr double two_pi = 2.0 * std::numbers::pi;

    switch (c.scenario) {
        case ScenarioKind::Annulus2d: {
            const Circle outer{0.0, 0.0, 1.0};
            sc.grid = std::make_shared<const Grid>(make_grid(Box{-1.0, -1.0, 2.0, 2.0}, c.nx, c.ny,
                                                             BoundaryKind::NoSlip, BoundaryKind::NoSlip,
                                                             {Circle{0.5, 0.0, 0.1}}, &outer));
            sc.force = [scale, ramp](double x, double y, double t) {
                const auto f = body_force_annulus(x, y, t, ramp);
                return std::pair{scale * f.first, scale * f.second};
            };
            sc.l0 = static_length_scale(*sc.grid, c.reynolds_l0);
            sc.geometry_note =
                "unit disk minus the disk of radius 0.1 at (0.5, 0), embedded in the box [-1,1]^2; cells outside "
                "the fluid region are solid and Brinkman-penalized, so the curved walls are staircased at the cell "
                "size";
            break;
        }
        case ScenarioKind::PeriodicBox: {
            sc.grid = std::make_shared<const Grid>(make_grid(Box{0.0, 0.0, two_pi, two_pi}, c.nx, c.ny,
                                                             BoundaryKind::Periodic, BoundaryKind::Periodic, {}));
            sc.force = [scale, ramp_factor](double, double y, double t) {
                return std::pair{scale * ramp_factor(t) * std::sin(y), 0.0};
            };
            sc.l0 = static_length_scale(*sc.grid, c.reynolds_l0);
            sc.geometry_note = "doubly periodic box [0,2pi]^2 with Kolmogorov forcing (sin y, 0)";
            break;
        }
        case ScenarioKind::Channel: {
            sc.grid = std::make_shared<const Grid>(make_grid(Box{0.0, 0.0, two_pi, 2.0}, c.nx, c.ny,
                                                             BoundaryKind::Periodic, BoundaryKind::NoSlip, {}));
            sc.force = [scale, ramp_factor](double, double, double t) {
                return std::pair{scale * ramp_factor(t), 0.0};
            };
            sc.l0 = static_length_scale(*sc.grid, c.reynolds_l0);
            sc.geometry_note = "plane channel [0,2pi] x [0,2], periodic in x, no-slip walls at y = 0 and y = 2";
            break;
        }
        case ScenarioKind::DecayOde: {
            sc.grid = std::make_shared<const Grid>(make_grid(Box{0.0, 0.0, 1.0, 1.0}, c.nx, c.ny,
                                                             BoundaryKind::Periodic, BoundaryKind::Periodic, {}));
            sc.force = [](double, double, double) { return std::pair{0.0, 0.0}; };
            sc.l0 = LengthScaleField{Array2D(c.nx, c.ny, c.decay_l0)};
            sc.geometry_note = "doubly periodic unit box at rest; spatially uniform k";
            break;
        }
    }

    const Grid& g = *sc.grid;
    sc.initial = FlowState(c.nx, c.ny);
    switch (c.initial_k) {
        case InitialK::FromL0: {
            const double tau = c.initial_k_tau.value_or(c.closure.tau);
            if (tau > 0.0) sc.initial.k = initial_k_from_l0(sc.l0, tau);
            break;
        }
        case InitialK::Uniform:
            sc.initial.k.fill(c.k0);
            break;
        case InitialK::Duct:
            sc.initial.k = initial_k_duct(sc.initial.vel, g, c.reynolds_l0);
            break;
    }
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i)
            if (g.solid(i, j)) sc.initial.k(i, j) = 0.0;
    return sc;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

namespace {

double box_sum(const Array2D& a) {
    double s = 0.0;
    for (double v : a.raw()) s += v;
    return s;
}

RunRecord simulate_scenario(const ScenarioConfig& c, const Scenario& sc, const StepObserver& observer,
                            const FlowState* start) {
    const auto wall_start = std::chrono::steady_clock::now();
    const Grid& g = *sc.grid;
    FlowSolver solver(g, c.closure, c.solver, sc.force, sc.l0);
    ClosureConfig off = c.closure;
    off.mode = LengthScaleMode::None;

    RunRecord rec;
    rec.config = c;
    rec.geometry_note = sc.geometry_note;
    FlowState state = start ? *start : sc.initial;
    if (state.k.nx() != g.nx() || state.k.ny() != g.ny()) throw ConfigError("restart state does not match the grid");

    const double dt = c.solver.dt;
    const long n_total = std::lround(c.solver.t_end / dt);
    auto sample = [&](const FlowState& s) {
        rec.stats.push_back(sample_statistics(s, solver.closure_active(s.t) ? c.closure : off, sc.l0, g));
    };
    rec.initial_audit_energy = solver.audit_energy(state);
    if (observer) observer(state);
    sample(state);

    while (state.step < n_total) {
        const bool active = solver.closure_active(state.t);
        const double area = g.cell_area();
        const double k_before = box_sum(state.k) * area;
        double sink = 0.0;
        double production = 0.0;
        if (active) {
            const ScalarField magsq = deformation_tensor_magsq(state.vel, g);
            for (int j = 0; j < g.ny(); ++j)
                for (int i = 0; i < g.nx(); ++i) {
                    sink += dissipation_density(c.closure, sc.l0.l(i, j), state.k(i, j));
                    if (g.fluid(i, j))
                        production += model_eddy_viscosity(c.closure, sc.l0.l(i, j), state.k(i, j)) * magsq(i, j);
                }
            sink *= area;
            production *= area;
        }

        StepDiagnostics d;
        try {
            state = solver.step(state, &d);
        } catch (const SolverError& e) {
            rec.failed = true;
            rec.failure_step = state.step + 1;
            rec.error = e.what();
            break;
        }

        StepRecord r;
        r.t = state.t;
        r.audit_energy = solver.audit_energy(state);
        r.energy_audit = d.energy_audit;
        r.max_divergence = d.max_divergence;
        r.clamped_mass = d.k.clamped_mass;
        r.min_k = *std::min_element(state.k.raw().begin(), state.k.raw().end());
        r.k_integral = box_sum(state.k) * area;
        if (active) r.k_residual = (r.k_integral - k_before - r.clamped_mass) / dt + sink - production;
        r.forcing_power = d.forcing_power;
        r.cfl = d.cfl;
        r.momentum_iterations = d.momentum.iterations;
        r.pressure_iterations = d.pressure.iterations;
        rec.steps.push_back(r);

        if (observer) observer(state);
        if (state.step % c.sample_every == 0 || state.step == n_total) sample(state);
    }
    rec.final_state = state;

    try {
        rec.force = force_scales(sample_force(sc.force, g, std::max(1.0, c.solver.t_end)), g);
    } catch (const std::domain_error&) {
        rec.force.reset();
    }
    if (rec.force && rec.stats.size() >= 2) {
        std::vector<double> t, v2;
        for (const StatRecord& s : rec.stats) {
            t.push_back(s.t);
            v2.push_back(s.mean_velocity_sq);
        }
        const double t_end = t.back();
        const double t0 = t_end > c.t0 ? c.t0 : t.front();
        if (t_end > t0) {
            const double mean_sq = time_average(t, v2, t0, t_end);
            rec.scales = compute_scales(*rec.force, mean_sq, c.closure.nu);
            normalize(rec.stats, *rec.scales);
        }
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return rec;
}

}  // namespace

RunRecord simulate(const ScenarioConfig& config, const StepObserver& observer, const FlowState* start) {
    config.validate();
    const Scenario sc = build_scenario(config);
    return simulate_scenario(config, sc, observer, start);
}

// ---------------------------------------------------------------------------
// Outputs
// ---------------------------------------------------------------------------

json to_json(const RunManifest& m) {
    json doc;
    doc["config_hash"] = m.config_hash;
    doc["output_dir"] = m.output_dir;
    doc["start_time"] = m.start_time;
    doc["end_time"] = m.end_time;
    doc["wall_seconds"] = m.wall_seconds;
    doc["files"] = m.files;
    doc["diagnostics"] = m.diagnostics;
    doc["scales"] = m.scales;
    doc["config"] = m.config;
    doc["geometry_note"] = m.geometry_note;
    doc["status"] = m.status;
    doc["failure_step"] = m.failure_step;
    doc["error"] = m.error;
    return doc;
}

RunManifest manifest_from_json(const json& doc) {
    RunManifest m;
    m.config_hash = doc.at("config_hash").get<std::string>();
    m.output_dir = doc.at("output_dir").get<std::string>();
    m.start_time = doc.value("start_time", std::string());
    m.end_time = doc.value("end_time", std::string());
    m.wall_seconds = doc.value("wall_seconds", 0.0);
    m.files = doc.at("files").get<std::vector<std::string>>();
    m.diagnostics = doc.value("diagnostics", json::object());
    m.scales = doc.value("scales", json::object());
    m.config = doc.at("config");
    m.geometry_note = doc.value("geometry_note", std::string());
    m.status = doc.value("status", std::string("ok"));
    m.failure_step = doc.value("failure_step", -1L);
    m.error = doc.value("error", std::string());
    return m;
}

std::string output_root() {
    const char* env = std::getenv("URANS_OUTPUT_ROOT");
    return env && *env ? std::string(env) : std::string("runs");
}

void write_snapshot(const std::string& path, const FlowState& state, const Scenario& scenario,
                    const ClosureConfig& closure) {
    const Grid& g = *scenario.grid;
    Array2D uc, vc;
    cell_velocity(state.vel, g, uc, vc);
    const ScalarField nu_t = model_eddy_viscosity(closure, scenario.l0, state.k, g);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "x,y,u,v,p,k,nu_t\n";
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i)
            out << format_number(g.xc(i)) << ',' << format_number(g.yc(j)) << ',' << format_number(uc(i, j)) << ','
                << format_number(vc(i, j)) << ',' << format_number(state.p(i, j)) << ','
                << format_number(state.k(i, j)) << ',' << format_number(nu_t(i, j)) << '\n';
}

namespace {

void write_steps_csv(const std::string& path, const std::vector<StepRecord>& steps) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t,audit_energy,energy_audit,max_divergence,clamped_mass,min_k,k_integral,k_residual,forcing_power,cfl,"
           "momentum_iterations,pressure_iterations\n";
    for (const StepRecord& r : steps) {
        out << format_number(r.t) << ',' << format_number(r.audit_energy) << ',' << format_number(r.energy_audit) << ','
            << format_number(r.max_divergence) << ',' << format_number(r.clamped_mass) << ','
            << format_number(r.min_k) << ',' << format_number(r.k_integral) << ','
            << (r.k_residual ? format_number(*r.k_residual) : std::string()) << ','
            << format_number(r.forcing_power) << ',' << format_number(r.cfl) << ',' << r.momentum_iterations << ','
            << r.pressure_iterations << '\n';
    }
}

json diagnostics_json(const RunRecord& rec) {
    int max_mom = 0, max_p = 0;
    double clamped = 0.0, cfl = 0.0, div = 0.0, audit = -std::numeric_limits<double>::infinity();
    double min_k = std::numeric_limits<double>::infinity();
    for (const StepRecord& r : rec.steps) {
        max_mom = std::max(max_mom, r.momentum_iterations);
        max_p = std::max(max_p, r.pressure_iterations);
        clamped += r.clamped_mass;
        cfl = std::max(cfl, r.cfl);
        div = std::max(div, r.max_divergence);
        audit = std::max(audit, r.energy_audit);
        min_k = std::min(min_k, r.min_k);
    }
    json d = {{"steps", rec.steps.size()},
              {"max_momentum_iterations", max_mom},
              {"max_pressure_iterations", max_p},
              {"clamped_k_mass", clamped},
              {"cfl_max", cfl},
              {"max_divergence", div}};
    if (!rec.steps.empty()) {
        d["max_energy_audit"] = audit;
        d["min_k"] = min_k;
    }
    return d;
}

json scales_json(const RunRecord& rec) {
    json s = json::object();
    if (rec.force) {
        s["F"] = rec.force->F;
        s["L"] = rec.force->L;
        s["L_domain"] = rec.force->L_domain;
        s["grad_sup"] = rec.force->grad_sup;
        s["grad_rms"] = rec.force->grad_rms;
    }
    if (rec.scales) {
        s["U"] = rec.scales->U;
        s["Re"] = rec.scales->Re;
        s["Tstar"] = rec.scales->Tstar;
    }
    return s;
}

std::set<long> step_set(const std::vector<double>& times, double dt) {
    std::set<long> out;
    for (double t : times) out.insert(std::lround(t / dt));
    return out;
}

}  // namespace

RunManifest run(const ScenarioConfig& config, RunRecord* record) {
    config.validate();
    RunManifest m;
    m.start_time = iso_now();
    m.config_hash = config_hash(config);
    m.config = to_json(config);
    const std::string dir_name =
        config.output_dir.empty() ? to_string(config.scenario) + "-" + m.config_hash.substr(0, 8) : config.output_dir;
    const fs::path dir = fs::path(output_root()) / dir_name;
    fs::create_directories(dir);
    m.output_dir = dir.string();

    const Scenario sc = build_scenario(config);
    m.geometry_note = sc.geometry_note;
    std::optional<FlowState> start;
    if (!config.restart_from.empty()) start = read_checkpoint(config.restart_from);

    const std::set<long> snapshot_steps = step_set(config.snapshot_times, config.solver.dt);
    const std::set<long> checkpoint_steps = step_set(config.checkpoint_times, config.solver.dt);
    auto observer = [&](const FlowState& s) {
        const std::string label = format_label(s.t);
        if (snapshot_steps.count(s.step)) {
            const std::string name = "snapshot_t" + label + ".csv";
            write_snapshot((dir / name).string(), s, sc, config.closure);
            m.files.push_back(name);
        }
        if (checkpoint_steps.count(s.step)) {
            const std::string name = "checkpoint_t" + label + ".bin";
            write_checkpoint((dir / name).string(), s);
            m.files.push_back(name);
        }
    };
    RunRecord rec = simulate_scenario(config, sc, observer, start ? &*start : nullptr);

    write_stat_csv((dir / "stats.csv").string(), rec.stats);
    m.files.push_back("stats.csv");
    write_steps_csv((dir / "steps.csv").string(), rec.steps);
    m.files.push_back("steps.csv");
    write_checkpoint((dir / "checkpoint_final.bin").string(), rec.final_state);
    m.files.push_back("checkpoint_final.bin");

    m.diagnostics = diagnostics_json(rec);
    m.scales = scales_json(rec);
    m.status = rec.failed ? "failed" : "ok";
    m.failure_step = rec.failure_step;
    m.error = rec.error;
    m.wall_seconds = rec.wall_seconds;
    m.end_time = iso_now();
    m.files.push_back("manifest.json");
    std::ofstream((dir / "manifest.json").string()) << to_json(m).dump(2) << '\n';
    if (record) *record = std::move(rec);
    return m;
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& stat_names() {
    static const std::vector<std::string> names = {"energy", "eps_model", "intensity", "nu_eff",
                                                   "vr",     "taylor",    "avg_l_over_L", "avg_nuT_over_LU"};
    return names;
}

std::vector<std::optional<double>> stat_values(const StatRecord& r) {
    return {r.kinetic_energy,    r.eps_model,         r.intensity,    r.nu_effective,
            r.viscosity_ratio,   r.taylor_microscale, r.avg_l_over_L, r.avg_nuT_over_LU};
}

std::optional<double> safe_average(const std::vector<double>& t, const std::vector<std::optional<double>>& v,
                                   double t0) {
    if (t.size() < 2) return std::nullopt;
    try {
        return time_average(t, v, std::min(t0, t.back()) < t.back() ? t0 : t.front(), t.back());
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

}  // namespace

Comparison compare(const std::vector<StatRecord>& a, const std::vector<StatRecord>& b, double t0) {
    if (a.size() != b.size()) throw std::invalid_argument("compare: runs have different numbers of samples");
    Comparison c;
    c.names = stat_names();
    const std::size_t n_stats = c.names.size();
    c.a.assign(n_stats, {});
    c.b.assign(n_stats, {});
    for (std::size_t n = 0; n < a.size(); ++n) {
        if (std::abs(a[n].t - b[n].t) > 1e-9 * std::max(1.0, std::abs(a[n].t)))
            throw std::invalid_argument("compare: sampling times differ at sample " + std::to_string(n));
        c.t.push_back(a[n].t);
        const auto va = stat_values(a[n]);
        const auto vb = stat_values(b[n]);
        for (std::size_t s = 0; s < n_stats; ++s) {
            c.a[s].push_back(va[s]);
            c.b[s].push_back(vb[s]);
        }
    }
    for (std::size_t s = 0; s < n_stats; ++s) {
        std::vector<std::optional<double>> diff;
        for (std::size_t n = 0; n < c.t.size(); ++n)
            diff.push_back(c.a[s][n] && c.b[s][n] ? std::optional<double>(*c.a[s][n] - *c.b[s][n]) : std::nullopt);
        c.mean_a.push_back(safe_average(c.t, c.a[s], t0));
        c.mean_b.push_back(safe_average(c.t, c.b[s], t0));
        c.mean_diff.push_back(safe_average(c.t, diff, t0));
    }
    return c;
}

void write_comparison_csv(const std::string& path, const Comparison& c) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << 't';
    for (const std::string& name : c.names) out << ',' << name << "_a," << name << "_b," << name << "_diff";
    out << '\n';
    auto cell = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
    for (std::size_t n = 0; n < c.t.size(); ++n) {
        out << format_number(c.t[n]);
        for (std::size_t s = 0; s < c.names.size(); ++s) {
            const auto& a = c.a[s][n];
            const auto& b = c.b[s][n];
            out << ',' << cell(a) << ',' << cell(b) << ',' << cell(a && b ? std::optional<double>(*a - *b) : std::nullopt);
        }
        out << '\n';
    }
}

Comparison compare_manifests(const std::string& manifest_a, const std::string& manifest_b, const std::string& out_dir) {
    auto load = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open manifest " + path);
        json doc;
        in >> doc;
        return std::pair{manifest_from_json(doc), fs::path(path).parent_path()};
    };
    const auto [ma, dir_a] = load(manifest_a);
    const auto [mb, dir_b] = load(manifest_b);
    const auto stats_a = read_stat_csv((dir_a / "stats.csv").string());
    const auto stats_b = read_stat_csv((dir_b / "stats.csv").string());
    const double t0 = ma.config.at("statistics").at("t0_s").get<double>();
    Comparison c = compare(stats_a, stats_b, t0);

    fs::create_directories(out_dir);
    write_comparison_csv((fs::path(out_dir) / "comparison.csv").string(), c);
    json summary;
    summary["run_a"] = manifest_a;
    summary["run_b"] = manifest_b;
    summary["t0_s"] = t0;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    for (std::size_t s = 0; s < c.names.size(); ++s)
        summary["time_averages"][c.names[s]] = {
            {"a", opt(c.mean_a[s])}, {"b", opt(c.mean_b[s])}, {"a_minus_b", opt(c.mean_diff[s])}};
    std::ofstream((fs::path(out_dir) / "comparison.json").string()) << summary.dump(2) << '\n';
    return c;
}

std::optional<double> first_crossing_below(const std::vector<double>& t, const std::vector<std::optional<double>>& v,
                                           double threshold, double t_from) {
    for (std::size_t n = 0; n < t.size() && n < v.size(); ++n)
        if (t[n] >= t_from && v[n] && *v[n] <= threshold) return t[n];
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

std::vector<RunManifest> sweep(const ScenarioConfig& base, const std::string& param, const std::vector<double>& values,
                               std::vector<RunRecord>* records) {
    if (values.empty()) throw ConfigError("sweep: values must be non-empty");
    std::vector<ScenarioConfig> configs;
    const std::string stem =
        base.output_dir.empty() ? to_string(base.scenario) + "-" + config_hash(base).substr(0, 8) : base.output_dir;
    for (double value : values) {
        ScenarioConfig c = base;
        c.sweep_param.clear();
        c.sweep_values.clear();
        set_parameter(c, param, value);
        c.output_dir = stem + "/" + param + "_" + format_label(value);
        c.validate();
        configs.push_back(std::move(c));
    }

    std::vector<RunManifest> manifests(configs.size());
    std::vector<RunRecord> results(records ? configs.size() : 0);
    std::vector<std::exception_ptr> errors(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t n = next++; n < configs.size(); n = next++) {
            try {
                manifests[n] = run(configs[n], records ? &results[n] : nullptr);
            } catch (...) {
                errors[n] = std::current_exception();
            }
        }
    };
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), configs.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    if (records) *records = std::move(results);
    return manifests;
}

}  // namespace urans
