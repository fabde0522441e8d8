/// @file urans_cli.cpp
/// @brief Command-line front end: run, verify, compare and sweep scenario configs.
///
/// Exit codes: 0 success (all invoked checks pass), 1 a run failed or a check did not
/// pass, 2 invalid input.

#include "urans/runner.hpp"
#include "urans/verification.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>

namespace {

int cmd_run(const std::string& config_path) {
    const urans::ScenarioConfig config = urans::load_config(config_path);
    const urans::RunManifest m = urans::run(config);
    std::printf("%s: %s (%.1f s) -> %s\n", m.status.c_str(), m.config_hash.c_str(), m.wall_seconds,
                m.output_dir.c_str());
    if (m.status != "ok") std::fprintf(stderr, "run failed at step %ld: %s\n", m.failure_step, m.error.c_str());
    return m.status == "ok" ? 0 : 1;
}

int cmd_verify(const std::string& config_path) {
    const urans::ScenarioConfig config = urans::load_config(config_path);
    std::string report_path;
    const auto reports = urans::run_verification(config, &report_path);
    bool all = true;
    for (const auto& r : reports) {
        std::printf("%-10s %s\n", r.condition.c_str(), r.pass ? "PASS" : "FAIL");
        if (!r.note.empty()) std::printf("           %s\n", r.note.c_str());
        all = all && r.pass;
    }
    std::printf("report: %s\n", report_path.c_str());
    return all ? 0 : 1;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& out_dir) {
    const urans::Comparison c = urans::compare_manifests(a, b, out_dir);
    for (std::size_t s = 0; s < c.names.size(); ++s) {
        auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("n/a"); };
        std::printf("%-16s a=%s b=%s a-b=%s\n", c.names[s].c_str(), show(c.mean_a[s]).c_str(),
                    show(c.mean_b[s]).c_str(), show(c.mean_diff[s]).c_str());
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, std::string param, std::vector<double> values) {
    const urans::ScenarioConfig config = urans::load_config(config_path);
    if (param.empty()) param = config.sweep_param;
    if (values.empty()) values = config.sweep_values;
    if (param.empty()) throw urans::ConfigError("sweep: no parameter given");
    const auto manifests = urans::sweep(config, param, values);
    bool all = true;
    for (std::size_t n = 0; n < manifests.size(); ++n) {
        std::printf("%s=%g: %s -> %s\n", param.c_str(), values[n], manifests[n].status.c_str(),
                    manifests[n].output_dir.c_str());
        all = all && manifests[n].status == "ok";
    }
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"URANS one-equation simulator and verification harness"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run a scenario config");
    run->add_option("config", config_path, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);

    auto* verify = app.add_subcommand("verify", "Run a scenario and the checks listed under \"verify\"");
    verify->add_option("config", config_path, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);

    std::string manifest_a, manifest_b, out_dir = "comparison";
    auto* compare = app.add_subcommand("compare", "Compare the statistics of two runs");
    compare->add_option("manifest_a", manifest_a, "manifest.json of the first run")->required()->check(CLI::ExistingFile);
    compare->add_option("manifest_b", manifest_b, "manifest.json of the second run")->required()->check(CLI::ExistingFile);
    compare->add_option("--out", out_dir, "Directory for comparison.csv and comparison.json");

    std::string param;
    std::vector<double> values;
    auto* sweep = app.add_subcommand("sweep", "Run one scenario per parameter value");
    sweep->add_option("config", config_path, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
    sweep->add_option("--param", param, "tau, mu, theta, nu, dt, force_scale or k0");
    sweep->add_option("--values", values, "Parameter values")->expected(1, -1);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path);
        if (*verify) return cmd_verify(config_path);
        if (*compare) return cmd_compare(manifest_a, manifest_b, out_dir);
        if (*sweep) return cmd_sweep(config_path, param, values);
    } catch (const urans::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
