// Command-line front end. Talks to the library through the C interface only.

#include "fracbsde/fracbsde.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace {

using Json = nlohmann::json;

constexpr int exit_validation = FBSDE_VALIDATION;

struct ExperimentHandle {
    fbsde_experiment* p;
    ~ExperimentHandle() { fbsde_experiment_destroy(p); }
};

std::optional<std::string> scenario_index(const std::string& name) {
    for (size_t i = 0; i < fbsde_scenario_count(); ++i)
        if (name == fbsde_scenario_name(i)) return Json{{"scenario", name}}.dump();
    return std::nullopt;
}

int run(const std::string& path, const std::optional<std::string>& out,
        const std::optional<std::uint64_t>& seed) {
    const bool is_file = std::ifstream(path).good();
    const std::optional<std::string> by_name = is_file ? std::nullopt : scenario_index(path);
    ExperimentHandle exp{by_name ? fbsde_experiment_create(by_name->c_str())
                                 : fbsde_experiment_create_from_file(path.c_str())};
    if (!exp.p) {
        std::cerr << "error: out of memory\n";
        return FBSDE_INTERNAL;
    }
    if (out) fbsde_experiment_set_output_dir(exp.p, out->c_str());
    if (seed) fbsde_experiment_set_seed(exp.p, *seed);
    const int status = fbsde_experiment_run(exp.p);

    const Json report = Json::parse(fbsde_experiment_report(exp.p), nullptr, false);
    const std::string dir = fbsde_experiment_output_dir(exp.p);
    if (status == FBSDE_OK || status == FBSDE_ACCEPTANCE) {
        std::cout << "verdict: " << report.value("verdict", "unknown") << "\n";
        if (report.contains("checks")) {
            for (const auto& c : report["checks"])
                std::cout << "  " << (c.value("passed", false) ? "pass" : "FAIL") << "  "
                          << c.value("kind", "") << "\n";
        }
    } else {
        std::cerr << "error [" << fbsde_last_error_code() << "]: " << fbsde_last_error() << "\n";
    }
    std::cout << "output: " << dir << "\n";
    return status;
}

int list_scenarios() {
    for (size_t i = 0; i < fbsde_scenario_count(); ++i)
        std::cout << fbsde_scenario_name(i) << "\t" << fbsde_scenario_description(i) << "\n";
    return FBSDE_OK;
}

int admissibility(double L, double M, double H, double beta_h, double v, bool as_json) {
    double beta_e, delta_e, beta_c, delta_c, horizon;
    if (fbsde_admissible_delay(L, M, "existence", &beta_e, &delta_e) != FBSDE_OK ||
        fbsde_admissible_delay(L, M, "comparison", &beta_c, &delta_c) != FBSDE_OK) {
        std::cerr << "error [" << fbsde_last_error_code() << "]: " << fbsde_last_error() << "\n";
        return exit_validation;
    }
    const int hs = fbsde_admissible_horizon(L, M, H, beta_h, v, &horizon);
    if (hs != FBSDE_OK && std::string(fbsde_last_error_code()) != "infeasible") {
        std::cerr << "error [" << fbsde_last_error_code() << "]: " << fbsde_last_error() << "\n";
        return hs;
    }
    const std::string horizon_note = hs == FBSDE_OK ? "" : fbsde_last_error();

    if (as_json) {
        Json j = {{"L", L},
                  {"M", M},
                  {"H", H},
                  {"existence", {{"beta", beta_e}, {"delta_max", delta_e}}},
                  {"comparison", {{"beta", beta_c}, {"delta_max", delta_c}}},
                  {"horizon", {{"beta", beta_h}, {"T_max", nullptr}}}};
        if (hs == FBSDE_OK) j["horizon"]["T_max"] = horizon;
        else j["horizon"]["infeasible"] = horizon_note;
        std::cout << j.dump(2) << "\n";
        return FBSDE_OK;
    }
    std::printf("%-12s %14s %14s\n", "mode", "beta", "delta_max");
    std::printf("%-12s %14.6f %14.6f\n", "existence", beta_e, delta_e);
    std::printf("%-12s %14.6f %14.6f\n", "comparison", beta_c, delta_c);
    if (hs == FBSDE_OK)
        std::printf("small horizon (beta = %g): T_max = %.6g\n", beta_h, horizon);
    else
        std::printf("small horizon (beta = %g): infeasible (%s)\n", beta_h, horizon_note.c_str());
    return FBSDE_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fractional BSDE solver with delayed generators"};
    app.require_subcommand(1);
    app.set_version_flag("--version", fbsde_version());

    auto* run_cmd = app.add_subcommand("run", "Run an experiment config (or a library scenario name)");
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    run_cmd->add_option("config", config_path, "Config JSON file")->required();
    run_cmd->add_option("--out", out_dir, "Output directory");
    run_cmd->add_option("--seed", seed, "Override the master seed");

    auto* list_cmd = app.add_subcommand("scenarios", "List library scenarios");

    auto* adm_cmd = app.add_subcommand("admissibility", "Print admissible (beta, delta_max, T_max)");
    double L = 0.0, M = 0.0, H = 0.75, beta_h = 1.1, v = 0.0;
    bool as_json = false;
    adm_cmd->add_option("--L", L, "Lipschitz constant of the generator")->required();
    adm_cmd->add_option("--M", M, "Ratio-bound constant, M > 2")->required();
    adm_cmd->add_option("--H", H, "Hurst parameter in (1/2, 1)")->required();
    adm_cmd->add_option("--beta", beta_h, "beta for the small-horizon bound")->capture_default_str();
    adm_cmd->add_option("--v", v, "v for the small-horizon bound (default 1/(8 L M e^beta))");
    adm_cmd->add_flag("--json", as_json, "Machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_validation;
    }

    if (run_cmd->parsed()) return run(config_path, out_dir, seed);
    if (list_cmd->parsed()) return list_scenarios();
    if (adm_cmd->parsed()) return admissibility(L, M, H, beta_h, v, as_json);
    return exit_validation;
}
