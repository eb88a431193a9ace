#include "fracbsde/fracbsde.h"

#include "core/delay_solver.hpp"
#include "core/error.hpp"
#include "core/kernel.hpp"
#include "core/sampler.hpp"
#include "experiment/config.hpp"
#include "experiment/runner.hpp"
#include "experiment/scenarios.hpp"

#include <cmath>
#include <mutex>
#include <new>
#include <optional>
#include <string>
#include <vector>

using namespace fracbsde;

struct fbsde_experiment {
    std::string config;
    bool from_file = false;
    experiment::RunOptions options;
    std::string report;
    std::string out_dir;
};

struct fbsde_paths {
    PathEnsemble ensemble;
};

namespace {

thread_local std::string last_error;
thread_local std::string last_code;

int record(int status, const std::string& code, const std::string& message) {
    last_code = code;
    last_error = message;
    return status;
}

// Runs body and maps exceptions onto status codes.
template <typename Body>
int guarded(Body&& body) {
    last_error.clear();
    last_code.clear();
    try {
        body();
        return FBSDE_OK;
    } catch (const Error& e) {
        return record(is_validation_error(e.code()) ? FBSDE_VALIDATION : FBSDE_NUMERICAL,
                      to_string(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return record(FBSDE_INTERNAL, "internal", "out of memory");
    } catch (const std::exception& e) {
        return record(FBSDE_INTERNAL, "internal", e.what());
    }
}

int null_argument(const char* name) {
    return record(FBSDE_VALIDATION, "invalid_argument", std::string(name) + " must not be null");
}

const std::vector<std::string>& resolved_scenario_configs() {
    static std::once_flag once;
    static std::vector<std::string> configs;
    std::call_once(once, [] {
        for (const auto& s : experiment::scenarios()) {
            try {
                const auto c = experiment::parse_config(experiment::Json{{"scenario", s.name}});
                configs.push_back(experiment::to_json(c).dump(2));
            } catch (const std::exception&) {
                configs.push_back(s.config);
            }
        }
    });
    return configs;
}

}  // namespace

extern "C" {

const char* fbsde_version(void) { return "1.0.0"; }

const char* fbsde_last_error(void) { return last_error.c_str(); }

const char* fbsde_last_error_code(void) { return last_code.c_str(); }

int fbsde_phi(double H, double x, double* out) {
    if (!out) return null_argument("out");
    return guarded([&] { *out = kernel::phi(x, HurstParam(H)); });
}

int fbsde_inner_product(double H, const double* f_cells, const double* g_cells, size_t n, double dt,
                        double t, double* out) {
    if (!out) return null_argument("out");
    if (n > 0 && (!f_cells || !g_cells)) return null_argument("cell values");
    return guarded([&] {
        require(dt > 0.0, ErrorCode::invalid_argument, "dt must be positive");
        *out = kernel::inner_product_cells(std::span<const double>(f_cells, n),
                                           std::span<const double>(g_cells, n), dt, t, HurstParam(H));
    });
}

int fbsde_admissible_delay(double L, double M, const char* mode, double* beta, double* delta_max) {
    if (!beta || !delta_max) return null_argument("beta/delta_max");
    return guarded([&] {
        const auto m = parse_admissibility_mode(mode ? mode : "existence");
        const Admissibility a = delay::admissible_delay(L, M, m);
        *beta = a.beta;
        *delta_max = a.delta_max;
    });
}

int fbsde_admissible_horizon(double L, double M, double H, double beta, double v, double* horizon) {
    if (!horizon) return null_argument("horizon");
    return guarded([&] {
        if (L == 0.0 && M > 2.0) {
            // Both horizon inequalities hold for every T; report the search cap.
            (void)HurstParam{H};
            *horizon = 1e3;
            return;
        }
        double vv = v;
        if (!(vv > 0.0)) {
            require(L > 0.0, ErrorCode::domain, "default v needs L > 0");
            vv = 1.0 / (8.0 * L * M * std::exp(beta));
        }
        *horizon = delay::admissible_horizon(L, M, H, beta, vv);
    });
}

size_t fbsde_scenario_count(void) { return experiment::scenarios().size(); }

const char* fbsde_scenario_name(size_t index) {
    const auto all = experiment::scenarios();
    return index < all.size() ? all[index].name : nullptr;
}

const char* fbsde_scenario_description(size_t index) {
    const auto all = experiment::scenarios();
    return index < all.size() ? all[index].description : nullptr;
}

const char* fbsde_scenario_config(size_t index) {
    const auto& all = resolved_scenario_configs();
    return index < all.size() ? all[index].c_str() : nullptr;
}

fbsde_experiment* fbsde_experiment_create(const char* config_json) {
    auto* exp = new (std::nothrow) fbsde_experiment;
    if (!exp) return nullptr;
    try {
        exp->config = config_json ? config_json : "";
    } catch (const std::exception&) {
        delete exp;
        return nullptr;
    }
    return exp;
}

fbsde_experiment* fbsde_experiment_create_from_file(const char* path) {
    fbsde_experiment* exp = fbsde_experiment_create(path);
    if (exp) exp->from_file = true;
    return exp;
}

void fbsde_experiment_destroy(fbsde_experiment* exp) { delete exp; }

int fbsde_experiment_set_seed(fbsde_experiment* exp, uint64_t seed) {
    if (!exp) return null_argument("experiment");
    exp->options.seed = seed;
    return FBSDE_OK;
}

int fbsde_experiment_set_output_dir(fbsde_experiment* exp, const char* dir) {
    if (!exp) return null_argument("experiment");
    if (!dir) return null_argument("dir");
    return guarded([&] { exp->options.out_dir = std::string(dir); });
}

int fbsde_experiment_set_write_files(fbsde_experiment* exp, int enabled) {
    if (!exp) return null_argument("experiment");
    exp->options.write_files = enabled != 0;
    return FBSDE_OK;
}

int fbsde_experiment_run(fbsde_experiment* exp) {
    if (!exp) return null_argument("experiment");
    last_error.clear();
    last_code.clear();
    try {
        auto outcome = exp->from_file ? experiment::run_experiment_file(exp->config, exp->options)
                                      : experiment::run_experiment(exp->config, exp->options);
        exp->report = outcome.report.dump(2);
        exp->out_dir = outcome.out_dir;
        const auto& err = outcome.report["error"];
        if (err.is_object())
            record(outcome.status, err.value("code", "internal"), err.value("message", ""));
        return outcome.status;
    } catch (const std::exception& e) {
        return record(FBSDE_INTERNAL, "internal", e.what());
    }
}

const char* fbsde_experiment_report(const fbsde_experiment* exp) {
    return exp ? exp->report.c_str() : "";
}

const char* fbsde_experiment_output_dir(const fbsde_experiment* exp) {
    return exp ? exp->out_dir.c_str() : "";
}

int fbsde_paths_sample(double H, double horizon, int n_steps, int64_t n_paths, uint64_t seed,
                       const char* method, fbsde_paths** out) {
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] {
        const FbmModel model{HurstParam(H), TimeGrid(horizon, n_steps)};
        const auto m = parse_sampling_method(method ? method : "cholesky");
        auto* p = new fbsde_paths{sampler::sample_fbm(model, static_cast<Index>(n_paths), seed, m)};
        *out = p;
    });
}

void fbsde_paths_destroy(fbsde_paths* paths) { delete paths; }

int fbsde_paths_dims(const fbsde_paths* paths, int64_t* n_paths, int64_t* n_nodes) {
    if (!paths || !n_paths || !n_nodes) return null_argument("paths/n_paths/n_nodes");
    *n_paths = paths->ensemble.values.rows();
    *n_nodes = paths->ensemble.values.cols();
    return FBSDE_OK;
}

int fbsde_paths_row(const fbsde_paths* paths, int64_t p, double* out) {
    if (!paths || !out) return null_argument("paths/out");
    if (p < 0 || p >= paths->ensemble.values.rows())
        return record(FBSDE_VALIDATION, "invalid_argument", "path index out of range");
    for (Index c = 0; c < paths->ensemble.values.cols(); ++c) out[c] = paths->ensemble.values(p, c);
    return FBSDE_OK;
}

}  // extern "C"
