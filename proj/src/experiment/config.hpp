#pragma once

// Experiment configuration: JSON schema, presets and the resolved form that
// is echoed into report.json.

#include "core/delay_solver.hpp"
#include "core/sampler.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fracbsde::experiment {

using Json = nlohmann::json;

enum class Task { picard, comparison, isometry };

const char* to_string(Task t) noexcept;

/// Generator, terminal map and initial segments of one equation.
struct EquationSpec {
    std::string generator = "zero";
    std::optional<double> L;  ///< overrides the preset's constant
    Json table;               ///< custom-table payload
    std::string terminal = "id";
    std::string phi0 = "const:0";
    std::string psi0 = "const:0";
};

struct CheckSpec {
    std::string kind;
    Json params;  ///< kind-specific, already validated
};

struct OutputSpec {
    std::string dir = "out";
    bool emit_paths = false;
    bool emit_fields = false;
    int solution_paths = 256;  ///< rows of solution.csv; -1 = all paths
    bool trace_seconds = false;
};

struct ExperimentConfig {
    std::string scenario;  ///< empty for inline configs
    Task task = Task::picard;

    double H = 0.75;
    double T = 1.0;
    int N = 128;
    int delta_steps = 0;

    double eta0 = 0.0;
    std::string b = "const:0";
    std::string sigma = "const:1";

    EquationSpec equation;
    std::optional<EquationSpec> comparison;  ///< the dominating equation

    long long n_paths = 10000;
    long long fit_paths = 10000;
    std::uint64_t seed = 1;
    SamplingMethod sampler = SamplingMethod::cholesky;

    double tol = 1e-6;
    int max_iter = 50;
    int basis_degree = 2;
    double ridge = 1e-8;
    AdmissibilityMode mode = AdmissibilityMode::existence;
    std::optional<double> beta;
    std::optional<double> M;

    int isometry_count = 100;
    std::uint64_t isometry_seed = 5;

    std::vector<CheckSpec> checks;
    OutputSpec outputs;
};

/// Parses a config document. A "scenario" key pulls in the named library
/// config, which the remaining keys override (objects merge recursively).
/// Unknown keys and out-of-range values throw validation errors.
ExperimentConfig parse_config(const Json& doc);
ExperimentConfig parse_config_text(const std::string& text);

/// Fully resolved config; parse_config(to_json(c)) reproduces c.
Json to_json(const ExperimentConfig& config);

/// Git-style blob SHA-1 of the canonical resolved config without `outputs`.
std::string input_hash(const ExperimentConfig& config);

/// Number from a JSON number or a decimal string.
double parse_number(const Json& value, const std::string& where);

DeterministicFn make_function(const std::string& preset, FnRole role);
TerminalMap make_terminal(const std::string& preset);
GeneratorSpec make_generator(const EquationSpec& spec, double H, double T);

FbmModel make_model(const ExperimentConfig& config);
ForwardCoefficients make_forward(const ExperimentConfig& config);
DelayedBsdeProblem make_problem(const ExperimentConfig& config, const EquationSpec& equation);
PicardConfig make_picard_config(const ExperimentConfig& config);

}  // namespace fracbsde::experiment
