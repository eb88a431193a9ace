#pragma once

// sample -> solve -> diagnose pipeline behind `fracbsde run`.

#include "experiment/config.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace fracbsde::experiment {

/// Process exit codes and C API status codes.
enum Status : int {
    status_ok = 0,
    status_internal = 1,
    status_validation = 2,
    status_numerical = 3,
    status_acceptance = 4,
};

struct RunOptions {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    bool write_files = true;
};

struct RunOutcome {
    int status = status_ok;
    Json report;
    std::string out_dir;
};

/// Never throws: every failure is mapped to a status and recorded in
/// report["error"]. report.json is written whenever the output directory is
/// usable.
RunOutcome run_experiment(const std::string& config_text, const RunOptions& options = {});

/// Same as run_experiment; an unreadable file is an io error (status 2).
RunOutcome run_experiment_file(const std::string& path, const RunOptions& options = {});

}  // namespace fracbsde::experiment
