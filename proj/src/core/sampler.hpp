#pragma once

#include "core/kernel.hpp"
#include "core/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>

namespace fracbsde {

struct FbmModel {
    HurstParam hurst;
    TimeGrid grid;
};

enum class SamplingMethod { cholesky, hosking };

const char* to_string(SamplingMethod m) noexcept;
SamplingMethod parse_sampling_method(const std::string& name);

/// Seeded matrix of B^H samples, n_paths x (N+1), first column zero.
struct PathEnsemble {
    FbmModel model;
    std::uint64_t seed = 0;
    SamplingMethod method = SamplingMethod::cholesky;
    Matrix values;

    Index n_paths() const { return values.rows(); }
};

/// Forward coefficients eta_t = eta0 + int b ds + int sigma dB^H.
struct ForwardCoefficients {
    double eta0 = 0.0;
    DeterministicFn b = DeterministicFn::constant(0.0, FnRole::drift);
    DeterministicFn sigma = DeterministicFn::constant(1.0, FnRole::volatility);
};

/// Samples of the forward process on the grid.
///
/// `quasi_markov` marks ensembles driven by independent Gaussian increments
/// with the same marginal variances ||sigma||_t^2 as eta. They are the
/// regression ensembles of the backward solvers: conditional expectations
/// along them coincide with the Gaussian smoothing that defines the
/// fractional backward equation.
struct ForwardEnsemble {
    FbmModel model;
    ForwardCoefficients coefficients;
    std::uint64_t seed = 0;
    bool quasi_markov = false;
    Matrix values;

    Index n_paths() const { return values.rows(); }
};

namespace sampler {

/// One deterministic normal stream per (seed, path index).
std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t path);

/// Derives an independent master seed, e.g. for the regression ensemble.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

/// (N+1)x(N+1) covariance of B^H on the grid nodes.
Matrix fbm_covariance(const TimeGrid& grid, HurstParam H);

/// In-place lower Cholesky factor; throws FactorizationError with the pivot.
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a);

PathEnsemble sample_fbm_cholesky(const FbmModel& model, Index n_paths, std::uint64_t seed);
PathEnsemble sample_fbm_hosking(const FbmModel& model, Index n_paths, std::uint64_t seed);
PathEnsemble sample_fbm(const FbmModel& model, Index n_paths, std::uint64_t seed,
                        SamplingMethod method);

/// eta along each path with the cell-midpoint rule for b and sigma.
ForwardEnsemble simulate_forward(const ForwardCoefficients& coefficients, const PathEnsemble& paths);

/// Independent-increment ensemble with Var(increment_i) = ||sigma||^2_{i+1} - ||sigma||^2_i.
ForwardEnsemble simulate_quasi_markov(const ForwardCoefficients& coefficients,
                                      const FbmModel& model, Index n_paths, std::uint64_t seed);

/// Per-path sum_j f(cell_j) (B_{t_{j+1}} - B_{t_j}).
Vector wiener_integral(const DeterministicFn& f, const PathEnsemble& paths);

/// Running integrals X(t_i) for every node; n_paths x (N+1).
Matrix wiener_integral_paths(const DeterministicFn& f, const PathEnsemble& paths);

/// CSV `path_id,t,BH,eta`, 17 significant digits. `eta` may be null.
void write_ensemble_csv(std::ostream& out, const PathEnsemble& paths, const ForwardEnsemble* eta);

}  // namespace sampler
}  // namespace fracbsde
