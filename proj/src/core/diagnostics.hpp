#pragma once

// Weighted norms, dominance verdicts and the moment identities of the
// divergence integral, evaluated on ensembles.

#include "core/kernel.hpp"
#include "core/sampler.hpp"
#include "core/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fracbsde {

/// Norm exponent beta, interval [a, b] and H for the Z-weight |t|^(2H-1).
struct WeightedNormParams {
    double beta = 0.0;
    double a = 0.0;
    double b = 1.0;
    double H = 0.75;

    void validate() const;
};

struct DominanceReport {
    double fraction = 1.0;  ///< share of (path, time) points with Y1 <= Y2 + tol
    double worst = 0.0;     ///< max(Y1 - Y2), clamped at 0
    bool verdict = true;
};

struct IsometryResult {
    double mean = 0.0;
    double second_moment = 0.0;
    double expected_second_moment = 0.0;
    double z_mean = 0.0;
    double z_second = 0.0;

    bool passes(double z_max = 3.0) const;
};

struct ProductFormulaResult {
    double max_abs_z = 0.0;
    double t_worst = 0.0;
    double mean_at_end = 0.0;      ///< sample mean of X1(T) X2(T)
    double expected_at_end = 0.0;  ///< <f1, f2>_T
};

namespace diagnostics {

/// Columns of an ensemble sit at `times`; each cell [times[c], times[c+1]]
/// carries the ensemble mean square of column c (left-point rule) and the
/// weight is integrated exactly over the part of the cell inside [a, b].
double weighted_norm_y_sq(const Matrix& Y, std::span<const double> times,
                          const WeightedNormParams& params);
double weighted_norm_z_sq(const Matrix& Z, std::span<const double> times,
                          const WeightedNormParams& params);

double weighted_norm_y(const Matrix& Y, std::span<const double> times,
                       const WeightedNormParams& params);
double weighted_norm_z(const Matrix& Z, std::span<const double> times,
                       const WeightedNormParams& params);

/// Per-column ensemble means of X^2.
std::vector<double> column_mean_squares(const Matrix& X);

/// Same as the norms above but on precomputed column mean squares.
double weighted_sum_y(std::span<const double> mean_sq, std::span<const double> times,
                      const WeightedNormParams& params);
double weighted_sum_z(std::span<const double> mean_sq, std::span<const double> times,
                      const WeightedNormParams& params);

/// Pointwise comparison Y1 <= Y2 + tol_num over every (path, column).
DominanceReport dominance(const Matrix& Y1, const Matrix& Y2, double tol_num);

/// z-scores of the sample mean and second moment of sum f dB^H against 0
/// and <f, f>_T.
IsometryResult isometry_test(const DeterministicFn& f, const PathEnsemble& paths);

/// max |z| over grid t of mean X1(t)X2(t) - <f1, f2>_t with X_i = int f_i dB^H.
ProductFormulaResult product_formula_test(const DeterministicFn& f1, const DeterministicFn& f2,
                                          const PathEnsemble& paths);

/// Seeded piecewise-constant test functions on [0, T]: 1 to 8 pieces with
/// grid-aligned breaks and values in [-2, 2].
std::vector<DeterministicFn> random_piecewise_battery(std::size_t count, std::uint64_t seed,
                                                      const TimeGrid& grid);

}  // namespace diagnostics
}  // namespace fracbsde
