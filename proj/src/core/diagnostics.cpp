#include "core/diagnostics.hpp"

#include "core/error.hpp"
#include "core/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace fracbsde {

void WeightedNormParams::validate() const {
    require(a < b, ErrorCode::domain, "weighted norm interval needs a < b");
    require(beta >= 0.0, ErrorCode::domain, "beta must be nonnegative");
    (void)HurstParam(H);
}

bool IsometryResult::passes(double z_max) const {
    return std::abs(z_mean) <= z_max && std::abs(z_second) <= z_max;
}

namespace diagnostics {

namespace {

template <typename Weight>
double weighted_sum(std::span<const double> mean_sq, std::span<const double> times,
                    const WeightedNormParams& params, Weight&& weight) {
    params.validate();
    require(mean_sq.size() == times.size(), ErrorCode::invalid_argument,
            "ensemble columns and time stamps differ in count");
    double total = 0.0;
    for (std::size_t c = 0; c + 1 < times.size(); ++c) {
        const double lo = std::max(times[c], params.a);
        const double hi = std::min(times[c + 1], params.b);
        if (hi <= lo || mean_sq[c] == 0.0) continue;
        total += mean_sq[c] * weight(lo, hi);
    }
    return total;
}

// Standard error that treats an exactly vanishing statistic as z = 0.
double z_score(double diff, double se) {
    if (diff == 0.0) return 0.0;
    if (se == 0.0) return std::copysign(std::numeric_limits<double>::infinity(), diff);
    return diff / se;
}

}  // namespace

std::vector<double> column_mean_squares(const Matrix& X) {
    std::vector<double> out(static_cast<std::size_t>(X.cols()), 0.0);
    if (X.rows() == 0) return out;
    for (Index c = 0; c < X.cols(); ++c) out[c] = X.col(c).squaredNorm() / static_cast<double>(X.rows());
    return out;
}

double weighted_sum_y(std::span<const double> mean_sq, std::span<const double> times,
                      const WeightedNormParams& params) {
    return weighted_sum(mean_sq, times, params, [&](double lo, double hi) {
        return quadrature::exp_integral(lo, hi, params.beta);
    });
}

double weighted_sum_z(std::span<const double> mean_sq, std::span<const double> times,
                      const WeightedNormParams& params) {
    const double p = 2.0 * params.H - 1.0;
    return weighted_sum(mean_sq, times, params, [&](double lo, double hi) {
        return quadrature::power_exp_integral(lo, hi, p, params.beta);
    });
}

double weighted_norm_y_sq(const Matrix& Y, std::span<const double> times,
                          const WeightedNormParams& params) {
    return weighted_sum_y(column_mean_squares(Y), times, params);
}

double weighted_norm_z_sq(const Matrix& Z, std::span<const double> times,
                          const WeightedNormParams& params) {
    return weighted_sum_z(column_mean_squares(Z), times, params);
}

double weighted_norm_y(const Matrix& Y, std::span<const double> times,
                       const WeightedNormParams& params) {
    return std::sqrt(weighted_norm_y_sq(Y, times, params));
}

double weighted_norm_z(const Matrix& Z, std::span<const double> times,
                       const WeightedNormParams& params) {
    return std::sqrt(weighted_norm_z_sq(Z, times, params));
}

DominanceReport dominance(const Matrix& Y1, const Matrix& Y2, double tol_num) {
    if (Y1.rows() != Y2.rows() || Y1.cols() != Y2.cols()) {
        std::ostringstream os;
        os << "dominance needs equal shapes, got " << Y1.rows() << "x" << Y1.cols() << " and "
           << Y2.rows() << "x" << Y2.cols();
        fail(ErrorCode::invalid_argument, os.str());
    }
    require(tol_num >= 0.0, ErrorCode::invalid_argument, "tol_num must be nonnegative");
    DominanceReport out;
    const double total = static_cast<double>(Y1.size());
    if (total == 0.0) return out;
    std::size_t ok = 0;
    double worst = 0.0;
    for (Index p = 0; p < Y1.rows(); ++p) {
        for (Index c = 0; c < Y1.cols(); ++c) {
            const double gap = Y1(p, c) - Y2(p, c);
            if (gap <= tol_num) ++ok;
            worst = std::max(worst, gap);
        }
    }
    out.fraction = static_cast<double>(ok) / total;
    out.worst = worst;
    out.verdict = ok == static_cast<std::size_t>(Y1.size());
    return out;
}

IsometryResult isometry_test(const DeterministicFn& f, const PathEnsemble& paths) {
    const Vector x = sampler::wiener_integral(f, paths);
    const double n = static_cast<double>(x.size());
    require(x.size() >= 2, ErrorCode::invalid_argument, "isometry test needs at least 2 paths");
    const TimeGrid& grid = paths.model.grid;

    IsometryResult r;
    r.mean = x.mean();
    const Vector sq = x.array().square();
    r.second_moment = sq.mean();
    r.expected_second_moment =
        kernel::inner_product(f, f, grid.horizon(), paths.model.hurst, grid);
    const double sd_x = std::sqrt((x.array() - r.mean).square().sum() / (n - 1.0));
    const double sd_sq = std::sqrt((sq.array() - r.second_moment).square().sum() / (n - 1.0));
    r.z_mean = z_score(r.mean, sd_x / std::sqrt(n));
    r.z_second = z_score(r.second_moment - r.expected_second_moment, sd_sq / std::sqrt(n));
    return r;
}

ProductFormulaResult product_formula_test(const DeterministicFn& f1, const DeterministicFn& f2,
                                          const PathEnsemble& paths) {
    require(paths.n_paths() >= 2, ErrorCode::invalid_argument,
            "product formula test needs at least 2 paths");
    const TimeGrid& grid = paths.model.grid;
    const Matrix x1 = sampler::wiener_integral_paths(f1, paths);
    const Matrix x2 = sampler::wiener_integral_paths(f2, paths);
    const auto c1 = f1.cell_values(grid);
    const auto c2 = f2.cell_values(grid);
    const double n = static_cast<double>(paths.n_paths());

    ProductFormulaResult r;
    for (int i = 1; i <= grid.steps(); ++i) {
        const Vector prod = x1.col(i).cwiseProduct(x2.col(i));
        const double mean = prod.mean();
        const double sd = std::sqrt((prod.array() - mean).square().sum() / (n - 1.0));
        const double expected =
            kernel::inner_product_cells(c1, c2, grid.dt(), grid.time(i), paths.model.hurst);
        const double z = z_score(mean - expected, sd / std::sqrt(n));
        if (std::abs(z) > r.max_abs_z) {
            r.max_abs_z = std::abs(z);
            r.t_worst = grid.time(i);
        }
        if (i == grid.steps()) {
            r.mean_at_end = mean;
            r.expected_at_end = expected;
        }
    }
    return r;
}

std::vector<DeterministicFn> random_piecewise_battery(std::size_t count, std::uint64_t seed,
                                                      const TimeGrid& grid) {
    std::vector<DeterministicFn> out;
    out.reserve(count);
    const int n = grid.steps();
    for (std::size_t k = 0; k < count; ++k) {
        auto rng = sampler::path_stream(seed, k);
        const int pieces = std::uniform_int_distribution<int>(1, std::min(8, n))(rng);
        std::set<int> cuts;
        while (static_cast<int>(cuts.size()) < pieces - 1)
            cuts.insert(std::uniform_int_distribution<int>(1, n - 1)(rng));
        std::vector<double> breaks{0.0};
        for (int c : cuts) breaks.push_back(grid.time(c));
        breaks.push_back(grid.horizon());
        std::vector<double> values(static_cast<std::size_t>(pieces));
        std::uniform_real_distribution<double> unif(-2.0, 2.0);
        for (auto& v : values) v = unif(rng);
        out.push_back(DeterministicFn::piecewise(std::move(breaks), std::move(values)));
    }
    return out;
}

}  // namespace diagnostics
}  // namespace fracbsde
