#include "core/kernel.hpp"

#include "core/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fracbsde {

HurstParam::HurstParam(double h) : h_(h) {
    if (!(h > 0.5 && h < 1.0)) {
        std::ostringstream os;
        os << "Hurst parameter must lie in (1/2, 1), got " << h;
        fail(ErrorCode::domain, os.str());
    }
}

TimeGrid::TimeGrid(double horizon, int steps, int delay_steps)
    : horizon_(horizon), steps_(steps), delay_steps_(delay_steps) {
    require(std::isfinite(horizon) && horizon > 0.0, ErrorCode::domain,
            "time horizon must be positive");
    require(steps > 0, ErrorCode::domain, "step count must be positive");
    require(delay_steps >= 0 && delay_steps <= steps, ErrorCode::domain,
            "delay must be a whole number of steps in [0, N]");
}

DeterministicFn::DeterministicFn(Callable fn, FnRole role, std::string label)
    : fn_(std::move(fn)), role_(role), label_(std::move(label)) {
    require(static_cast<bool>(fn_), ErrorCode::invalid_argument, "empty deterministic function");
}

DeterministicFn DeterministicFn::constant(double c, FnRole role) {
    std::ostringstream os;
    os << "const:" << c;
    return DeterministicFn([c](double) { return c; }, role, os.str());
}

DeterministicFn DeterministicFn::affine(double a, double c, FnRole role) {
    std::ostringstream os;
    os << "affine:" << a << "," << c;
    return DeterministicFn([a, c](double t) { return a + c * t; }, role, os.str());
}

DeterministicFn DeterministicFn::indicator(double lo, double hi, FnRole role) {
    std::ostringstream os;
    os << "indicator:" << lo << "," << hi;
    return DeterministicFn([lo, hi](double t) { return (t >= lo && t <= hi) ? 1.0 : 0.0; }, role,
                           os.str());
}

DeterministicFn DeterministicFn::piecewise(std::vector<double> breaks, std::vector<double> values,
                                           FnRole role) {
    require(breaks.size() == values.size() + 1 && !values.empty(), ErrorCode::invalid_argument,
            "piecewise function needs one more break than values");
    require(std::is_sorted(breaks.begin(), breaks.end()), ErrorCode::invalid_argument,
            "piecewise breaks must be sorted");
    auto fn = [breaks = std::move(breaks), values = std::move(values)](double t) {
        if (t < breaks.front() || t > breaks.back()) return 0.0;
        auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
        auto j = static_cast<std::size_t>(std::distance(breaks.begin(), it));
        j = std::min(j == 0 ? 0 : j - 1, values.size() - 1);
        return values[j];
    };
    return DeterministicFn(std::move(fn), role, "piecewise");
}

std::vector<double> DeterministicFn::grid_values(const TimeGrid& grid) const {
    std::vector<double> out(static_cast<std::size_t>(grid.steps()) + 1);
    for (int i = 0; i <= grid.steps(); ++i) out[i] = fn_(grid.time(i));
    return out;
}

std::vector<double> DeterministicFn::cell_values(const TimeGrid& grid) const {
    std::vector<double> out(static_cast<std::size_t>(grid.steps()));
    const double dt = grid.dt();
    for (int i = 0; i < grid.steps(); ++i) out[i] = fn_((i + 0.5) * dt);
    return out;
}

void KernelConstants::validate() const {
    if (!(M > 2.0)) {
        std::ostringstream os;
        os << "ratio-bound constant M must exceed 2, got " << M;
        fail(ErrorCode::constant_violation, os.str());
    }
    require(beta >= 0.0, ErrorCode::constant_violation, "beta must be nonnegative");
    require(L >= 0.0, ErrorCode::constant_violation, "Lipschitz constant must be nonnegative");
}

namespace kernel {

namespace {

// Second antiderivative of phi: G'' = phi.
double second_antiderivative(double x, double two_h) { return 0.5 * std::pow(std::abs(x), two_h); }

// Number of cells needed to cover [0, t] on a grid of step dt.
std::size_t covering_cells(double t, double dt) {
    const double ratio = t / dt;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) < 1e-9 * std::max(1.0, ratio)) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::ceil(ratio));
}

}  // namespace

double phi(double x, HurstParam H) {
    require(x != 0.0, ErrorCode::domain, "phi is singular at 0");
    const double h = H.value();
    return h * (2.0 * h - 1.0) * std::pow(std::abs(x), 2.0 * h - 2.0);
}

double cell_pair_integral(double a, double b, double c, double d, HurstParam H) {
    const double two_h = 2.0 * H.value();
    return second_antiderivative(b - c, two_h) + second_antiderivative(a - d, two_h) -
           second_antiderivative(a - c, two_h) - second_antiderivative(b - d, two_h);
}

double inner_product_cells(std::span<const double> f_cells, std::span<const double> g_cells,
                           double dt, double t, HurstParam H) {
    require(t > 0.0, ErrorCode::domain, "inner product needs t > 0");
    const std::size_t n = covering_cells(t, dt);
    require(f_cells.size() >= n && g_cells.size() >= n, ErrorCode::invalid_argument,
            "cell values do not cover [0, t]");
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (f_cells[j] == 0.0) continue;
        const double a = j * dt;
        const double b = std::min((j + 1) * dt, t);
        double row = 0.0;
        for (std::size_t l = 0; l < n; ++l) {
            if (g_cells[l] == 0.0) continue;
            const double c = l * dt;
            const double d = std::min((l + 1) * dt, t);
            row += g_cells[l] * cell_pair_integral(a, b, c, d, H);
        }
        total += f_cells[j] * row;
    }
    return total;
}

double inner_product(const DeterministicFn& f, const DeterministicFn& g, double t, HurstParam H,
                     const TimeGrid& grid) {
    require(t > 0.0, ErrorCode::domain, "inner product needs t > 0");
    require(t <= grid.horizon() * (1.0 + 1e-12), ErrorCode::domain, "t beyond the grid horizon");
    const auto fc = f.cell_values(grid);
    const auto gc = g.cell_values(grid);
    return inner_product_cells(fc, gc, grid.dt(), t, H);
}

double sigma_norm_sq(const DeterministicFn& sigma, double t, HurstParam H, const TimeGrid& grid) {
    require(t >= 0.0 && t <= grid.horizon() * (1.0 + 1e-12), ErrorCode::domain,
            "t outside [0, T]");
    if (t == 0.0) return 0.0;
    return inner_product(sigma, sigma, t, H, grid);
}

std::vector<double> sigma_norm_sq_on_grid(const DeterministicFn& sigma, HurstParam H,
                                          const TimeGrid& grid) {
    const int n = grid.steps();
    const double two_h = 2.0 * H.value();
    const double scale = 0.5 * std::pow(grid.dt(), two_h);
    // Covariance of unit-step increments, gamma(m).
    std::vector<double> gamma(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m) {
        gamma[m] = scale * (std::pow(m + 1.0, two_h) + std::pow(std::abs(m - 1.0), two_h) -
                            2.0 * std::pow(static_cast<double>(m), two_h));
    }
    const auto s = sigma.cell_values(grid);
    std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        double cross = 0.0;
        for (int j = 0; j < i; ++j) cross += s[j] * gamma[i - j];
        out[i + 1] = out[i] + 2.0 * s[i] * cross + s[i] * s[i] * gamma[0];
    }
    return out;
}

double sigma_hat_partial(const DeterministicFn& sigma, double t, double upper, HurstParam H,
                         const TimeGrid& grid) {
    require(t >= 0.0 && t <= grid.horizon() * (1.0 + 1e-12), ErrorCode::domain,
            "t outside [0, T]");
    if (upper <= 0.0) return 0.0;
    upper = std::min(upper, t);
    const double h = H.value();
    const double p = 2.0 * h - 1.0;
    const double dt = grid.dt();
    const std::size_t n = covering_cells(upper, dt);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double a = j * dt;
        const double b = std::min((j + 1) * dt, upper);
        const double value = sigma((j + 0.5) * dt);
        total += value * h * (std::pow(t - a, p) - std::pow(std::max(t - b, 0.0), p));
    }
    return total;
}

double sigma_hat(const DeterministicFn& sigma, double t, HurstParam H, const TimeGrid& grid) {
    if (t == 0.0) return 0.0;
    return sigma_hat_partial(sigma, t, t, H, grid);
}

std::vector<double> diffusion_cell_averages(const DeterministicFn& sigma, HurstParam H,
                                            const TimeGrid& grid) {
    const auto norms = sigma_norm_sq_on_grid(sigma, H, grid);
    std::vector<double> out(static_cast<std::size_t>(grid.steps()));
    for (int i = 0; i < grid.steps(); ++i) out[i] = (norms[i + 1] - norms[i]) / (2.0 * grid.dt());
    return out;
}

void validate_volatility(const DeterministicFn& sigma, const TimeGrid& grid) {
    double sign = 0.0;
    auto check = [&](double t) {
        const double v = sigma(t);
        if (!std::isfinite(v) || v == 0.0) {
            std::ostringstream os;
            os << "volatility vanishes or is not finite at t=" << t;
            fail(ErrorCode::invalid_coefficient, os.str());
        }
        const double s = v > 0.0 ? 1.0 : -1.0;
        if (sign == 0.0) sign = s;
        if (s != sign) {
            std::ostringstream os;
            os << "volatility changes sign at t=" << t;
            fail(ErrorCode::invalid_coefficient, os.str());
        }
    };
    for (int i = 0; i <= grid.steps(); ++i) check(grid.time(i));
    for (int i = 0; i < grid.steps(); ++i) check((i + 0.5) * grid.dt());
}

double ratio_bound(const DeterministicFn& sigma, HurstParam H, const TimeGrid& grid) {
    validate_volatility(sigma, grid);
    const double p = H.weight_exponent();
    double worst = 1.0;
    for (int i = 1; i <= grid.steps(); ++i) {
        const double s = grid.time(i);
        const double rho = sigma_hat(sigma, s, H, grid) / (sigma(s) * std::pow(s, p));
        if (!(rho > 0.0) || !std::isfinite(rho)) {
            std::ostringstream os;
            os << "sigma_hat/sigma is not positive at s=" << s;
            fail(ErrorCode::invalid_coefficient, os.str());
        }
        worst = std::max({worst, rho, 1.0 / rho});
    }
    return std::max(worst, 2.0 + ratio_bound_margin);
}

}  // namespace kernel
}  // namespace fracbsde
