#pragma once

// Deterministic analytics of the fBm kernel phi(x) = H(2H-1)|x|^(2H-2).
//
// Every integral against the kernel is evaluated in closed form per grid
// cell, with integrands treated as piecewise constant (value taken at the
// cell midpoint). Over a rectangle of cells the double integral of phi(u-v)
// is G(b-c) + G(a-d) - G(a-c) - G(b-d) with G(x) = |x|^(2H)/2.

#include "core/types.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fracbsde {

class HurstParam {
public:
    /// Rejects anything outside the open interval (1/2, 1).
    explicit HurstParam(double h);

    double value() const noexcept { return h_; }
    /// 2H - 1, the exponent of the Z-weight t^(2H-1).
    double weight_exponent() const noexcept { return 2.0 * h_ - 1.0; }

private:
    double h_;
};

/// Uniform grid t_i = i*dt on [0, T]; delay delta = delay_steps * dt.
class TimeGrid {
public:
    TimeGrid(double horizon, int steps, int delay_steps = 0);

    double horizon() const noexcept { return horizon_; }
    int steps() const noexcept { return steps_; }
    double dt() const noexcept { return horizon_ / steps_; }
    int delay_steps() const noexcept { return delay_steps_; }
    double delay() const noexcept { return delay_steps_ * dt(); }
    bool has_delay() const noexcept { return delay_steps_ > 0; }
    double time(int i) const noexcept { return i * dt(); }

    TimeGrid with_delay(int delay_steps) const { return TimeGrid(horizon_, steps_, delay_steps); }

private:
    double horizon_;
    int steps_;
    int delay_steps_;
};

enum class FnRole { drift, volatility, initial_y, initial_z, test };

/// A deterministic function of time on [-delta, T].
class DeterministicFn {
public:
    using Callable = std::function<double(double)>;

    DeterministicFn(Callable fn, FnRole role, std::string label = {});

    static DeterministicFn constant(double c, FnRole role = FnRole::test);
    /// a + c*t
    static DeterministicFn affine(double a, double c, FnRole role = FnRole::test);
    /// Indicator of [lo, hi].
    static DeterministicFn indicator(double lo, double hi, FnRole role = FnRole::test);
    /// Piecewise constant: values[j] on [breaks[j], breaks[j+1]).
    static DeterministicFn piecewise(std::vector<double> breaks, std::vector<double> values,
                                     FnRole role = FnRole::test);

    double operator()(double t) const { return fn_(t); }
    FnRole role() const noexcept { return role_; }
    const std::string& label() const noexcept { return label_; }

    /// Values at the grid nodes t_0..t_N.
    std::vector<double> grid_values(const TimeGrid& grid) const;
    /// Values at the cell midpoints (t_i + t_{i+1})/2, i = 0..N-1.
    std::vector<double> cell_values(const TimeGrid& grid) const;

private:
    Callable fn_;
    FnRole role_;
    std::string label_;
};

/// Constants shared by the admissibility results and the a-priori estimate.
struct KernelConstants {
    double M = 2.5;
    double beta = 0.0;
    double L = 0.0;

    void validate() const;
};

namespace kernel {

/// Margin added to the clamped ratio-bound constant: M >= 2 + 1e-6.
inline constexpr double ratio_bound_margin = 1e-6;

double phi(double x, HurstParam H);

/// Integral of phi(u-v) over [a,b] x [c,d].
double cell_pair_integral(double a, double b, double c, double d, HurstParam H);

/// <f, g>_t for piecewise-constant f, g given by their cell values on a
/// uniform grid of step dt. t need not be grid aligned.
double inner_product_cells(std::span<const double> f_cells, std::span<const double> g_cells,
                           double dt, double t, HurstParam H);

double inner_product(const DeterministicFn& f, const DeterministicFn& g, double t, HurstParam H,
                     const TimeGrid& grid);

/// ||sigma||_t^2, zero at t = 0.
double sigma_norm_sq(const DeterministicFn& sigma, double t, HurstParam H, const TimeGrid& grid);

/// ||sigma||^2 at every grid node, O(N^2).
std::vector<double> sigma_norm_sq_on_grid(const DeterministicFn& sigma, HurstParam H,
                                          const TimeGrid& grid);

/// sigma_hat_t = int_0^t phi(t-v) sigma_v dv, with sigma_hat(0) = 0.
double sigma_hat(const DeterministicFn& sigma, double t, HurstParam H, const TimeGrid& grid);

/// int_0^upper phi(t-v) sigma_v dv for upper <= t. With upper = t - delta this
/// is the weight that the delayed state picks up under the derivative.
double sigma_hat_partial(const DeterministicFn& sigma, double t, double upper, HurstParam H,
                         const TimeGrid& grid);

/// Cell averages of sigma_hat*sigma, i.e. (||sigma||^2_{i+1} - ||sigma||^2_i) / (2 dt).
std::vector<double> diffusion_cell_averages(const DeterministicFn& sigma, HurstParam H,
                                            const TimeGrid& grid);

/// Throws invalid_coefficient unless sigma is nonzero with constant sign at
/// every grid node and cell midpoint.
void validate_volatility(const DeterministicFn& sigma, const TimeGrid& grid);

/// Smallest M with s^(2H-1)/M <= sigma_hat_s/sigma_s <= M s^(2H-1) on the
/// grid, clamped from below to 2 + ratio_bound_margin.
double ratio_bound(const DeterministicFn& sigma, HurstParam H, const TimeGrid& grid);

}  // namespace kernel
}  // namespace fracbsde
