#pragma once

// The non-delayed building block -dY = g(t, eta_t) dt - Z dB^H, Y_T = h(eta_T),
// solved through its parabolic PDE
//   u_t + sigma_hat*sigma u_xx + b u_x + g = 0,  u(T, .) = h,
// with Y = u(t, eta_t) and Z = sigma_t u_x(t, eta_t).

#include "core/kernel.hpp"
#include "core/regression.hpp"
#include "core/sampler.hpp"
#include "core/types.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fracbsde {

/// Terminal map h, assumed smooth with polynomial growth of the declared degree.
struct TerminalMap {
    std::function<double(double)> h;
    std::function<double(double)> derivative;  ///< may be empty: central difference
    int growth_degree = 1;
    std::string label;

    double operator()(double x) const { return h(x); }
    double slope(double x) const;

    static TerminalMap identity();
    static TerminalMap square();
    /// max(x - k, 0)
    static TerminalMap call(double strike);
    /// a + c x
    static TerminalMap affine(double a, double c);
    static TerminalMap cosine();
    static TerminalMap zero();
};

/// u and u_x on a uniform spatial grid x_0..x_J for every time node.
struct ValueField {
    TimeGrid grid;
    std::vector<double> x;
    Matrix u;   ///< (N+1) x (J+1)
    Matrix ux;  ///< (N+1) x (J+1)

    double dx() const { return x[1] - x[0]; }
};

struct PdeOptions {
    int space_steps = 400;
    double width_sd = 6.0;  ///< half-width of the domain in forward standard deviations
};

using SpaceTimeFn = std::function<double(double t, double x)>;

enum class Provenance { pde, regression, initial_segment };

const char* to_string(Provenance p) noexcept;

/// Per-path, per-time (Y, Z). Column c holds time (c - k) dt, so columns
/// 0..k-1 are the initial segment on [-delta, 0) and column k + i is t_i.
///
/// Solutions built by the regression solvers also carry the same quantities
/// on the regression ensemble (`Y_fit`, `Z_fit`) and the per-step fits of
/// the conditional expectation (`fits[i]` for time t_i, i < N).
struct SolutionEnsemble {
    /// Zero-filled ensemble of `rows` paths on every column of `grid`.
    SolutionEnsemble(const TimeGrid& grid, Index rows, Provenance provenance);
    SolutionEnsemble() : SolutionEnsemble(TimeGrid(1.0, 1), 0, Provenance::pde) {}

    TimeGrid grid;
    Matrix Y;
    Matrix Z;
    Provenance provenance = Provenance::pde;

    Matrix Y_fit;
    Matrix Z_fit;
    std::vector<RegressionFit> fits;

    std::size_t evaluations = 0;
    std::size_t extrapolated = 0;

    int segment() const noexcept { return grid.delay_steps(); }
    Index column(int i) const noexcept { return segment() + i; }
    /// Time stamp of every column, from -delta to T.
    std::vector<double> times() const;
    /// Columns for t_0..t_N only.
    Matrix Y_on_grid() const { return Y.rightCols(grid.steps() + 1); }
    Matrix Z_on_grid() const { return Z.rightCols(grid.steps() + 1); }
};

/// Both sides of the a-priori estimate at every grid time; `lhs`/`rhs` are
/// reported at t = 0, `worst_ratio` is max_t lhs/rhs.
struct AprioriReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double worst_ratio = 0.0;
    double t_worst = 0.0;
    bool satisfied = true;
};

namespace fbsde {

ValueField solve_markovian_pde(const TerminalMap& h, const SpaceTimeFn& g,
                               const ForwardCoefficients& fwd, const FbmModel& model,
                               const PdeOptions& options = {});

/// E h(x + int_t^T b + N(0, ||sigma||_T^2 - ||sigma||_t^2)) with 64-point
/// Gauss-Hermite; h(x) when the variance vanishes.
double quasi_expectation(const TerminalMap& h, double t, double x, const ForwardCoefficients& fwd,
                         const FbmModel& model);

/// Y = u(t, eta), Z = sigma(t) u_x(t, eta) by 4-point Lagrange interpolation.
/// The terminal slice is set to h(eta_T) and sigma_T h'(eta_T) directly.
/// More than `max_extrapolated_share` of evaluations outside the domain is a
/// domain_truncation error.
SolutionEnsemble evaluate_on_paths(const ValueField& field, const TerminalMap& h,
                                   const ForwardEnsemble& fwd,
                                   double max_extrapolated_share = 0.01);

/// Interpolated u and u_x at a single point of time node i.
void interpolate(const ValueField& field, int i, double x, double& u, double& ux);

/// Checks
///   E e^{bt}|Y_t|^2 + b/2 int_t^T e^{bs}E|Y|^2 + 2/M int_t^T e^{bs}s^{2H-1}E|Z|^2
///     <= e^{bT}E|h|^2 + 2/b int_t^T e^{bs}E|g|^2
/// at every grid time. Y, Z, g are n x (N+1) on t_0..t_N; `terminal` holds h(eta_T).
AprioriReport apriori_estimate_check(const Matrix& Y, const Matrix& Z, const Matrix& g,
                                     const Vector& terminal, const TimeGrid& grid, HurstParam H,
                                     const KernelConstants& constants, double stat_tol = 0.05);

/// CSV `t,x,u,ux`.
void write_field_csv(std::ostream& out, const ValueField& field);

}  // namespace fbsde
}  // namespace fracbsde
