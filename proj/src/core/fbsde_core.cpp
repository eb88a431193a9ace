#include "core/fbsde_core.hpp"

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace fracbsde {

double TerminalMap::slope(double x) const {
    if (derivative) return derivative(x);
    const double step = 1e-5 * (1.0 + std::abs(x));
    return (h(x + step) - h(x - step)) / (2.0 * step);
}

TerminalMap TerminalMap::identity() {
    return {[](double x) { return x; }, [](double) { return 1.0; }, 1, "id"};
}

TerminalMap TerminalMap::square() {
    return {[](double x) { return x * x; }, [](double x) { return 2.0 * x; }, 2, "square"};
}

TerminalMap TerminalMap::call(double strike) {
    std::ostringstream os;
    os << "call:" << strike;
    return {[strike](double x) { return std::max(x - strike, 0.0); },
            [strike](double x) { return x > strike ? 1.0 : 0.0; }, 1, os.str()};
}

TerminalMap TerminalMap::affine(double a, double c) {
    std::ostringstream os;
    os << "affine:" << a << "," << c;
    return {[a, c](double x) { return a + c * x; }, [c](double) { return c; }, 1, os.str()};
}

TerminalMap TerminalMap::cosine() {
    return {[](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); }, 0, "cos"};
}

TerminalMap TerminalMap::zero() {
    return {[](double) { return 0.0; }, [](double) { return 0.0; }, 0, "zero"};
}

const char* to_string(Provenance p) noexcept {
    switch (p) {
        case Provenance::pde: return "pde";
        case Provenance::regression: return "regression";
        case Provenance::initial_segment: return "initial-segment";
    }
    return "unknown";
}

SolutionEnsemble::SolutionEnsemble(const TimeGrid& g, Index rows, Provenance p)
    : grid(g),
      Y(Matrix::Zero(rows, g.steps() + 1 + g.delay_steps())),
      Z(Matrix::Zero(rows, g.steps() + 1 + g.delay_steps())),
      provenance(p) {}

std::vector<double> SolutionEnsemble::times() const {
    const int k = segment();
    std::vector<double> out(static_cast<std::size_t>(grid.steps() + 1 + k));
    for (int c = 0; c < static_cast<int>(out.size()); ++c) out[c] = (c - k) * grid.dt();
    return out;
}

namespace fbsde {

namespace {

// Cumulative drift int_0^{t_i} b on the grid with the cell-midpoint rule.
std::vector<double> drift_on_grid(const DeterministicFn& b, const TimeGrid& grid) {
    const auto cells = b.cell_values(grid);
    std::vector<double> out(cells.size() + 1, 0.0);
    for (std::size_t i = 0; i < cells.size(); ++i) out[i + 1] = out[i] + cells[i] * grid.dt();
    return out;
}

// int_0^t b with the same piecewise-constant convention, t anywhere in [0, T].
double drift_to(const DeterministicFn& b, double t, const TimeGrid& grid) {
    const double dt = grid.dt();
    double acc = 0.0;
    for (int i = 0; i < grid.steps(); ++i) {
        const double lo = i * dt;
        if (lo >= t) break;
        acc += b((i + 0.5) * dt) * (std::min(lo + dt, t) - lo);
    }
    return acc;
}

double smoothed(const TerminalMap& h, double mean, double variance) {
    if (variance <= 0.0) return h(mean);
    return quadrature::gaussian_expectation(h.h, mean, std::sqrt(variance));
}

void check_finite(double v, const char* what, double t, double x) {
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << what << " is not finite at t=" << t << ", x=" << x;
        fail(ErrorCode::invalid_argument, os.str());
    }
}

// Solves a tridiagonal system in place (Thomas). sub[0] and sup[n-1] unused.
void thomas(std::vector<double>& sub, std::vector<double>& diag, std::vector<double>& sup,
            std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
}

void centered_derivative(const double* u, double* ux, int J, double dx) {
    for (int j = 1; j < J; ++j) ux[j] = (u[j + 1] - u[j - 1]) / (2.0 * dx);
    ux[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx);
    ux[J] = (3.0 * u[J] - 4.0 * u[J - 1] + u[J - 2]) / (2.0 * dx);
}

}  // namespace

double quasi_expectation(const TerminalMap& h, double t, double x, const ForwardCoefficients& fwd,
                         const FbmModel& model) {
    const TimeGrid& grid = model.grid;
    require(t >= 0.0 && t <= grid.horizon() * (1.0 + 1e-12), ErrorCode::domain, "t outside [0, T]");
    const double T = grid.horizon();
    const double shift = drift_to(fwd.b, T, grid) - drift_to(fwd.b, t, grid);
    const double var = kernel::sigma_norm_sq(fwd.sigma, T, model.hurst, grid) -
                       kernel::sigma_norm_sq(fwd.sigma, t, model.hurst, grid);
    return smoothed(h, x + shift, var);
}

ValueField solve_markovian_pde(const TerminalMap& h, const SpaceTimeFn& g,
                               const ForwardCoefficients& fwd, const FbmModel& model,
                               const PdeOptions& options) {
    const TimeGrid& grid = model.grid;
    const int N = grid.steps();
    const int J = options.space_steps;
    require(J >= 4, ErrorCode::invalid_argument, "PDE needs at least 4 space steps");
    require(options.width_sd > 0.0, ErrorCode::invalid_argument, "domain width must be positive");
    require(static_cast<bool>(h.h) && static_cast<bool>(g), ErrorCode::invalid_argument,
            "terminal map and driver must be set");
    kernel::validate_volatility(fwd.sigma, grid);

    const double dt = grid.dt();
    const auto norms = kernel::sigma_norm_sq_on_grid(fwd.sigma, model.hurst, grid);
    const auto diffusion = kernel::diffusion_cell_averages(fwd.sigma, model.hurst, grid);
    const auto drift_cells = fwd.b.cell_values(grid);
    const auto drift = drift_on_grid(fwd.b, grid);

    const double sd_T = std::sqrt(norms[N]);
    double mean_lo = fwd.eta0 + drift[0];
    double mean_hi = mean_lo;
    for (double d : drift) {
        mean_lo = std::min(mean_lo, fwd.eta0 + d);
        mean_hi = std::max(mean_hi, fwd.eta0 + d);
    }
    const double half = options.width_sd * std::max(sd_T, 1e-8);
    const double x_lo = mean_lo - half;
    const double dx = (mean_hi - mean_lo + 2.0 * half) / J;

    ValueField field{grid, std::vector<double>(static_cast<std::size_t>(J) + 1), Matrix(N + 1, J + 1),
                     Matrix(N + 1, J + 1)};
    for (int j = 0; j <= J; ++j) field.x[j] = x_lo + j * dx;
    field.x[J] = x_lo + J * dx;

    // Driver values on the full space-time grid.
    Matrix gv(N + 1, J + 1);
    for (int i = 0; i <= N; ++i) {
        for (int j = 0; j <= J; ++j) {
            const double v = g(grid.time(i), field.x[j]);
            check_finite(v, "driver", grid.time(i), field.x[j]);
            gv(i, j) = v;
        }
    }
    for (int j = 0; j <= J; ++j) {
        const double v = h(field.x[j]);
        check_finite(v, "terminal map", grid.horizon(), field.x[j]);
        field.u(N, j) = v;
    }

    // Dirichlet data: Gaussian smoothing of h plus the driver integrated
    // along the mean characteristic.
    auto boundary = [&](int i, double x) {
        double value = smoothed(h, x + drift[N] - drift[i], norms[N] - norms[i]);
        for (int m = i; m < N; ++m) {
            const double xa = x + drift[m] - drift[i];
            const double xb = x + drift[m + 1] - drift[i];
            value += 0.5 * dt * (g(grid.time(m), xa) + g(grid.time(m + 1), xb));
        }
        return value;
    };

    const int n = J - 1;
    std::vector<double> sub(n), diag(n), sup(n), rhs(n);
    for (int i = N - 1; i >= 0; --i) {
        const double a = diffusion[i];
        const double b = drift_cells[i];
        const double lo = a / (dx * dx) - b / (2.0 * dx);
        const double mid = -2.0 * a / (dx * dx);
        const double hi = a / (dx * dx) + b / (2.0 * dx);
        const double left = boundary(i, field.x[0]);
        const double right = boundary(i, field.x[J]);
        for (int r = 0; r < n; ++r) {
            const int j = r + 1;
            const double lu = lo * field.u(i + 1, j - 1) + mid * field.u(i + 1, j) +
                              hi * field.u(i + 1, j + 1);
            rhs[r] = field.u(i + 1, j) + 0.5 * dt * lu + 0.5 * dt * (gv(i, j) + gv(i + 1, j));
            sub[r] = -0.5 * dt * lo;
            diag[r] = 1.0 - 0.5 * dt * mid;
            sup[r] = -0.5 * dt * hi;
        }
        rhs[0] -= sub[0] * left;
        rhs[n - 1] -= sup[n - 1] * right;
        thomas(sub, diag, sup, rhs);
        field.u(i, 0) = left;
        field.u(i, J) = right;
        for (int r = 0; r < n; ++r) field.u(i, r + 1) = rhs[r];
    }
    for (int i = 0; i <= N; ++i) centered_derivative(&field.u(i, 0), &field.ux(i, 0), J, dx);
    for (Index k = 0; k < field.u.size(); ++k)
        require(std::isfinite(field.u.data()[k]), ErrorCode::numerical, "PDE produced non-finite values");
    return field;
}

void interpolate(const ValueField& field, int i, double x, double& u, double& ux) {
    const int J = static_cast<int>(field.x.size()) - 1;
    const double dx = field.dx();
    const double pos = (x - field.x[0]) / dx;
    const int s = std::clamp(static_cast<int>(std::floor(pos)) - 1, 0, J - 3);
    const double r = pos - s;  // offset from node s in units of dx
    // Lagrange weights on nodes s..s+3.
    const double w0 = -(r - 1.0) * (r - 2.0) * (r - 3.0) / 6.0;
    const double w1 = r * (r - 2.0) * (r - 3.0) / 2.0;
    const double w2 = -r * (r - 1.0) * (r - 3.0) / 2.0;
    const double w3 = r * (r - 1.0) * (r - 2.0) / 6.0;
    u = w0 * field.u(i, s) + w1 * field.u(i, s + 1) + w2 * field.u(i, s + 2) + w3 * field.u(i, s + 3);
    ux = w0 * field.ux(i, s) + w1 * field.ux(i, s + 1) + w2 * field.ux(i, s + 2) +
         w3 * field.ux(i, s + 3);
}

SolutionEnsemble evaluate_on_paths(const ValueField& field, const TerminalMap& h,
                                   const ForwardEnsemble& fwd, double max_extrapolated_share) {
    const TimeGrid& grid = field.grid;
    require(fwd.model.grid.steps() == grid.steps() &&
                std::abs(fwd.model.grid.horizon() - grid.horizon()) <= 1e-12 * grid.horizon(),
            ErrorCode::invalid_argument, "field and forward ensemble use different grids");
    const int N = grid.steps();
    const Index n = fwd.n_paths();
    SolutionEnsemble sol(TimeGrid(grid.horizon(), N), n, Provenance::pde);
    const auto sigma = fwd.coefficients.sigma.grid_values(grid);
    const double x_lo = field.x.front();
    const double x_hi = field.x.back();

    std::vector<std::size_t> outside(static_cast<std::size_t>(N), 0);
    parallel_for(static_cast<std::size_t>(N), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t ii = lo; ii < hi; ++ii) {
            const int i = static_cast<int>(ii);
            for (Index p = 0; p < n; ++p) {
                const double x = fwd.values(p, i);
                if (x < x_lo || x > x_hi) ++outside[ii];
                double u, ux;
                interpolate(field, i, x, u, ux);
                sol.Y(p, i) = u;
                sol.Z(p, i) = sigma[i] * ux;
            }
        }
    }, 1);
    for (Index p = 0; p < n; ++p) {
        const double x = fwd.values(p, N);
        sol.Y(p, N) = h(x);
        sol.Z(p, N) = sigma[N] * h.slope(x);
    }
    sol.evaluations = static_cast<std::size_t>(n) * static_cast<std::size_t>(N + 1);
    for (auto c : outside) sol.extrapolated += c;
    for (Index p = 0; p < n; ++p) {
        const double x = fwd.values(p, N);
        if (x < x_lo || x > x_hi) ++sol.extrapolated;
    }
    const double share = static_cast<double>(sol.extrapolated) / static_cast<double>(sol.evaluations);
    if (share > max_extrapolated_share) {
        std::ostringstream os;
        os << sol.extrapolated << " of " << sol.evaluations
           << " path evaluations fall outside the PDE domain";
        fail(ErrorCode::domain_truncation, os.str());
    }
    return sol;
}

AprioriReport apriori_estimate_check(const Matrix& Y, const Matrix& Z, const Matrix& g,
                                     const Vector& terminal, const TimeGrid& grid, HurstParam H,
                                     const KernelConstants& constants, double stat_tol) {
    require(constants.beta > 0.0, ErrorCode::domain, "the a-priori estimate needs beta > 0");
    constants.validate();
    const int N = grid.steps();
    const Index n = Y.rows();
    require(n >= 1 && Y.cols() == N + 1 && Z.rows() == n && Z.cols() == N + 1 && g.rows() == n &&
                g.cols() == N + 1 && terminal.size() == n,
            ErrorCode::invalid_argument, "a-priori check inputs do not match the grid");

    const double beta = constants.beta;
    const double p = H.weight_exponent();
    const double nn = static_cast<double>(n);
    const double dt = grid.dt();
    const double T = grid.horizon();
    const double terminal_term = std::exp(beta * T) * terminal.squaredNorm() / nn;

    AprioriReport report;
    double tail_y = 0.0, tail_z = 0.0, tail_g = 0.0;
    for (int i = N; i >= 0; --i) {
        if (i < N) {
            const double lo = i * dt, hi = (i + 1) * dt;
            tail_y += Y.col(i).squaredNorm() / nn * quadrature::exp_integral(lo, hi, beta);
            tail_z += Z.col(i).squaredNorm() / nn * quadrature::power_exp_integral(lo, hi, p, beta);
            tail_g += g.col(i).squaredNorm() / nn * quadrature::exp_integral(lo, hi, beta);
        }
        const double t = grid.time(i);
        const double lhs = std::exp(beta * t) * Y.col(i).squaredNorm() / nn + 0.5 * beta * tail_y +
                           2.0 / constants.M * tail_z;
        const double rhs = terminal_term + 2.0 / beta * tail_g;
        const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? INFINITY : 0.0);
        if (ratio > report.worst_ratio) {
            report.worst_ratio = ratio;
            report.t_worst = t;
        }
        if (!(lhs <= rhs * (1.0 + stat_tol))) report.satisfied = false;
        if (i == 0) {
            report.lhs = lhs;
            report.rhs = rhs;
        }
    }
    return report;
}

void write_field_csv(std::ostream& out, const ValueField& field) {
    out << "t,x,u,ux\n";
    for (int i = 0; i <= field.grid.steps(); ++i) {
        for (std::size_t j = 0; j < field.x.size(); ++j) {
            csv::put(out, field.grid.time(i));
            out << ',';
            csv::put(out, field.x[j]);
            out << ',';
            csv::put(out, field.u(i, static_cast<Index>(j)));
            out << ',';
            csv::put(out, field.ux(i, static_cast<Index>(j)));
            out << '\n';
        }
    }
}

}  // namespace fbsde
}  // namespace fracbsde
