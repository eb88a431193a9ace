#include "core/delay_solver.hpp"

#include "core/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace fracbsde {

namespace {

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();
constexpr double inf_value = std::numeric_limits<double>::infinity();

}  // namespace

GeneratorSpec GeneratorSpec::zero() {
    GeneratorSpec g;
    g.f = [](double, double, double, double, double, double) { return 0.0; };
    g.monotone_in_y_delay = true;
    g.label = "zero";
    return g;
}

GeneratorSpec GeneratorSpec::constant(double c) {
    GeneratorSpec g;
    g.f = [c](double, double, double, double, double, double) { return c; };
    g.monotone_in_y_delay = true;
    std::ostringstream os;
    os << "const:" << c;
    g.label = os.str();
    return g;
}

GeneratorSpec GeneratorSpec::linear_y(double a) {
    GeneratorSpec g;
    g.f = [a](double, double, double y, double, double, double) { return a * y; };
    g.uses_y = true;
    g.L = a * a;
    g.monotone_in_y_delay = true;
    std::ostringstream os;
    os << "linear_y:" << a;
    g.label = os.str();
    return g;
}

GeneratorSpec GeneratorSpec::linear_delay(double a) {
    GeneratorSpec g;
    g.f = [a](double, double, double, double, double yd, double) { return a * yd; };
    g.uses_y_delay = true;
    g.L = a * a;
    g.monotone_in_y_delay = a >= 0.0;
    std::ostringstream os;
    os << "linear_delay:" << a;
    g.label = os.str();
    return g;
}

GeneratorSpec GeneratorSpec::example43(double H, double T, double shift) {
    const double p = 2.0 * H - 1.0;
    GeneratorSpec g;
    g.f = [p, shift](double t, double, double y, double z, double yd, double) {
        return y + std::pow(t, p) * z + yd + shift;
    };
    g.uses_y = g.uses_z = g.uses_y_delay = true;
    g.L = 3.0 * std::max(1.0, std::pow(T, p));
    g.monotone_in_y_delay = true;
    g.label = shift < 0.0 ? "example43_minus" : "example43_plus";
    return g;
}

void DelayedBsdeProblem::validate() const {
    require(static_cast<bool>(generator.f), ErrorCode::invalid_argument, "generator is not set");
    require(static_cast<bool>(terminal.h), ErrorCode::invalid_argument, "terminal map is not set");
    require(generator.L >= 0.0 && std::isfinite(generator.L), ErrorCode::constant_violation,
            "Lipschitz constant must be finite and nonnegative");
    kernel::validate_volatility(forward.sigma, model.grid);
    const TimeGrid& grid = model.grid;
    for (int c = 0; c < grid.delay_steps(); ++c) {
        const double t = (c - grid.delay_steps()) * grid.dt();
        if (!std::isfinite(phi0(t)) || !std::isfinite(psi0(t))) {
            std::ostringstream os;
            os << "initial segment is not finite at t=" << t;
            fail(ErrorCode::invalid_argument, os.str());
        }
    }
}

std::vector<double> IterationTrace::ratios() const {
    std::vector<double> out;
    for (std::size_t n = 1; n < records.size(); ++n) out.push_back(records[n].ratio);
    return out;
}

const char* to_string(AdmissibilityMode m) noexcept {
    switch (m) {
        case AdmissibilityMode::existence: return "existence";
        case AdmissibilityMode::comparison: return "comparison";
        case AdmissibilityMode::horizon: return "horizon";
    }
    return "unknown";
}

AdmissibilityMode parse_admissibility_mode(const std::string& name) {
    if (name == "existence") return AdmissibilityMode::existence;
    if (name == "comparison") return AdmissibilityMode::comparison;
    if (name == "horizon") return AdmissibilityMode::horizon;
    fail(ErrorCode::invalid_argument, "unknown solver mode '" + name + "'");
}

void PicardConfig::validate() const {
    require(tol > 0.0 && std::isfinite(tol), ErrorCode::invalid_argument, "tol must be positive");
    require(max_iter >= 1, ErrorCode::invalid_argument, "max_iter must be at least 1");
    basis.validate();
    if (beta) require(*beta > 0.0 && std::isfinite(*beta), ErrorCode::constant_violation,
                      "beta must be positive");
    if (M) require(*M > 2.0, ErrorCode::constant_violation, "ratio-bound constant M must exceed 2");
    if (v) require(*v > 0.0, ErrorCode::constant_violation, "v must be positive");
}

namespace delay {

Admissibility admissible_delay(double L, double M, AdmissibilityMode mode) {
    require(std::isfinite(L) && L >= 0.0, ErrorCode::constant_violation,
            "Lipschitz constant must be nonnegative");
    if (!(M > 2.0)) {
        std::ostringstream os;
        os << "ratio-bound constant M must exceed 2, got " << M;
        fail(ErrorCode::constant_violation, os.str());
    }
    require(mode != AdmissibilityMode::horizon, ErrorCode::invalid_argument,
            "admissible_delay takes the existence or comparison mode");
    const double factor = mode == AdmissibilityMode::existence ? 2.0 : 8.0;
    Admissibility out;
    out.beta = factor * L * M * std::numbers::e + 4.0 / M;
    out.delta_max = 1.0 / out.beta;
    return out;
}

double admissible_horizon(double L, double M, double H, double beta, double v, double step) {
    require(std::isfinite(L) && L > 0.0, ErrorCode::constant_violation, "horizon bound needs L > 0");
    require(M > 2.0, ErrorCode::constant_violation, "ratio-bound constant M must exceed 2");
    require(beta > 1.0, ErrorCode::constant_violation, "horizon bound needs beta > 1");
    require(v > 0.0 && std::isfinite(v), ErrorCode::constant_violation, "v must be positive");
    require(step >= 0.0, ErrorCode::invalid_argument, "grid step must be nonnegative");
    const HurstParam hp(H);
    const double q = 2.0 - 2.0 * hp.value();
    auto first = [&](double T) { return L * M * v * std::exp(beta * T); };
    auto second = [&](double T) {
        const double s = T + 2.0 * std::pow(T, q) / q;
        return 8.0 * L * L * L / v * M * std::exp(beta * T) * s * s;
    };
    auto feasible = [&](double T) { return first(T) < 0.25 && second(T) < 0.25; };
    auto violated = [&](double T) {
        std::ostringstream os;
        os << "no admissible horizon: ";
        if (!(first(T) < 0.25))
            os << "L M v e^{beta T} = " << first(T) << " >= 1/4";
        else
            os << "(8 L^3/v) M e^{beta T} (T + 2T^{2-2H}/(2-2H))^2 = " << second(T) << " >= 1/4";
        os << " at T = " << T;
        return os.str();
    };

    constexpr double cap = 1e3;
    double result;
    if (feasible(cap)) {
        result = cap;
    } else {
        double lo = 0.0, hi = cap;
        for (int it = 0; it < 400 && hi - lo > 1e-300; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            (feasible(mid) ? lo : hi) = mid;
        }
        if (!(lo > 0.0)) fail(ErrorCode::infeasible, violated(hi));
        result = lo;
    }
    if (step > 0.0) {
        const double snapped = std::floor(result / step) * step;
        if (snapped < step) fail(ErrorCode::infeasible, violated(step));
        result = snapped;
    }
    return result;
}

namespace {

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

std::vector<double> column(const Matrix& m, Index c) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (Index p = 0; p < m.rows(); ++p) out[p] = m(p, c);
    return out;
}

void check_shapes(const DelayedBsdeProblem& problem, const SolutionEnsemble& frozen,
                  const ForwardEnsemble& eval, const ForwardEnsemble& fit) {
    const TimeGrid& grid = problem.model.grid;
    const Index cols = grid.steps() + 1 + grid.delay_steps();
    auto same_grid = [&](const TimeGrid& g) {
        return g.steps() == grid.steps() &&
               std::abs(g.horizon() - grid.horizon()) <= 1e-12 * grid.horizon();
    };
    require(same_grid(eval.model.grid) && same_grid(fit.model.grid), ErrorCode::invalid_argument,
            "forward ensembles and problem use different grids");
    require(frozen.Y.cols() == cols && frozen.Z.cols() == cols &&
                frozen.Y.rows() == eval.n_paths() && frozen.Z.rows() == eval.n_paths(),
            ErrorCode::invalid_argument, "frozen iterate does not match the evaluation ensemble");
    require(frozen.Y_fit.cols() == cols && frozen.Z_fit.cols() == cols &&
                frozen.Y_fit.rows() == fit.n_paths() && frozen.Z_fit.rows() == fit.n_paths(),
            ErrorCode::invalid_argument, "frozen iterate does not match the regression ensemble");
}

[[noreturn]] void generator_failure(const GeneratorSpec& gen, double t, double x, double y, double z,
                                    double yd, double zd, double value) {
    std::ostringstream os;
    os << "generator '" << gen.label << "' returned " << value << " at (t=" << t << ", x=" << x
       << ", y=" << y << ", z=" << z << ", y_delay=" << yd << ", z_delay=" << zd << ")";
    fail(ErrorCode::generator, os.str());
}

void fill_segment(const DelayedBsdeProblem& problem, Matrix& Y, Matrix& Z) {
    const TimeGrid& grid = problem.model.grid;
    const int k = grid.delay_steps();
    for (int c = 0; c < k; ++c) {
        const double t = (c - k) * grid.dt();
        Y.col(c).setConstant(problem.phi0(t));
        Z.col(c).setConstant(problem.psi0(t));
    }
}

}  // namespace

std::vector<Probe> make_probes(const SolutionEnsemble& sol, const ForwardEnsemble& fwd,
                               std::size_t times) {
    const TimeGrid& grid = sol.grid;
    const int N = grid.steps();
    const int k = grid.delay_steps();
    require(fwd.n_paths() == sol.Y.rows(), ErrorCode::invalid_argument,
            "probe ensemble does not match the solution");
    std::vector<int> idx;
    const std::size_t count = std::max<std::size_t>(times, 2);
    for (std::size_t m = 0; m < count; ++m)
        idx.push_back(static_cast<int>(std::lround(static_cast<double>(m) * N / (count - 1))));
    if (k > 0 && k <= N) idx.push_back(k);
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());

    std::vector<Probe> out;
    for (int i : idx) {
        const double t = grid.time(i);
        const auto xs = column(fwd.values, i);
        const auto ys = column(sol.Y, sol.column(i));
        const auto zs = column(sol.Z, sol.column(i));
        const auto yds = column(sol.Y, i);
        const auto zds = column(sol.Z, i);
        for (double q : {0.1, 0.5, 0.9}) {
            out.push_back({t, quantile(xs, q), quantile(ys, q), quantile(zs, q), quantile(yds, q),
                           quantile(zds, q)});
        }
    }
    return out;
}

bool check_monotone(const GeneratorSpec& gen, const std::vector<Probe>& probes) {
    static constexpr double offsets[] = {-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0};
    for (const Probe& p : probes) {
        const double span = 1.0 + std::abs(p.y_delay);
        double prev = -inf_value;
        for (double o : offsets) {
            const double v = gen(p.t, p.x, p.y, p.z, p.y_delay + o * span, p.z_delay);
            if (v < prev - 1e-12 * (1.0 + std::abs(prev))) return false;
            prev = v;
        }
    }
    return true;
}

LipschitzProbeReport probe_lipschitz(const GeneratorSpec& gen, const std::vector<Probe>& probes,
                                     HurstParam H, double delta) {
    const double p = H.weight_exponent();
    LipschitzProbeReport report;
    report.probes = probes.size();
    for (const Probe& q : probes) {
        const double base = gen(q.t, q.x, q.y, q.z, q.y_delay, q.z_delay);
        const double dy = 0.5 * (1.0 + std::abs(q.y));
        const double dz = 0.5 * (1.0 + std::abs(q.z));
        const double dyd = 0.5 * (1.0 + std::abs(q.y_delay));
        const double dzd = 0.5 * (1.0 + std::abs(q.z_delay));
        const double wz = std::pow(q.t, p);
        const double wzd = std::pow(std::abs(q.t - delta), p);

        auto ratio = [&](double df, double denom) {
            if (df == 0.0) return 0.0;
            return denom > 0.0 ? df * df / denom : inf_value;
        };
        const double r_y = ratio(gen(q.t, q.x, q.y + dy, q.z, q.y_delay, q.z_delay) - base, dy * dy);
        const double r_z = ratio(gen(q.t, q.x, q.y, q.z + dz, q.y_delay, q.z_delay) - base, wz * dz * dz);
        const double r_yd = ratio(gen(q.t, q.x, q.y, q.z, q.y_delay + dyd, q.z_delay) - base, dyd * dyd);
        const double r_zd =
            ratio(gen(q.t, q.x, q.y, q.z, q.y_delay, q.z_delay + dzd) - base, wzd * dzd * dzd);
        const double r_all =
            ratio(gen(q.t, q.x, q.y + dy, q.z + dz, q.y_delay + dyd, q.z_delay + dzd) - base,
                  dy * dy + wz * dz * dz + dyd * dyd + wzd * dzd * dzd);
        if (std::isinf(r_zd) && delta > 0.0 && std::abs(q.t - delta) <= 1e-12 * (1.0 + delta))
            report.degenerate_at_delay = true;
        report.minimal_L = std::max({report.minimal_L, r_y, r_z, r_yd, r_zd, r_all});
    }
    report.passes = report.minimal_L <= gen.L * (1.0 + 1e-9) + 1e-12;
    return report;
}

SolutionEnsemble initial_iterate(const DelayedBsdeProblem& problem, Index eval_paths,
                                 Index fit_paths) {
    SolutionEnsemble sol(problem.model.grid, eval_paths, Provenance::initial_segment);
    sol.Y_fit = Matrix::Zero(fit_paths, sol.Y.cols());
    sol.Z_fit = Matrix::Zero(fit_paths, sol.Y.cols());
    fill_segment(problem, sol.Y, sol.Z);
    fill_segment(problem, sol.Y_fit, sol.Z_fit);
    return sol;
}

SolutionEnsemble inner_step(const DelayedBsdeProblem& problem, const SolutionEnsemble& frozen,
                            const ForwardEnsemble& eval, const ForwardEnsemble& fit,
                            const RegressionBasis& basis) {
    check_shapes(problem, frozen, eval, fit);
    basis.validate();
    const TimeGrid& grid = problem.model.grid;
    const HurstParam H = problem.model.hurst;
    const int N = grid.steps();
    const int k = grid.delay_steps();
    const double dt = grid.dt();
    const double delta = grid.delay();
    const Index ne = eval.n_paths();
    const Index nf = fit.n_paths();
    const auto& sigma_fn = problem.forward.sigma;
    const auto b_cells = problem.forward.b.cell_values(grid);
    const auto& gen = problem.generator;
    const auto& h = problem.terminal;

    std::vector<double> sigma(static_cast<std::size_t>(N) + 1), cross(static_cast<std::size_t>(N) + 1);
    for (int i = 0; i <= N; ++i) {
        const double t = grid.time(i);
        sigma[i] = sigma_fn(t);
        const double shat = kernel::sigma_hat(sigma_fn, t, H, grid);
        const double r = t > delta ? kernel::sigma_hat_partial(sigma_fn, t, t - delta, H, grid) : 0.0;
        cross[i] = (shat != 0.0 && k > 0) ? r / shat : 0.0;
    }

    SolutionEnsemble out(grid, ne, Provenance::regression);
    out.Y_fit = Matrix::Zero(nf, out.Y.cols());
    out.Z_fit = Matrix::Zero(nf, out.Y.cols());
    out.fits.resize(static_cast<std::size_t>(N));
    fill_segment(problem, out.Y, out.Z);
    fill_segment(problem, out.Y_fit, out.Z_fit);

    auto terminal = [&](const ForwardEnsemble& fwd, Matrix& Y, Matrix& Z) {
        for (Index p = 0; p < fwd.n_paths(); ++p) {
            const double x = fwd.values(p, N);
            Y(p, k + N) = h(x);
            Z(p, k + N) = sigma[N] * h.slope(x);
        }
    };
    terminal(eval, out.Y, out.Z);
    terminal(fit, out.Y_fit, out.Z_fit);

    const Vector none;
    Vector target(nf);
    for (int i = N - 1; i >= 0; --i) {
        const double t = grid.time(i);
        const Index lag = std::max(i - k, 0);
        const Index lag_next = std::max(i + 1 - k, 0);
        const Vector x1 = fit.values.col(i);
        const Vector x2 = k > 0 ? Vector(fit.values.col(lag)) : none;

        // Control variate: subtract the F_i-measurable slope times the
        // centred increment; the conditional mean is unchanged.
        for (Index p = 0; p < nf; ++p) {
            const double predicted = fit.values(p, i) + b_cells[i] * dt;
            const double incr = fit.values(p, i + 1) - predicted;
            double slope;
            if (i == N - 1) {
                slope = h.slope(predicted);
            } else {
                double d1, d2;
                out.fits[i + 1].gradient(predicted, k > 0 ? fit.values(p, lag_next) : 0.0, d1, d2);
                slope = d1;
            }
            target[p] = out.Y_fit(p, k + i + 1) - slope * incr;
        }
        const RegressionFit reg = RegressionFit::fit(x1, x2, target, basis);

        // A degenerate state (t = 0) carries no slope information; use the
        // Gaussian integration-by-parts slope Cov(Y_1, d eta)/Var(d eta).
        double stein = 0.0;
        const bool degenerate = reg.active_coordinates() == 0;
        if (degenerate) {
            double my = 0.0, md = 0.0;
            for (Index p = 0; p < nf; ++p) {
                my += out.Y_fit(p, k + i + 1);
                md += fit.values(p, i + 1) - fit.values(p, i);
            }
            my /= static_cast<double>(nf);
            md /= static_cast<double>(nf);
            double cov = 0.0, var = 0.0;
            for (Index p = 0; p < nf; ++p) {
                const double d = fit.values(p, i + 1) - fit.values(p, i) - md;
                cov += (out.Y_fit(p, k + i + 1) - my) * d;
                var += d * d;
            }
            stein = var > 0.0 ? cov / var : 0.0;
        }

        auto sweep = [&](const ForwardEnsemble& fwd, const Matrix& fy, const Matrix& fz, Matrix& Y,
                         Matrix& Z) {
            parallel_for(static_cast<std::size_t>(fwd.n_paths()), [&](std::size_t lo, std::size_t hi) {
                for (std::size_t ps = lo; ps < hi; ++ps) {
                    const auto p = static_cast<Index>(ps);
                    const double a = fwd.values(p, i);
                    const double c = k > 0 ? fwd.values(p, lag) : 0.0;
                    const double e = reg.value(a, c);
                    double z;
                    if (degenerate) {
                        z = sigma[i] * stein;
                    } else {
                        double d1, d2;
                        reg.gradient(a, c, d1, d2);
                        z = sigma[i] * (d1 + cross[i] * d2);
                    }
                    const double yd = fy(p, i);
                    const double zd = fz(p, i);
                    const double fv = gen(t, a, e, z, yd, zd);
                    if (!std::isfinite(fv)) generator_failure(gen, t, a, e, z, yd, zd, fv);
                    Y(p, k + i) = e + fv * dt;
                    Z(p, k + i) = z;
                }
            });
        };
        sweep(fit, frozen.Y_fit, frozen.Z_fit, out.Y_fit, out.Z_fit);
        sweep(eval, frozen.Y, frozen.Z, out.Y, out.Z);
        out.fits[i] = reg;
    }
    return out;
}

double iterate_distance(const SolutionEnsemble& a, const SolutionEnsemble& b, double beta, HurstParam H) {
    require(a.Y.rows() == b.Y.rows() && a.Y.cols() == b.Y.cols(), ErrorCode::invalid_argument,
            "iterates differ in shape");
    const auto times = a.times();
    WeightedNormParams params{beta, times.front(), times.back(), H.value()};
    const Matrix dy = a.Y - b.Y;
    const Matrix dz = a.Z - b.Z;
    return diagnostics::weighted_norm_y_sq(dy, times, params) +
           diagnostics::weighted_norm_z_sq(dz, times, params);
}

namespace {

struct Gate {
    double beta = 0.0;
    double M = 0.0;
    double delta_max = 0.0;
    double horizon_max = 0.0;
    bool admissible = false;
};

Gate admissibility_gate(const DelayedBsdeProblem& problem, const PicardConfig& config) {
    const TimeGrid& grid = problem.model.grid;
    const HurstParam H = problem.model.hurst;
    const double L = problem.generator.L;
    Gate gate;
    gate.M = config.M ? *config.M : kernel::ratio_bound(problem.forward.sigma, H, grid);
    if (config.mode == AdmissibilityMode::horizon) {
        gate.beta = config.beta ? *config.beta : 1.1;
        require(gate.beta > 1.0, ErrorCode::constant_violation, "horizon mode needs beta > 1");
        if (L > 0.0) {
            const double v = config.v ? *config.v
                                      : 1.0 / (8.0 * L * gate.M * std::exp(gate.beta));
            try {
                gate.horizon_max = admissible_horizon(L, gate.M, H.value(), gate.beta, v);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::infeasible) throw;
                gate.horizon_max = 0.0;
            }
        } else {
            gate.horizon_max = 1e3;
        }
        gate.admissible = grid.horizon() <= gate.horizon_max;
    } else {
        const Admissibility adm = admissible_delay(L, gate.M, config.mode);
        gate.beta = config.beta ? *config.beta : adm.beta;
        gate.delta_max = adm.delta_max;
        gate.admissible = !problem.generator.uses_delay() || grid.delay() <= adm.delta_max;
    }
    return gate;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

PicardResult solve_delayed_picard(const DelayedBsdeProblem& problem, const ForwardEnsemble& eval,
                                  const ForwardEnsemble& fit, const PicardConfig& config) {
    problem.validate();
    config.validate();
    const TimeGrid& grid = problem.model.grid;
    const HurstParam H = problem.model.hurst;
    const Gate gate = admissibility_gate(problem, config);

    PicardResult result;
    result.beta = gate.beta;
    result.M = gate.M;
    result.delta_max = gate.delta_max;
    result.horizon_max = gate.horizon_max;
    result.admissible = gate.admissible;

    // The map ignores the frozen iterate when no delayed argument is used or
    // every delayed lookup lands in the initial segment.
    const bool one_pass = !problem.generator.uses_delay() || grid.delay_steps() >= grid.steps();

    SolutionEnsemble prev = initial_iterate(problem, eval.n_paths(), fit.n_paths());
    for (int n = 1; n <= config.max_iter; ++n) {
        const auto start = Clock::now();
        SolutionEnsemble next = inner_step(problem, prev, eval, fit, config.basis);
        IterationRecord rec;
        rec.iter = n;
        if (n == 1) {
            const auto times = next.times();
            WeightedNormParams params{gate.beta, times.front(), times.back(), H.value()};
            result.threshold = config.tol * (1.0 + diagnostics::weighted_norm_y(next.Y, times, params));
        }
        // For a constant map the fixed-point residual of the first iterate is zero.
        rec.distance = one_pass ? 0.0 : iterate_distance(next, prev, gate.beta, H);
        rec.ratio = result.trace.empty() ? nan_value
                    : result.trace.records.back().distance > 0.0
                        ? rec.distance / result.trace.records.back().distance
                        : (rec.distance > 0.0 ? inf_value : 0.0);
        rec.seconds = seconds_since(start);
        result.trace.records.push_back(rec);
        prev = std::move(next);
        if (std::sqrt(rec.distance) < result.threshold) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged) {
        const auto& r = result.trace.records;
        const std::size_t m = r.size();
        if (m >= 3 && r[m - 1].distance >= r[m - 2].distance && r[m - 2].distance >= r[m - 3].distance) {
            std::ostringstream os;
            os << "Picard iteration did not converge in " << config.max_iter
               << " iterations; distance " << r[m - 1].distance << " is not decreasing";
            throw DivergenceError(result.trace, os.str());
        }
    }

    result.solution = std::move(prev);
    result.lipschitz = probe_lipschitz(problem.generator, make_probes(result.solution, eval), H,
                                       grid.delay());
    const auto ratios = result.trace.ratios();
    const bool contracting = ratios.empty() || ratios.back() <= 0.5;
    result.certified = result.admissible && result.lipschitz.passes && contracting;
    return result;
}

ComparisonResult solve_comparison_sequence(const DelayedBsdeProblem& problem1,
                                           const DelayedBsdeProblem& problem2,
                                           const SolutionEnsemble& dominating,
                                           const ForwardEnsemble& eval, const ForwardEnsemble& fit,
                                           const ComparisonConfig& config,
                                           const PicardConfig& cross_check) {
    problem1.validate();
    problem2.validate();
    require(config.min_iter >= 1 && config.max_iter >= config.min_iter, ErrorCode::invalid_argument,
            "comparison iteration bounds are inconsistent");
    require(config.tol > 0.0, ErrorCode::invalid_argument, "tol must be positive");
    const TimeGrid& grid = problem1.model.grid;
    const HurstParam H = problem1.model.hurst;
    const int N = grid.steps();
    const int k = grid.delay_steps();

    // Preconditions.
    const auto probes = make_probes(dominating, eval);
    if (!check_monotone(problem1.generator, probes))
        fail(ErrorCode::precondition, "generator '" + problem1.generator.label +
                                          "' is not increasing in the delayed value");
    {
        std::vector<double> xs;
        const auto terminal = column(eval.values, N);
        for (double q = 0.0; q <= 1.0 + 1e-12; q += 0.05) xs.push_back(quantile(terminal, std::min(q, 1.0)));
        for (double x : xs) {
            if (problem1.terminal(x) > problem2.terminal(x) + 1e-12 * (1.0 + std::abs(x))) {
                std::ostringstream os;
                os << "terminal maps are not ordered: h1(" << x << ") > h2(" << x << ")";
                fail(ErrorCode::precondition, os.str());
            }
        }
    }
    ComparisonResult result;
    for (int c = 0; c < k; ++c) {
        const double t = (c - k) * grid.dt();
        if (problem1.phi0(t) > problem2.phi0(t)) {
            std::ostringstream os;
            os << "initial segments are not ordered at t=" << t;
            fail(ErrorCode::precondition, os.str());
        }
        if (problem1.psi0(t) > problem2.psi0(t)) result.psi_ordered = false;
    }

    const Matrix y2 = dominating.Y_on_grid();
    const double scale = std::max(1.0, std::sqrt(y2.squaredNorm() / static_cast<double>(y2.size())));
    result.tol_num = config.tol_num_factor * scale;

    // The comparison equation has no delayed Z argument.
    DelayedBsdeProblem reduced = problem1;
    const auto f1 = problem1.generator.f;
    reduced.generator.f = [f1](double t, double x, double y, double z, double yd, double) {
        return f1(t, x, y, z, yd, 0.0);
    };
    reduced.generator.uses_z_delay = false;

    const Gate gate = admissibility_gate(problem1, [&] {
        PicardConfig c = cross_check;
        c.mode = AdmissibilityMode::comparison;
        return c;
    }());

    SolutionEnsemble prev = dominating;
    result.sequence.push_back(prev.Y);
    double threshold = 0.0;
    for (int n = 1; n <= config.max_iter; ++n) {
        const auto start = Clock::now();
        SolutionEnsemble next = inner_step(reduced, prev, eval, fit, config.basis);
        IterationRecord rec;
        rec.iter = n;
        rec.distance = iterate_distance(next, prev, gate.beta, H);
        if (n == 1) {
            const auto times = next.times();
            WeightedNormParams params{gate.beta, times.front(), times.back(), H.value()};
            threshold = config.tol * (1.0 + diagnostics::weighted_norm_y(next.Y, times, params));
        }
        rec.ratio = result.trace.empty() ? nan_value
                    : result.trace.records.back().distance > 0.0
                        ? rec.distance / result.trace.records.back().distance
                        : (rec.distance > 0.0 ? inf_value : 0.0);
        rec.seconds = seconds_since(start);
        result.trace.records.push_back(rec);
        result.monotone_violation.push_back(
            (next.Y_on_grid() - prev.Y_on_grid()).maxCoeff());
        result.sequence.push_back(next.Y);
        prev = std::move(next);
        if (n >= config.min_iter && std::sqrt(rec.distance) < threshold) break;
    }
    result.limit = std::move(prev);

    result.dominance = diagnostics::dominance(result.limit.Y_on_grid(), y2, result.tol_num);
    result.comparison_failure = result.dominance.fraction < 1.0 - config.failure_share;

    const PicardResult direct = solve_delayed_picard(problem1, eval, fit, cross_check);
    result.cross_check_gap =
        (direct.solution.Y_on_grid() - result.limit.Y_on_grid()).cwiseAbs().maxCoeff() / scale;
    return result;
}

Matrix generator_along(const DelayedBsdeProblem& problem, const SolutionEnsemble& sol,
                       const ForwardEnsemble& eval) {
    const TimeGrid& grid = problem.model.grid;
    const int N = grid.steps();
    require(sol.Y.rows() == eval.n_paths() && sol.Y.cols() == N + 1 + grid.delay_steps(),
            ErrorCode::invalid_argument, "solution does not match the problem grid");
    Matrix g(eval.n_paths(), N + 1);
    for (Index p = 0; p < eval.n_paths(); ++p) {
        for (int i = 0; i <= N; ++i) {
            const Index c = sol.column(i);
            g(p, i) = problem.generator(grid.time(i), eval.values(p, i), sol.Y(p, c), sol.Z(p, c),
                                        sol.Y(p, i), sol.Z(p, i));
        }
    }
    return g;
}

AprioriReport apriori_estimate_check(const DelayedBsdeProblem& problem, const SolutionEnsemble& sol,
                                     const ForwardEnsemble& eval, const KernelConstants& constants,
                                     double stat_tol) {
    const TimeGrid& grid = problem.model.grid;
    const int N = grid.steps();
    Vector terminal(eval.n_paths());
    for (Index p = 0; p < eval.n_paths(); ++p) terminal[p] = problem.terminal(eval.values(p, N));
    return fbsde::apriori_estimate_check(sol.Y_on_grid(), sol.Z_on_grid(),
                                         generator_along(problem, sol, eval), terminal,
                                         TimeGrid(grid.horizon(), N), problem.model.hurst, constants,
                                         stat_tol);
}

}  // namespace delay
}  // namespace fracbsde
