#include "core/sampler.hpp"

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/parallel.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace fracbsde {

const char* to_string(SamplingMethod m) noexcept {
    return m == SamplingMethod::cholesky ? "cholesky" : "hosking";
}

SamplingMethod parse_sampling_method(const std::string& name) {
    if (name == "cholesky") return SamplingMethod::cholesky;
    if (name == "hosking") return SamplingMethod::hosking;
    fail(ErrorCode::invalid_argument, "unknown sampling method '" + name + "'");
}

namespace sampler {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void check_request(Index n_paths) {
    require(n_paths >= 1, ErrorCode::invalid_argument, "n_paths must be at least 1");
}

}  // namespace

std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t path) {
    const std::uint64_t a = splitmix64(seed);
    const std::uint64_t b = splitmix64(a ^ splitmix64(path + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(seed ^ splitmix64(salt));
}

Matrix fbm_covariance(const TimeGrid& grid, HurstParam H) {
    const int n = grid.steps();
    const double two_h = 2.0 * H.value();
    Matrix cov(n + 1, n + 1);
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            const double t = grid.time(i);
            const double s = grid.time(j);
            cov(i, j) = 0.5 * (std::pow(t, two_h) + std::pow(s, two_h) -
                               std::pow(std::abs(t - s), two_h));
        }
    }
    return cov;
}

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a) {
    const Index n = a.rows();
    require(a.cols() == n, ErrorCode::invalid_argument, "Cholesky needs a square matrix");
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Index j = 0; j < n; ++j) {
        double d = a(j, j);
        for (Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) {
            std::ostringstream os;
            os << "covariance is not positive definite at pivot " << j << " (residual " << d << ")";
            throw FactorizationError(static_cast<std::size_t>(j), os.str());
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (Index i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

PathEnsemble sample_fbm_cholesky(const FbmModel& model, Index n_paths, std::uint64_t seed) {
    check_request(n_paths);
    const int n = model.grid.steps();
    const Matrix full = fbm_covariance(model.grid, model.hurst);
    const Eigen::MatrixXd factor = cholesky_lower(full.block(1, 1, n, n));

    PathEnsemble out{model, seed, SamplingMethod::cholesky, Matrix::Zero(n_paths, n + 1)};
    parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t lo, std::size_t hi) {
        Eigen::VectorXd z(n);
        std::normal_distribution<double> normal;
        for (std::size_t p = lo; p < hi; ++p) {
            auto rng = path_stream(seed, p);
            for (int j = 0; j < n; ++j) z[j] = normal(rng);
            for (int i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int j = 0; j <= i; ++j) acc += factor(i, j) * z[j];
                out.values(static_cast<Index>(p), i + 1) = acc;
            }
        }
    });
    return out;
}

PathEnsemble sample_fbm_hosking(const FbmModel& model, Index n_paths, std::uint64_t seed) {
    check_request(n_paths);
    const int n = model.grid.steps();
    const double two_h = 2.0 * model.hurst.value();

    // Unit-step fGn autocovariance.
    std::vector<double> gamma(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
        gamma[k] = 0.5 * (std::pow(k + 1.0, two_h) - 2.0 * std::pow(static_cast<double>(k), two_h) +
                          std::pow(std::abs(k - 1.0), two_h));
    }

    // Durbin-Levinson: row m holds the m prediction coefficients for X_m.
    std::vector<std::vector<double>> coeff(static_cast<std::size_t>(n));
    std::vector<double> sd(static_cast<std::size_t>(n));
    double v = gamma[0];
    sd[0] = std::sqrt(v);
    for (int m = 1; m < n; ++m) {
        const auto& prev = coeff[m - 1];
        double num = gamma[m];
        for (int j = 1; j < m; ++j) num -= prev[j - 1] * gamma[m - j];
        const double kappa = num / v;
        std::vector<double> row(static_cast<std::size_t>(m));
        for (int j = 1; j < m; ++j) row[j - 1] = prev[j - 1] - kappa * prev[m - j - 1];
        row[m - 1] = kappa;
        v *= (1.0 - kappa * kappa);
        if (!(v > 0.0) || !std::isfinite(v)) {
            std::ostringstream os;
            os << "Hosking recursion variance underflow at lag " << m;
            fail(ErrorCode::numerical, os.str());
        }
        sd[m] = std::sqrt(v);
        coeff[m] = std::move(row);
    }

    const double scale = std::pow(model.grid.dt(), model.hurst.value());
    PathEnsemble out{model, seed, SamplingMethod::hosking, Matrix::Zero(n_paths, n + 1)};
    parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t lo, std::size_t hi) {
        std::vector<double> x(static_cast<std::size_t>(n));
        std::normal_distribution<double> normal;
        for (std::size_t p = lo; p < hi; ++p) {
            auto rng = path_stream(seed, p);
            double level = 0.0;
            for (int m = 0; m < n; ++m) {
                double mean = 0.0;
                const auto& row = coeff[m];
                for (int j = 1; j <= m; ++j) mean += row[j - 1] * x[m - j];
                x[m] = mean + sd[m] * normal(rng);
                level += x[m];
                out.values(static_cast<Index>(p), m + 1) = scale * level;
            }
        }
    });
    return out;
}

PathEnsemble sample_fbm(const FbmModel& model, Index n_paths, std::uint64_t seed,
                        SamplingMethod method) {
    return method == SamplingMethod::cholesky ? sample_fbm_cholesky(model, n_paths, seed)
                                              : sample_fbm_hosking(model, n_paths, seed);
}

ForwardEnsemble simulate_forward(const ForwardCoefficients& coefficients, const PathEnsemble& paths) {
    const TimeGrid& grid = paths.model.grid;
    kernel::validate_volatility(coefficients.sigma, grid);
    const int n = grid.steps();
    const double dt = grid.dt();
    const auto b = coefficients.b.cell_values(grid);
    const auto s = coefficients.sigma.cell_values(grid);

    ForwardEnsemble out{paths.model, coefficients, paths.seed, false,
                        Matrix(paths.n_paths(), n + 1)};
    parallel_for(static_cast<std::size_t>(paths.n_paths()), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t ps = lo; ps < hi; ++ps) {
            const auto p = static_cast<Index>(ps);
            double eta = coefficients.eta0;
            out.values(p, 0) = eta;
            for (int i = 0; i < n; ++i) {
                eta += b[i] * dt + s[i] * (paths.values(p, i + 1) - paths.values(p, i));
                out.values(p, i + 1) = eta;
            }
        }
    });
    return out;
}

ForwardEnsemble simulate_quasi_markov(const ForwardCoefficients& coefficients,
                                      const FbmModel& model, Index n_paths, std::uint64_t seed) {
    check_request(n_paths);
    const TimeGrid& grid = model.grid;
    kernel::validate_volatility(coefficients.sigma, grid);
    const int n = grid.steps();
    const double dt = grid.dt();
    const auto b = coefficients.b.cell_values(grid);
    const auto norms = kernel::sigma_norm_sq_on_grid(coefficients.sigma, model.hurst, grid);
    std::vector<double> sd(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double var = norms[i + 1] - norms[i];
        require(var > 0.0, ErrorCode::numerical, "forward variance is not increasing");
        sd[i] = std::sqrt(var);
    }

    ForwardEnsemble out{model, coefficients, seed, true, Matrix(n_paths, n + 1)};
    parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t lo, std::size_t hi) {
        std::normal_distribution<double> normal;
        for (std::size_t ps = lo; ps < hi; ++ps) {
            const auto p = static_cast<Index>(ps);
            auto rng = path_stream(seed, ps);
            double eta = coefficients.eta0;
            out.values(p, 0) = eta;
            for (int i = 0; i < n; ++i) {
                eta += b[i] * dt + sd[i] * normal(rng);
                out.values(p, i + 1) = eta;
            }
        }
    });
    return out;
}

Matrix wiener_integral_paths(const DeterministicFn& f, const PathEnsemble& paths) {
    const int n = paths.model.grid.steps();
    const auto fc = f.cell_values(paths.model.grid);
    Matrix out = Matrix::Zero(paths.n_paths(), n + 1);
    for (Index p = 0; p < paths.n_paths(); ++p) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            if (fc[i] != 0.0) acc += fc[i] * (paths.values(p, i + 1) - paths.values(p, i));
            out(p, i + 1) = acc;
        }
    }
    return out;
}

Vector wiener_integral(const DeterministicFn& f, const PathEnsemble& paths) {
    return wiener_integral_paths(f, paths).col(paths.model.grid.steps());
}

void write_ensemble_csv(std::ostream& out, const PathEnsemble& paths, const ForwardEnsemble* eta) {
    if (eta) {
        require(eta->values.rows() == paths.values.rows() && eta->values.cols() == paths.values.cols(),
                ErrorCode::invalid_argument, "forward ensemble does not match the fBm ensemble");
    }
    auto put = [&](double v) { csv::put(out, v, 17); };
    out << "path_id,t,BH,eta\n";
    const TimeGrid& grid = paths.model.grid;
    for (Index p = 0; p < paths.n_paths(); ++p) {
        for (int i = 0; i <= grid.steps(); ++i) {
            out << p << ',';
            put(grid.time(i));
            out << ',';
            put(paths.values(p, i));
            out << ',';
            if (eta) put(eta->values(p, i));
            out << '\n';
        }
    }
}

}  // namespace sampler
}  // namespace fracbsde
