#include "core/quadrature.hpp"

#include "core/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <mutex>

namespace fracbsde::quadrature {

namespace {

Rule golub_welsch(const Eigen::VectorXd& offdiag, double mu0) {
    const Eigen::Index n = offdiag.size() + 1;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        jacobi(k, k + 1) = offdiag[k];
        jacobi(k + 1, k) = offdiag[k];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    Rule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        rule.nodes[i] = solver.eigenvalues()[i];
        const double v0 = solver.eigenvectors()(0, i);
        rule.weights[i] = mu0 * v0 * v0;
    }
    return rule;
}

template <typename Build>
const Rule& cached(std::map<int, Rule>& cache, std::mutex& mu, int n, Build&& build) {
    require(n >= 1, ErrorCode::invalid_argument, "quadrature order must be positive");
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build(n)).first;
    return it->second;
}

// int_0^h s^p exp(beta s) ds by its Taylor series in beta.
double origin_series(double h, double p, double beta) {
    double total = 0.0;
    double coeff = 1.0;  // beta^k / k!
    for (int k = 0; k < 200; ++k) {
        const double e = p + k + 1.0;
        const double term = coeff * std::pow(h, e) / e;
        total += term;
        if (std::abs(term) < 1e-17 * std::abs(total)) break;
        coeff *= beta / (k + 1.0);
    }
    return total;
}

}  // namespace

const Rule& gauss_legendre(int n) {
    static std::map<int, Rule> cache;
    static std::mutex mu;
    return cached(cache, mu, n, [](int m) {
        Eigen::VectorXd off(m - 1);
        for (int k = 1; k < m; ++k) off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
        return golub_welsch(off, 2.0);
    });
}

const Rule& gauss_hermite(int n) {
    static std::map<int, Rule> cache;
    static std::mutex mu;
    return cached(cache, mu, n, [](int m) {
        Eigen::VectorXd off(m - 1);
        for (int k = 1; k < m; ++k) off[k - 1] = std::sqrt(k / 2.0);
        return golub_welsch(off, std::sqrt(M_PI));
    });
}

double exp_integral(double a, double b, double beta) {
    if (beta == 0.0) return b - a;
    return std::exp(beta * a) * std::expm1(beta * (b - a)) / beta;
}

double power_exp_integral(double a, double b, double p, double beta) {
    require(p > -1.0, ErrorCode::domain, "power weight exponent must exceed -1");
    if (b <= a) return 0.0;
    if (a < 0.0 && b > 0.0)
        return power_exp_integral(a, 0.0, p, beta) + power_exp_integral(0.0, b, p, beta);
    if (a == 0.0) return origin_series(b, p, beta);
    if (b == 0.0) return origin_series(-a, p, -beta);
    const Rule& rule = gauss_legendre(16);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double t = mid + half * rule.nodes[i];
        acc += rule.weights[i] * std::pow(std::abs(t), p) * std::exp(beta * t);
    }
    return acc * half;
}

}  // namespace fracbsde::quadrature
