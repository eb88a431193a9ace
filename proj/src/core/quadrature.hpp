#pragma once

#include <vector>

namespace fracbsde::quadrature {

struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1] (Golub-Welsch).
const Rule& gauss_legendre(int n);

/// Gauss-Hermite rule for the weight exp(-x^2) (Golub-Welsch).
const Rule& gauss_hermite(int n);

/// E[f(m + s*X)], X ~ N(0,1), with the n-point Gauss-Hermite rule.
template <typename F>
double gaussian_expectation(F&& f, double mean, double sd, int n = 64) {
    const Rule& rule = gauss_hermite(n);
    constexpr double inv_sqrt_pi = 0.56418958354775628695;
    constexpr double sqrt2 = 1.41421356237309504880;
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        acc += rule.weights[i] * f(mean + sqrt2 * sd * rule.nodes[i]);
    return acc * inv_sqrt_pi;
}

/// int_a^b |t|^p exp(beta t) dt for p > -1. Cells that touch the origin are
/// integrated by power series; all others by 16-point Gauss-Legendre.
double power_exp_integral(double a, double b, double p, double beta);

/// int_a^b exp(beta t) dt.
double exp_integral(double a, double b, double beta);

}  // namespace fracbsde::quadrature
