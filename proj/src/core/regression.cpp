#include "core/regression.hpp"

#include "core/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace fracbsde {

void RegressionBasis::validate() const {
    require(degree >= 1 && degree <= 6, ErrorCode::invalid_argument,
            "basis degree must lie in [1, 6]");
    require(ridge > 0.0, ErrorCode::invalid_argument, "ridge must be positive");
    require(max_condition > 1.0, ErrorCode::invalid_argument, "condition cap must exceed 1");
}

namespace {

double ipow(double x, int p) {
    double r = 1.0;
    for (int k = 0; k < p; ++k) r *= x;
    return r;
}

}  // namespace

void RegressionFit::coordinates(double x1, double x2, double* c) const {
    for (std::size_t k = 0; k < coords_.size(); ++k) {
        const auto& q = coords_[k];
        c[k] = (q.a1 * x1 + q.a2 * x2 - q.mean) / q.scale;
    }
}

double RegressionFit::value(double x1, double x2) const {
    double c[2] = {0.0, 0.0};
    coordinates(x1, x2, c);
    double acc = 0.0;
    for (std::size_t j = 0; j < powers_.size(); ++j)
        acc += coef_[j] * ipow(c[0], powers_[j].first) * ipow(c[1], powers_[j].second);
    return acc;
}

void RegressionFit::gradient(double x1, double x2, double& d1, double& d2) const {
    d1 = d2 = 0.0;
    double c[2] = {0.0, 0.0};
    coordinates(x1, x2, c);
    double dc[2] = {0.0, 0.0};
    for (std::size_t j = 0; j < powers_.size(); ++j) {
        const auto [p, q] = powers_[j];
        if (p > 0) dc[0] += coef_[j] * p * ipow(c[0], p - 1) * ipow(c[1], q);
        if (q > 0) dc[1] += coef_[j] * q * ipow(c[0], p) * ipow(c[1], q - 1);
    }
    for (std::size_t k = 0; k < coords_.size(); ++k) {
        d1 += dc[k] * coords_[k].a1 / coords_[k].scale;
        d2 += dc[k] * coords_[k].a2 / coords_[k].scale;
    }
}

RegressionFit RegressionFit::fit(const Vector& x1, const Vector& x2, const Vector& target,
                                 const RegressionBasis& basis) {
    basis.validate();
    const Index n = x1.size();
    const bool two_states = x2.size() > 0;
    require(n >= 1 && target.size() == n && (!two_states || x2.size() == n),
            ErrorCode::invalid_argument, "regression inputs differ in length");

    RegressionFit out;
    out.degree_ = basis.degree;

    auto add_coordinate = [&](double a1, double a2) {
        double mean = 0.0;
        for (Index p = 0; p < n; ++p) mean += a1 * x1[p] + (two_states ? a2 * x2[p] : 0.0);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (Index p = 0; p < n; ++p) {
            const double d = a1 * x1[p] + (two_states ? a2 * x2[p] : 0.0) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double scale = std::sqrt(var);
        if (scale > 1e-12 * (1.0 + std::abs(mean))) out.coords_.push_back({a1, a2, mean, scale});
    };
    if (two_states) {
        add_coordinate(0.0, 1.0);
        add_coordinate(1.0, -1.0);
    } else {
        add_coordinate(1.0, 0.0);
    }

    const int dims = out.active_coordinates();
    for (int total = 0; total <= basis.degree; ++total) {
        for (int p = total; p >= 0; --p) {
            const int q = total - p;
            if ((dims < 1 && p > 0) || (dims < 2 && q > 0)) continue;
            out.powers_.emplace_back(p, q);
        }
    }
    const auto m = static_cast<Index>(out.powers_.size());

    // Serial accumulation keeps the fit independent of the thread count.
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd row(m);
    double c[2] = {0.0, 0.0};
    for (Index p = 0; p < n; ++p) {
        out.coordinates(x1[p], two_states ? x2[p] : 0.0, c);
        for (Index j = 0; j < m; ++j)
            row[j] = ipow(c[0], out.powers_[j].first) * ipow(c[1], out.powers_[j].second);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(row);
        rhs += target[p] * row;
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    gram /= static_cast<double>(n);
    rhs /= static_cast<double>(n);

    Eigen::VectorXd norm(m);
    for (Index j = 0; j < m; ++j) norm[j] = gram(j, j) > 0.0 ? 1.0 / std::sqrt(gram(j, j)) : 1.0;
    Eigen::MatrixXd scaled = norm.asDiagonal() * gram * norm.asDiagonal();
    // The intercept is not shrunk.
    for (Index j = 1; j < m; ++j) scaled(j, j) += basis.ridge;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > basis.max_condition) {
        std::ostringstream os;
        os << "regression design is ill-conditioned (condition " << (lo > 0.0 ? hi / lo : INFINITY)
           << ", cap " << basis.max_condition << ")";
        fail(ErrorCode::ill_conditioned, os.str());
    }
    const Eigen::VectorXd sol = scaled.ldlt().solve(norm.asDiagonal() * rhs);
    out.coef_.resize(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j) out.coef_[j] = norm[j] * sol[j];
    for (double v : out.coef_)
        require(std::isfinite(v), ErrorCode::numerical, "regression produced non-finite coefficients");
    return out;
}

}  // namespace fracbsde
