#include "core/diagnostics.hpp"
#include "core/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace fracbsde;

namespace {

std::vector<double> uniform_times(double a, double b, int n) {
    std::vector<double> t(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) t[i] = a + (b - a) * i / n;
    return t;
}

// int_0^1 t^p e^{beta t} dt by its power series.
double power_exp_oracle(double p, double beta) {
    double acc = 0.0, c = 1.0;
    for (int k = 0; k < 80; ++k) {
        acc += c / (p + k + 1);
        c *= beta / (k + 1);
    }
    return acc;
}

}  // namespace

TEST(Diagnostics, WeightedNormsOfConstantEnsembles) {
    const auto times = uniform_times(0.0, 1.0, 16);
    const Matrix Y = Matrix::Constant(10, 17, 2.0);
    const WeightedNormParams p{1.5, 0.0, 1.0, 0.75};
    EXPECT_NEAR(diagnostics::weighted_norm_y_sq(Y, times, p), 4.0 * (std::exp(1.5) - 1) / 1.5, 1e-12);
    EXPECT_NEAR(diagnostics::weighted_norm_z_sq(Y, times, p), 4.0 * power_exp_oracle(0.5, 1.5), 1e-11);
    EXPECT_NEAR(diagnostics::weighted_norm_y(Y, times, p),
                std::sqrt(diagnostics::weighted_norm_y_sq(Y, times, p)), 1e-14);
}

TEST(Diagnostics, NormsAreHomogeneous) {
    const auto times = uniform_times(-0.25, 1.0, 20);
    Matrix Y(3, 21);
    for (Index c = 0; c < 21; ++c) Y.col(c).setConstant(std::sin(static_cast<double>(c)));
    const WeightedNormParams p{0.7, -0.25, 1.0, 0.6};
    const double base = diagnostics::weighted_norm_z(Y, times, p);
    EXPECT_NEAR(diagnostics::weighted_norm_z(-3.0 * Y, times, p), 3.0 * base, 1e-12);
    EXPECT_DOUBLE_EQ(diagnostics::weighted_norm_y(Matrix::Zero(3, 21), times, p), 0.0);
}

TEST(Diagnostics, NormParameterValidation) {
    EXPECT_THROW((WeightedNormParams{1.0, 1.0, 1.0, 0.75}.validate()), Error);
    EXPECT_THROW((WeightedNormParams{-1.0, 0.0, 1.0, 0.75}.validate()), Error);
    EXPECT_THROW((WeightedNormParams{1.0, 0.0, 1.0, 0.5}.validate()), Error);
}

TEST(Diagnostics, DominanceCountsPointsWithinTolerance) {
    Matrix a = Matrix::Zero(2, 3), b = Matrix::Zero(2, 3);
    a(0, 1) = 0.5;
    a(1, 2) = 1e-4;
    const auto r = diagnostics::dominance(a, b, 1e-3);
    EXPECT_NEAR(r.fraction, 5.0 / 6.0, 1e-15);
    EXPECT_DOUBLE_EQ(r.worst, 0.5);
    EXPECT_FALSE(r.verdict);
    EXPECT_TRUE(diagnostics::dominance(b, a, 0.0).verdict);
}

TEST(Diagnostics, DominanceRejectsShapeMismatch) {
    try {
        diagnostics::dominance(Matrix::Zero(2, 3), Matrix::Zero(3, 2), 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
    }
}

TEST(Diagnostics, IsometryOnSampledPaths) {
    const FbmModel m{HurstParam(0.7), TimeGrid(1.0, 32)};
    const auto paths = sampler::sample_fbm(m, 10000, 17, SamplingMethod::cholesky);
    const auto f = DeterministicFn::piecewise({0.0, 0.25, 1.0}, {2.0, -1.0});
    const auto r = diagnostics::isometry_test(f, paths);
    EXPECT_TRUE(r.passes(4.0)) << r.z_mean << " " << r.z_second;
    EXPECT_NEAR(r.expected_second_moment,
                kernel::inner_product(f, f, 1.0, m.hurst, m.grid), 1e-12);
}

TEST(Diagnostics, ProductFormulaForOrthogonalisedPair) {
    const FbmModel m{HurstParam(0.8), TimeGrid(1.0, 32)};
    const auto paths = sampler::sample_fbm(m, 10000, 21, SamplingMethod::cholesky);
    const auto r = diagnostics::product_formula_test(DeterministicFn::constant(1.0),
                                                     DeterministicFn::indicator(0.0, 0.5), paths);
    EXPECT_LT(r.max_abs_z, 4.0);
    EXPECT_NEAR(r.expected_at_end, 0.5 * (1.0 + std::pow(0.5, 1.6) - std::pow(0.5, 1.6)), 1e-9);
}

TEST(Diagnostics, BatteryIsSeededAndGridAligned) {
    const TimeGrid g(1.0, 64);
    const auto a = diagnostics::random_piecewise_battery(5, 3, g);
    const auto b = diagnostics::random_piecewise_battery(5, 3, g);
    ASSERT_EQ(a.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i)
        for (double t : {0.01, 0.3, 0.77, 0.99}) {
            EXPECT_DOUBLE_EQ(a[i](t), b[i](t));
            EXPECT_LE(std::abs(a[i](t)), 2.0);
        }
}
