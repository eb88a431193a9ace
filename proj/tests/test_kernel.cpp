#include "core/error.hpp"
#include "core/kernel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace fracbsde;

namespace {

// Covariance of fBm, the independent oracle for indicator inner products.
double fbm_cov(double t, double s, double H) {
    return 0.5 * (std::pow(t, 2 * H) + std::pow(s, 2 * H) - std::pow(std::abs(t - s), 2 * H));
}

// Tensor Gauss-Legendre on a rectangle away from the diagonal.
double brute_double_integral(double a, double b, double c, double d, double H) {
    static const double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                0.9061798459386640};
    static const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                0.4786286704993665, 0.2369268850561891};
    const int pieces = 40;
    double acc = 0.0;
    const double hu = (b - a) / pieces, hv = (d - c) / pieces;
    for (int i = 0; i < pieces; ++i)
        for (int j = 0; j < pieces; ++j)
            for (int p = 0; p < 5; ++p)
                for (int q = 0; q < 5; ++q) {
                    const double u = a + (i + 0.5 * (x[p] + 1)) * hu;
                    const double v = c + (j + 0.5 * (x[q] + 1)) * hv;
                    acc += w[p] * w[q] * H * (2 * H - 1) * std::pow(std::abs(u - v), 2 * H - 2);
                }
    return acc * hu * hv / 4.0;
}

}  // namespace

TEST(HurstParam, RejectsValuesOutsideOpenInterval) {
    for (double h : {0.5, 1.0, 0.3, 1.2, std::nan("")}) {
        try {
            HurstParam p(h);
            FAIL() << "accepted H = " << h;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::domain);
        }
    }
    EXPECT_NO_THROW(HurstParam(0.5000001));
    EXPECT_DOUBLE_EQ(HurstParam(0.75).weight_exponent(), 0.5);
}

TEST(TimeGrid, ValidatesAndExposesSpacing) {
    TimeGrid g(2.0, 8, 3);
    EXPECT_DOUBLE_EQ(g.dt(), 0.25);
    EXPECT_DOUBLE_EQ(g.delay(), 0.75);
    EXPECT_DOUBLE_EQ(g.time(8), 2.0);
    EXPECT_THROW(TimeGrid(0.0, 8), Error);
    EXPECT_THROW(TimeGrid(1.0, 0), Error);
    EXPECT_THROW(TimeGrid(1.0, 8, -1), Error);
}

TEST(DeterministicFn, CellValuesUseMidpoints) {
    TimeGrid g(1.0, 4);
    const auto f = DeterministicFn::affine(1.0, 2.0);
    const auto cells = f.cell_values(g);
    ASSERT_EQ(cells.size(), 4u);
    EXPECT_DOUBLE_EQ(cells[0], 1.25);
    EXPECT_DOUBLE_EQ(cells[3], 1.0 + 2.0 * 0.875);
    const auto nodes = f.grid_values(g);
    EXPECT_DOUBLE_EQ(nodes.back(), 3.0);
}

TEST(DeterministicFn, PiecewiseRejectsBadBreaks) {
    EXPECT_THROW(DeterministicFn::piecewise({0.0, 0.5, 0.4}, {1.0, 2.0}), Error);
    EXPECT_THROW(DeterministicFn::piecewise({0.0, 1.0}, {1.0, 2.0}), Error);
    const auto f = DeterministicFn::piecewise({0.0, 0.5, 1.0}, {1.0, -2.0});
    EXPECT_DOUBLE_EQ(f(0.25), 1.0);
    EXPECT_DOUBLE_EQ(f(0.75), -2.0);
}

TEST(Kernel, PhiMatchesDefinition) {
    const HurstParam H(0.75);
    EXPECT_NEAR(kernel::phi(1.0, H), 0.375, 1e-15);
    EXPECT_NEAR(kernel::phi(-0.25, H), 0.75 * 0.5 * std::pow(0.25, -0.5), 1e-14);
    EXPECT_THROW(kernel::phi(0.0, H), Error);
}

TEST(Kernel, DiagonalCellIntegralIsPowerOfWidth) {
    for (double h : {0.6, 0.75, 0.9}) {
        const HurstParam H(h);
        EXPECT_NEAR(kernel::cell_pair_integral(0.3, 0.7, 0.3, 0.7, H), std::pow(0.4, 2 * h), 1e-13);
    }
}

TEST(Kernel, OffDiagonalCellIntegralMatchesBruteForce) {
    const HurstParam H(0.7);
    const double exact = kernel::cell_pair_integral(0.0, 0.2, 0.5, 0.9, H);
    EXPECT_NEAR(exact, brute_double_integral(0.0, 0.2, 0.5, 0.9, 0.7), 1e-10);
    // Symmetry in the two cells.
    EXPECT_NEAR(exact, kernel::cell_pair_integral(0.5, 0.9, 0.0, 0.2, H), 1e-15);
}

TEST(Kernel, IndicatorInnerProductsMatchCovariance) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> node(1, 64);
    for (double h : {0.6, 0.75, 0.9}) {
        const HurstParam H(h);
        const TimeGrid g(1.0, 64);
        for (int rep = 0; rep < 20; ++rep) {
            const double t = g.time(node(rng)), s = g.time(node(rng));
            const auto ft = DeterministicFn::indicator(0.0, t);
            const auto fs = DeterministicFn::indicator(0.0, s);
            const double got = kernel::inner_product(ft, fs, 1.0, H, g);
            EXPECT_NEAR(got, fbm_cov(t, s, h), 1e-6 * std::max(1.0, fbm_cov(t, s, h)));
        }
    }
}

TEST(Kernel, ConstantOneNormIsPowerOfHorizon) {
    for (double T : {0.5, 1.0, 2.0})
        for (double h : {0.6, 0.75, 0.9}) {
            const TimeGrid g(T, 128);
            const double v = kernel::inner_product(DeterministicFn::constant(1.0),
                                                   DeterministicFn::constant(1.0), T, HurstParam(h), g);
            EXPECT_NEAR(v / std::pow(T, 2 * h), 1.0, 1e-6) << "T=" << T << " H=" << h;
        }
}

TEST(Kernel, InnerProductAtOffGridTime) {
    const TimeGrid g(1.0, 10);
    const HurstParam H(0.8);
    const double t = 0.37;
    const std::vector<double> ones(10, 1.0);
    EXPECT_NEAR(kernel::inner_product_cells(ones, ones, g.dt(), t, H), std::pow(t, 1.6), 1e-12);
}

TEST(Kernel, SigmaHatClosedFormForConstantSigma) {
    const double sigma = 1.7;
    for (double h : {0.6, 0.75, 0.9}) {
        const HurstParam H(h);
        const TimeGrid g(1.0, 128);
        const auto s = DeterministicFn::constant(sigma, FnRole::volatility);
        for (int i = 1; i <= 128; ++i) {
            const double t = g.time(i);
            EXPECT_NEAR(kernel::sigma_hat(s, t, H, g), sigma * h * std::pow(t, 2 * h - 1), 1e-8);
        }
    }
}

TEST(Kernel, NormDerivativeIsTwiceSigmaHatSigma) {
    const HurstParam H(0.7);
    const TimeGrid g(1.0, 200);
    const auto s = DeterministicFn::affine(1.0, 0.5, FnRole::volatility);
    const auto norms = kernel::sigma_norm_sq_on_grid(s, H, g);
    for (int i = 20; i < 180; i += 10) {
        const double fd = (norms[i + 1] - norms[i - 1]) / (2 * g.dt());
        const double t = g.time(i);
        EXPECT_NEAR(fd, 2 * kernel::sigma_hat(s, t, H, g) * s(t), 5 * g.dt());
    }
}

TEST(Kernel, RatioBoundExceedsTwo) {
    const TimeGrid g(1.0, 128);
    for (double h : {0.55, 0.75, 0.95}) {
        const double M1 = kernel::ratio_bound(DeterministicFn::constant(1.0, FnRole::volatility), HurstParam(h), g);
        const double M2 = kernel::ratio_bound(DeterministicFn::affine(1.0, 1.0, FnRole::volatility), HurstParam(h), g);
        EXPECT_GT(M1, 2.0);
        EXPECT_GT(M2, 2.0);
    }
}

TEST(Kernel, RejectsNonPositiveVolatility) {
    const TimeGrid g(1.0, 16);
    try {
        kernel::validate_volatility(DeterministicFn::affine(1.0, -2.0, FnRole::volatility), g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_coefficient);
    }
}

TEST(KernelConstants, ValidateChecksM) {
    KernelConstants k{2.0, 1.0, 1.0};
    EXPECT_THROW(k.validate(), Error);
    k.M = 2.5;
    EXPECT_NO_THROW(k.validate());
    k.L = -1.0;
    EXPECT_THROW(k.validate(), Error);
}
