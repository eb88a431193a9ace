#include "core/error.hpp"
#include "core/fbsde_core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace fracbsde;

namespace {

FbmModel model(double H, double T, int N) { return FbmModel{HurstParam(H), TimeGrid(T, N)}; }

double zero_driver(double, double) { return 0.0; }

}  // namespace

TEST(TerminalMap, PresetsAndSlopes) {
    EXPECT_DOUBLE_EQ(TerminalMap::square()(3.0), 9.0);
    EXPECT_DOUBLE_EQ(TerminalMap::square().slope(3.0), 6.0);
    EXPECT_DOUBLE_EQ(TerminalMap::call(1.0)(0.5), 0.0);
    EXPECT_DOUBLE_EQ(TerminalMap::call(1.0).slope(1.5), 1.0);
    EXPECT_DOUBLE_EQ(TerminalMap::affine(1.0, 2.0)(3.0), 7.0);
    TerminalMap no_derivative{[](double x) { return x * x * x; }, {}, 3, "cube"};
    EXPECT_NEAR(no_derivative.slope(2.0), 12.0, 1e-8);
}

TEST(QuasiExpectation, GaussianSmoothingOfPolynomials) {
    const auto m = model(0.75, 1.0, 64);
    ForwardCoefficients fwd{0.0, DeterministicFn::constant(2.0, FnRole::drift),
                            DeterministicFn::constant(1.0, FnRole::volatility)};
    EXPECT_NEAR(fbsde::quasi_expectation(TerminalMap::identity(), 0.25, 1.0, fwd, m), 1.0 + 2.0 * 0.75,
                1e-12);
    const double var = 1.0 - std::pow(0.25, 1.5);
    EXPECT_NEAR(fbsde::quasi_expectation(TerminalMap::square(), 0.25, 1.0, fwd, m),
                2.5 * 2.5 + var, 1e-10);
    EXPECT_NEAR(fbsde::quasi_expectation(TerminalMap::square(), 1.0, 1.0, fwd, m), 1.0, 1e-14);
    EXPECT_THROW(fbsde::quasi_expectation(TerminalMap::square(), 1.5, 1.0, fwd, m), Error);
}

TEST(MarkovianPde, QuadraticTerminalAtOrigin) {
    for (double H : {0.6, 0.75, 0.9}) {
        const auto m = model(H, 1.0, 128);
        const auto field =
            fbsde::solve_markovian_pde(TerminalMap::square(), zero_driver, ForwardCoefficients{}, m);
        double u, ux;
        fbsde::interpolate(field, 0, 0.0, u, ux);
        EXPECT_NEAR(u, 1.0, 1e-3) << "H=" << H;
        EXPECT_NEAR(ux, 0.0, 1e-6);
    }
}

TEST(MarkovianPde, CosineTerminalMatchesHeatSolution) {
    const double H = 0.7, T = 1.0;
    const auto m = model(H, T, 128);
    const auto field =
        fbsde::solve_markovian_pde(TerminalMap::cosine(), zero_driver, ForwardCoefficients{}, m);
    for (int i : {0, 32, 64, 100}) {
        const double t = m.grid.time(i);
        const double decay = std::exp(-0.5 * (std::pow(T, 2 * H) - std::pow(t, 2 * H)));
        for (double x : {-1.0, 0.0, 0.4, 1.3}) {
            double u, ux;
            fbsde::interpolate(field, i, x, u, ux);
            EXPECT_NEAR(u, std::cos(x) * decay, 2e-4) << "t=" << t << " x=" << x;
            EXPECT_NEAR(ux, -std::sin(x) * decay, 2e-3);
        }
    }
}

TEST(MarkovianPde, ConstantDriverAddsRemainingTime) {
    const auto m = model(0.75, 2.0, 64);
    ForwardCoefficients fwd{1.0, DeterministicFn::constant(0.5, FnRole::drift),
                            DeterministicFn::constant(1.0, FnRole::volatility)};
    const auto field = fbsde::solve_markovian_pde(
        TerminalMap::identity(), [](double, double) { return 3.0; }, fwd, m);
    double u, ux;
    fbsde::interpolate(field, 16, 1.2, u, ux);
    const double rem = 2.0 - m.grid.time(16);
    EXPECT_NEAR(u, 1.2 + 0.5 * rem + 3.0 * rem, 1e-8);
    EXPECT_NEAR(ux, 1.0, 1e-8);
}

TEST(MarkovianPde, RejectsBadInputs) {
    const auto m = model(0.75, 1.0, 16);
    EXPECT_THROW(fbsde::solve_markovian_pde(TerminalMap::square(), zero_driver, ForwardCoefficients{}, m,
                                            PdeOptions{3, 6.0}),
                 Error);
    ForwardCoefficients bad{0.0, DeterministicFn::constant(0.0, FnRole::drift),
                            DeterministicFn::constant(0.0, FnRole::volatility)};
    EXPECT_THROW(fbsde::solve_markovian_pde(TerminalMap::square(), zero_driver, bad, m), Error);
    TerminalMap exploding{[](double x) { return x > 0 ? INFINITY : 0.0; }, {}, 1, "inf"};
    EXPECT_THROW(fbsde::solve_markovian_pde(exploding, zero_driver, ForwardCoefficients{}, m), Error);
}

TEST(EvaluateOnPaths, TerminalSliceIsExactAndDomainIsChecked) {
    const auto m = model(0.75, 1.0, 32);
    const auto paths = sampler::sample_fbm(m, 500, 5, SamplingMethod::cholesky);
    const auto eta = sampler::simulate_forward(ForwardCoefficients{}, paths);
    const auto field =
        fbsde::solve_markovian_pde(TerminalMap::square(), zero_driver, ForwardCoefficients{}, m);
    const auto sol = fbsde::evaluate_on_paths(field, TerminalMap::square(), eta);
    for (Index p = 0; p < 5; ++p) {
        const double x = eta.values(p, 32);
        EXPECT_DOUBLE_EQ(sol.Y(p, 32), x * x);
        EXPECT_DOUBLE_EQ(sol.Z(p, 32), 2 * x);
        const double x8 = eta.values(p, 8);
        EXPECT_NEAR(sol.Y(p, 8), x8 * x8 + 1.0 - std::pow(0.25, 1.5), 1e-3);
    }
    const auto narrow = fbsde::solve_markovian_pde(TerminalMap::square(), zero_driver,
                                                   ForwardCoefficients{}, m, PdeOptions{100, 0.5});
    try {
        fbsde::evaluate_on_paths(narrow, TerminalMap::square(), eta);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::domain_truncation);
    }
}

TEST(AprioriEstimate, HoldsForExactSolutionAndNeedsPositiveBeta) {
    const auto m = model(0.75, 1.0, 32);
    const auto paths = sampler::sample_fbm(m, 2000, 8, SamplingMethod::cholesky);
    const auto eta = sampler::simulate_forward(ForwardCoefficients{}, paths);
    // f = 0, h = id: Y = eta, Z = 1.
    const Matrix& Y = eta.values;
    const Matrix Z = Matrix::Ones(Y.rows(), Y.cols());
    const Matrix g = Matrix::Zero(Y.rows(), Y.cols());
    const Vector terminal = Y.col(32);
    const auto rep = fbsde::apriori_estimate_check(Y, Z, g, terminal, m.grid, m.hurst,
                                                   KernelConstants{2.5, 1.0, 0.0});
    EXPECT_TRUE(rep.satisfied);
    EXPECT_LE(rep.lhs, rep.rhs);
    EXPECT_THROW(fbsde::apriori_estimate_check(Y, Z, g, terminal, m.grid, m.hurst,
                                               KernelConstants{2.5, 0.0, 0.0}),
                 Error);
    EXPECT_THROW(fbsde::apriori_estimate_check(Y.leftCols(10), Z, g, terminal, m.grid, m.hurst,
                                               KernelConstants{2.5, 1.0, 0.0}),
                 Error);
}

TEST(FieldCsv, HeaderAndRowCount) {
    const auto m = model(0.75, 1.0, 4);
    const auto field = fbsde::solve_markovian_pde(TerminalMap::identity(), zero_driver,
                                                  ForwardCoefficients{}, m, PdeOptions{8, 4.0});
    std::ostringstream os;
    fbsde::write_field_csv(os, field);
    const std::string s = os.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "t,x,u,ux");
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1 + 5 * 9);
}
