#include "core/delay_solver.hpp"
#include "core/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace fracbsde;

namespace {

struct Setup {
    DelayedBsdeProblem problem;
    ForwardEnsemble eval;
    ForwardEnsemble fit;
};

Setup make_setup(double T, int N, int k, GeneratorSpec gen, DeterministicFn phi0, Index paths = 2000) {
    FbmModel m{HurstParam(0.75), TimeGrid(T, N, k)};
    DelayedBsdeProblem p{m, ForwardCoefficients{}};
    p.generator = std::move(gen);
    p.phi0 = std::move(phi0);
    const auto fbm = sampler::sample_fbm(FbmModel{m.hurst, TimeGrid(T, N)}, paths, 1, SamplingMethod::cholesky);
    auto eval = sampler::simulate_forward(p.forward, fbm);
    auto fit = sampler::simulate_quasi_markov(p.forward, FbmModel{m.hurst, TimeGrid(T, N)}, paths,
                                              sampler::derive_seed(1, 1));
    return {std::move(p), std::move(eval), std::move(fit)};
}

}  // namespace

TEST(Admissibility, DelayConstants) {
    const auto e = delay::admissible_delay(1.0, 2.5, AdmissibilityMode::existence);
    EXPECT_NEAR(e.delta_max, 0.065827, 5e-7);
    EXPECT_NEAR(e.beta, 2 * 2.5 * std::numbers::e + 1.6, 1e-12);
    const auto c = delay::admissible_delay(1.0, 2.5, AdmissibilityMode::comparison);
    EXPECT_NEAR(c.delta_max, 0.017868, 5e-7);
    const auto z = delay::admissible_delay(0.0, 2.5, AdmissibilityMode::existence);
    EXPECT_DOUBLE_EQ(z.delta_max, 0.625);
}

TEST(Admissibility, ConstantViolations) {
    for (double M : {2.0, 1.0, -3.0}) {
        try {
            delay::admissible_delay(1.0, M, AdmissibilityMode::existence);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::constant_violation);
        }
    }
    EXPECT_THROW(delay::admissible_delay(-1.0, 2.5, AdmissibilityMode::existence), Error);
    EXPECT_THROW(delay::admissible_delay(1.0, 2.5, AdmissibilityMode::horizon), Error);
}

TEST(Admissibility, HorizonSatisfiesBothInequalities) {
    const double L = 1.0, M = 2.5, H = 0.75, beta = 1.1;
    const double v = 1.0 / (8 * L * M * std::exp(beta));
    const double T = delay::admissible_horizon(L, M, H, beta, v);
    ASSERT_GT(T, 0.0);
    auto second = [&](double t) {
        const double q = 2 - 2 * H;
        const double s = t + 2 * std::pow(t, q) / q;
        return 8 * L * L * L / v * M * std::exp(beta * t) * s * s;
    };
    EXPECT_LT(L * M * v * std::exp(beta * T), 0.25);
    EXPECT_LT(second(T), 0.25);
    EXPECT_GE(second(T * 1.001), 0.25);
    EXPECT_LE(delay::admissible_horizon(L, M, H, beta, v, 1e-6), T);
}

TEST(Admissibility, InfeasibleHorizonNamesTheInequality) {
    try {
        delay::admissible_horizon(1.0, 2.5, 0.75, 1.1, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::infeasible);
        EXPECT_NE(std::string(e.what()).find("L M v"), std::string::npos);
    }
    EXPECT_THROW(delay::admissible_horizon(1.0, 2.5, 0.75, 0.5, 0.01), Error);
}

TEST(Generators, PresetsAndFlags) {
    const auto g = GeneratorSpec::linear_delay(0.5);
    EXPECT_TRUE(g.uses_y_delay);
    EXPECT_FALSE(g.uses_y);
    EXPECT_DOUBLE_EQ(g.L, 0.25);
    EXPECT_DOUBLE_EQ(g(0.3, 1.0, 2.0, 3.0, 4.0, 5.0), 2.0);
    const auto minus = GeneratorSpec::example43(0.75, 0.5, -1.0);
    const auto plus = GeneratorSpec::example43(0.75, 0.5, 1.0);
    EXPECT_DOUBLE_EQ(plus(0.25, 0, 1, 2, 3, 0) - minus(0.25, 0, 1, 2, 3, 0), 2.0);
    EXPECT_DOUBLE_EQ(minus(0.25, 0, 1, 2, 3, 0), 1 + std::sqrt(0.25) * 2 + 3 - 1);
    EXPECT_DOUBLE_EQ(minus.L, 3.0);
}

TEST(Probes, MonotonicityAndLipschitz) {
    auto s = make_setup(1.0, 32, 4, GeneratorSpec::linear_delay(0.5), DeterministicFn::constant(0.0));
    const auto sol = delay::initial_iterate(s.problem, s.eval.n_paths(), s.fit.n_paths());
    const auto probes = delay::make_probes(sol, s.eval);
    EXPECT_FALSE(probes.empty());
    EXPECT_TRUE(delay::check_monotone(GeneratorSpec::linear_delay(0.5), probes));
    EXPECT_FALSE(delay::check_monotone(GeneratorSpec::linear_delay(-0.5), probes));
    const auto rep = delay::probe_lipschitz(GeneratorSpec::linear_delay(0.5), probes, HurstParam(0.75), 0.125);
    EXPECT_TRUE(rep.passes);
    EXPECT_LE(rep.minimal_L, 0.25 * (1 + 1e-9));
    auto wrong = GeneratorSpec::linear_delay(2.0);
    wrong.L = 1.0;
    EXPECT_FALSE(delay::probe_lipschitz(wrong, probes, HurstParam(0.75), 0.125).passes);
}

TEST(Picard, DelayCoveringHorizonConvergesInOnePass) {
    auto s = make_setup(0.5, 32, 32, GeneratorSpec::linear_delay(1.0), DeterministicFn::constant(1.0));
    const auto r = delay::solve_delayed_picard(s.problem, s.eval, s.fit, PicardConfig{});
    EXPECT_EQ(r.trace.size(), 1u);
    EXPECT_TRUE(r.converged);
    const int k = r.solution.segment();
    for (int i : {0, 8, 16, 32}) {
        const double t = s.problem.model.grid.time(i);
        const double y = r.solution.Y.col(k + i).mean();
        const double eta = s.eval.values.col(i).mean();
        EXPECT_NEAR(y, eta + 0.5 - t, 1e-2 * (1 + std::abs(eta + 0.5 - t)));
        EXPECT_NEAR(r.solution.Z.col(k + i).mean(), 1.0, 1e-2);
    }
    // Initial segment is phi0 on [-delta, 0).
    EXPECT_DOUBLE_EQ(r.solution.Y(0, 0), 1.0);
}

TEST(Picard, ContractsUnderAdmissibleDelay) {
    const auto adm = delay::admissible_delay(0.5, 2.5, AdmissibilityMode::existence);
    const int N = 64;
    const int k = static_cast<int>(std::floor(0.5 * adm.delta_max / (1.0 / N)));
    auto s = make_setup(1.0, N, std::max(k, 1), GeneratorSpec::linear_delay(0.5), DeterministicFn::constant(0.0));
    s.problem.generator.L = 0.5;
    PicardConfig c;
    c.M = 2.5;
    const auto r = delay::solve_delayed_picard(s.problem, s.eval, s.fit, c);
    EXPECT_TRUE(r.converged);
    EXPECT_TRUE(r.admissible);
    for (double ratio : r.trace.ratios()) EXPECT_LE(ratio, 0.5);
    EXPECT_GE(r.trace.size(), 3u);
}

TEST(Picard, DivergenceCarriesTheTrace) {
    auto s = make_setup(1.0, 32, 1, GeneratorSpec::linear_delay(40.0), DeterministicFn::constant(1.0), 500);
    PicardConfig c;
    c.max_iter = 4;
    try {
        delay::solve_delayed_picard(s.problem, s.eval, s.fit, c);
        FAIL();
    } catch (const DivergenceError& e) {
        EXPECT_EQ(e.code(), ErrorCode::divergence);
        EXPECT_EQ(e.trace().size(), 4u);
    }
}

TEST(Picard, ConfigValidation) {
    PicardConfig c;
    c.tol = 0.0;
    EXPECT_THROW(c.validate(), Error);
    c = PicardConfig{};
    c.max_iter = 0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Picard, IterateDistanceIsZeroOnItself) {
    auto s = make_setup(1.0, 16, 2, GeneratorSpec::linear_delay(0.5), DeterministicFn::constant(1.0), 200);
    const auto a = delay::initial_iterate(s.problem, s.eval.n_paths(), s.fit.n_paths());
    EXPECT_DOUBLE_EQ(delay::iterate_distance(a, a, 1.0, HurstParam(0.75)), 0.0);
    const auto b = delay::inner_step(s.problem, a, s.eval, s.fit, RegressionBasis{});
    EXPECT_GT(delay::iterate_distance(a, b, 1.0, HurstParam(0.75)), 0.0);
}

TEST(Comparison, RequiresMonotoneGeneratorAndOrderedData) {
    auto s1 = make_setup(0.5, 32, 1, GeneratorSpec::linear_delay(-1.0), DeterministicFn::constant(0.0), 300);
    auto s2 = make_setup(0.5, 32, 1, GeneratorSpec::linear_delay(1.0), DeterministicFn::constant(0.5), 300);
    const auto dom = delay::solve_delayed_picard(s2.problem, s2.eval, s2.fit, PicardConfig{});
    try {
        delay::solve_comparison_sequence(s1.problem, s2.problem, dom.solution, s2.eval, s2.fit,
                                         ComparisonConfig{}, PicardConfig{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::precondition);
    }
    // phi1 > phi2 breaks the ordering of the initial segments.
    auto s3 = make_setup(0.5, 32, 1, GeneratorSpec::linear_delay(1.0), DeterministicFn::constant(2.0), 300);
    EXPECT_THROW(delay::solve_comparison_sequence(s3.problem, s2.problem, dom.solution, s2.eval, s2.fit,
                                                  ComparisonConfig{}, PicardConfig{}),
                 Error);
}

TEST(Comparison, OrderedPairIsDominated) {
    const double H = 0.75, T = 0.5;
    auto s1 = make_setup(T, 32, 1, GeneratorSpec::example43(H, T, -1.0), DeterministicFn::constant(0.0));
    auto s2 = make_setup(T, 32, 1, GeneratorSpec::example43(H, T, 1.0), DeterministicFn::constant(0.5));
    PicardConfig pc;
    pc.mode = AdmissibilityMode::comparison;
    pc.M = 2.5;
    const auto dom = delay::solve_delayed_picard(s2.problem, s2.eval, s2.fit, pc);
    const auto r = delay::solve_comparison_sequence(s1.problem, s2.problem, dom.solution, s2.eval,
                                                    s2.fit, ComparisonConfig{}, pc);
    EXPECT_TRUE(r.dominance.verdict);
    EXPECT_FALSE(r.comparison_failure);
    ASSERT_GE(r.monotone_violation.size(), 5u);
    for (std::size_t n = 0; n < 5; ++n) EXPECT_LE(r.monotone_violation[n], r.tol_num);
    EXPECT_LT(r.cross_check_gap, 1e-2);
}
