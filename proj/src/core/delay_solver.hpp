#pragma once

// Picard iteration for BSDEs whose generator sees the solution at t - delta,
// the admissibility constants that certify it, and the monotone sequence
// behind the comparison of two such equations.

#include "core/diagnostics.hpp"
#include "core/error.hpp"
#include "core/fbsde_core.hpp"
#include "core/kernel.hpp"
#include "core/regression.hpp"
#include "core/sampler.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fracbsde {

/// f(t, x, y, z, y_delay, z_delay) with its dependence flags and the
/// Lipschitz constant L of the weighted condition
///   |df|^2 <= L (|dy|^2 + t^(2H-1)|dz|^2 + |dy_d|^2 + |t-delta|^(2H-1)|dz_d|^2).
struct GeneratorSpec {
    using Fn = std::function<double(double t, double x, double y, double z, double y_delay,
                                    double z_delay)>;

    Fn f;
    bool uses_y = false;
    bool uses_z = false;
    bool uses_y_delay = false;
    bool uses_z_delay = false;
    double L = 0.0;
    std::optional<bool> monotone_in_y_delay;
    std::string label;

    bool uses_delay() const noexcept { return uses_y_delay || uses_z_delay; }
    double operator()(double t, double x, double y, double z, double yd, double zd) const {
        return f(t, x, y, z, yd, zd);
    }

    static GeneratorSpec zero();
    static GeneratorSpec constant(double c);
    /// a * y
    static GeneratorSpec linear_y(double a);
    /// a * y_delay
    static GeneratorSpec linear_delay(double a);
    /// y + t^(2H-1) z + y_delay + shift; shift = -1 and +1 give the ordered pair
    /// of the worked comparison example. L = 3 max(1, T^(2H-1)).
    static GeneratorSpec example43(double H, double T, double shift);
};

struct DelayedBsdeProblem {
    FbmModel model;  ///< grid.delay_steps() = k, delta = k dt
    ForwardCoefficients forward;
    TerminalMap terminal = TerminalMap::identity();
    GeneratorSpec generator = GeneratorSpec::zero();
    DeterministicFn phi0 = DeterministicFn::constant(0.0, FnRole::initial_y);
    DeterministicFn psi0 = DeterministicFn::constant(0.0, FnRole::initial_z);

    void validate() const;
};

struct IterationRecord {
    int iter = 0;
    double distance = 0.0;
    double ratio = 0.0;  ///< distance / previous distance; NaN on the first iteration
    double seconds = 0.0;
};

struct IterationTrace {
    std::vector<IterationRecord> records;

    bool empty() const noexcept { return records.empty(); }
    std::size_t size() const noexcept { return records.size(); }
    /// Ratios from the second iteration on.
    std::vector<double> ratios() const;
};

/// Picard loop stalled: the distance did not decrease over the last three
/// iterations before max_iter.
class DivergenceError : public Error {
public:
    DivergenceError(IterationTrace trace, const std::string& what)
        : Error(ErrorCode::divergence, what), trace_(std::move(trace)) {}

    const IterationTrace& trace() const noexcept { return trace_; }

private:
    IterationTrace trace_;
};

enum class AdmissibilityMode { existence, comparison, horizon };

const char* to_string(AdmissibilityMode m) noexcept;
AdmissibilityMode parse_admissibility_mode(const std::string& name);

struct Admissibility {
    double beta = 0.0;
    double delta_max = 0.0;
};

/// A point at which generator conditions are probed.
struct Probe {
    double t, x, y, z, y_delay, z_delay;
};

struct LipschitzProbeReport {
    double minimal_L = 0.0;        ///< smallest L satisfying the weighted condition on the probes
    bool degenerate_at_delay = false;  ///< z_delay sensitivity at t = delta needs L = infinity
    bool passes = true;            ///< minimal_L <= declared L (up to rounding)
    std::size_t probes = 0;
};

struct PicardConfig {
    double tol = 1e-6;
    int max_iter = 50;
    RegressionBasis basis;
    AdmissibilityMode mode = AdmissibilityMode::existence;
    std::optional<double> beta;  ///< default: from the admissibility formulas
    std::optional<double> M;     ///< default: ratio bound of sigma
    std::optional<double> v;     ///< horizon mode only; default 1/(8 L M e^beta)

    void validate() const;
};

struct PicardResult {
    SolutionEnsemble solution;
    IterationTrace trace;
    bool converged = false;
    bool admissible = false;
    bool certified = false;
    double beta = 0.0;
    double M = 0.0;
    double delta_max = 0.0;   ///< existence/comparison gate
    double horizon_max = 0.0; ///< horizon gate (0 when unused)
    double threshold = 0.0;   ///< stop once sqrt(distance) < tol (1 + ||Y^1||)
    LipschitzProbeReport lipschitz;
};

struct ComparisonConfig {
    double tol = 1e-6;
    int max_iter = 50;
    int min_iter = 5;
    double tol_num_factor = 1e-3;  ///< tol_num = factor * max(1, rms of Y2)
    double failure_share = 1e-3;   ///< dominance failure beyond this share of points
    RegressionBasis basis;
};

struct ComparisonResult {
    std::vector<Matrix> sequence;          ///< Y of the monotone iterates on the evaluation paths, n = 0.. (n = 0 is Y2)
    IterationTrace trace;
    std::vector<double> monotone_violation;  ///< max(Y_n - Y_{n-1}) for n >= 1
    double tol_num = 0.0;
    DominanceReport dominance;  ///< limit vs Y2
    bool comparison_failure = false;
    bool psi_ordered = true;  ///< checked, not used by the construction
    double cross_check_gap = 0.0;  ///< max |limit - direct Picard solve| / scale
    SolutionEnsemble limit;
};

namespace delay {

/// beta = 2LMe + 4/M (existence) or 8LMe + 4/M (comparison), delta_max = 1/beta.
Admissibility admissible_delay(double L, double M, AdmissibilityMode mode);

/// Largest T <= 1e3 with L M v e^{beta T} < 1/4 and
/// (8 L^3 / v) M e^{beta T} (T + 2 T^{2-2H}/(2-2H))^2 < 1/4. With step > 0 the
/// result is rounded down to a multiple of step.
double admissible_horizon(double L, double M, double H, double beta, double v, double step = 0.0);

/// Quantile probes of (eta, Y, Z) and the delayed values at a spread of grid
/// times including t = delta.
std::vector<Probe> make_probes(const SolutionEnsemble& sol, const ForwardEnsemble& fwd,
                               std::size_t times = 17);

bool check_monotone(const GeneratorSpec& gen, const std::vector<Probe>& probes);

LipschitzProbeReport probe_lipschitz(const GeneratorSpec& gen, const std::vector<Probe>& probes,
                                     HurstParam H, double delta);

/// Zero iterate with the initial segments in place.
SolutionEnsemble initial_iterate(const DelayedBsdeProblem& problem, Index eval_paths,
                                 Index fit_paths);

/// One backward sweep with the delayed arguments read from `frozen`.
/// Regressions are fitted on `fit` (an independent-increment ensemble) and
/// evaluated on `eval`.
SolutionEnsemble inner_step(const DelayedBsdeProblem& problem, const SolutionEnsemble& frozen,
                            const ForwardEnsemble& eval, const ForwardEnsemble& fit,
                            const RegressionBasis& basis);

/// Weighted distance ||dY||^2 + ||dZ||^2 over [-delta, T] on the evaluation paths.
double iterate_distance(const SolutionEnsemble& a, const SolutionEnsemble& b, double beta, HurstParam H);

PicardResult solve_delayed_picard(const DelayedBsdeProblem& problem, const ForwardEnsemble& eval,
                                  const ForwardEnsemble& fit, const PicardConfig& config);

/// Monotone sequence Y~_n solving the equation of problem1 with the delayed
/// value frozen at Y~_{n-1}, started from the solution of problem2.
ComparisonResult solve_comparison_sequence(const DelayedBsdeProblem& problem1,
                                           const DelayedBsdeProblem& problem2,
                                           const SolutionEnsemble& dominating,
                                           const ForwardEnsemble& eval, const ForwardEnsemble& fit,
                                           const ComparisonConfig& config,
                                           const PicardConfig& cross_check);

/// Driver f evaluated along a solution, n x (N+1) on t_0..t_N.
Matrix generator_along(const DelayedBsdeProblem& problem, const SolutionEnsemble& sol,
                       const ForwardEnsemble& eval);

/// A-priori estimate for the solution with g = f along the solution.
AprioriReport apriori_estimate_check(const DelayedBsdeProblem& problem, const SolutionEnsemble& sol,
                                     const ForwardEnsemble& eval, const KernelConstants& constants,
                                     double stat_tol = 0.05);

}  // namespace delay
}  // namespace fracbsde
