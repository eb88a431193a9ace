#include "experiment/runner.hpp"

#include "core/csv.hpp"
#include "core/delay_solver.hpp"
#include "core/diagnostics.hpp"
#include "core/error.hpp"
#include "core/fbsde_core.hpp"
#include "core/quadrature.hpp"
#include "experiment/scenarios.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace fracbsde::experiment {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// JSON number for finite values, null otherwise.
Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double param(const Json& p, const char* key) { return parse_number(p.at(key), key); }

/// Per-grid-time path means of the closed-form solution.
struct Reference {
    std::vector<double> y;
    std::vector<double> z;
};

struct Context {
    ExperimentConfig config;
    DelayedBsdeProblem problem;
    std::optional<DelayedBsdeProblem> dominating;
    std::optional<PathEnsemble> paths;
    std::optional<ForwardEnsemble> eval;
    std::optional<ForwardEnsemble> fit;
    std::optional<PicardResult> picard;
    std::optional<PicardResult> picard2;
    std::optional<ComparisonResult> comparison;
    std::optional<ValueField> field;
    std::optional<Reference> reference;
    bool reference_tried = false;
    Json z_scores = Json::object();
    Json isometry_summary;
    Json product_summary;

    Context(ExperimentConfig c, DelayedBsdeProblem p) : config(std::move(c)), problem(std::move(p)) {}

    const SolutionEnsemble* solution() const {
        if (comparison) return &comparison->limit;
        if (picard) return &picard->solution;
        return nullptr;
    }
    const IterationTrace* trace() const {
        if (comparison) return &comparison->trace;
        if (picard) return &picard->trace;
        return nullptr;
    }
};

// Affine generators a*y + c (no delay), or a*y_delay when every lookup hits
// a constant-free initial segment, have closed forms through the Gaussian
// smoothing of h.
std::optional<Reference> closed_form(const Context& ctx) {
    const auto& c = ctx.config;
    const auto& p = ctx.problem;
    const std::string& g = c.equation.generator;
    const std::string name = g.substr(0, g.find(':'));
    const TimeGrid& grid = p.model.grid;
    const int N = grid.steps();
    const int k = grid.delay_steps();
    const double dt = grid.dt();
    double a = 0.0, cst = 0.0, delayed = 0.0;
    const auto arg = [&] { return parse_number(Json(g.substr(g.find(':') + 1)), "generator"); };
    if (name == "zero") {
    } else if (name == "const") {
        cst = arg();
    } else if (name == "linear_y") {
        a = arg();
    } else if (name == "linear_delay" && k >= N) {
        delayed = arg();
    } else {
        return std::nullopt;
    }
    if (c.task != Task::picard || !ctx.eval) return std::nullopt;

    const auto& eval = *ctx.eval;
    const auto norms = kernel::sigma_norm_sq_on_grid(p.forward.sigma, p.model.hurst, grid);
    const auto b_cells = p.forward.b.cell_values(grid);
    std::vector<double> drift(static_cast<std::size_t>(N) + 1, 0.0);
    for (int i = 0; i < N; ++i) drift[i + 1] = drift[i] + b_cells[i] * dt;
    const auto sigma = p.forward.sigma.grid_values(grid);
    const auto& h = p.terminal;
    const auto slope = [&h](double x) { return h.slope(x); };

    Reference ref{std::vector<double>(static_cast<std::size_t>(N) + 1),
                  std::vector<double>(static_cast<std::size_t>(N) + 1)};
    double delay_sum = 0.0;
    for (int i = N; i >= 0; --i) {
        if (i < N) delay_sum += delayed * p.phi0(grid.time(i) - grid.delay()) * dt;
        const double rem = grid.horizon() - grid.time(i);
        const double growth = std::exp(a * rem);
        const double source = a != 0.0 ? cst * std::expm1(a * rem) / a : cst * rem;
        const double var = norms[N] - norms[i];
        const double sd = std::sqrt(std::max(var, 0.0));
        const double shift = drift[N] - drift[i];
        double my = 0.0, mz = 0.0;
        for (Index q = 0; q < eval.n_paths(); ++q) {
            const double x = eval.values(q, i) + shift;
            const double qh = sd > 0.0 ? quadrature::gaussian_expectation(h.h, x, sd) : h(x);
            const double qd = sd > 0.0 ? quadrature::gaussian_expectation(slope, x, sd) : h.slope(x);
            my += growth * qh + source + delay_sum;
            mz += sigma[i] * growth * qd;
        }
        ref.y[i] = my / static_cast<double>(eval.n_paths());
        ref.z[i] = mz / static_cast<double>(eval.n_paths());
    }
    return ref;
}

const Reference* reference(Context& ctx) {
    if (!ctx.reference_tried) {
        ctx.reference_tried = true;
        ctx.reference = closed_form(ctx);
    }
    return ctx.reference ? &*ctx.reference : nullptr;
}

bool pde_expressible(const GeneratorSpec& g) {
    return !g.uses_y && !g.uses_z && !g.uses_delay();
}

const ValueField* pde_field(Context& ctx) {
    if (ctx.field) return &*ctx.field;
    const auto& p = ctx.problem;
    if (!pde_expressible(p.generator)) return nullptr;
    const auto gen = p.generator.f;
    FbmModel plain{p.model.hurst, TimeGrid(p.model.grid.horizon(), p.model.grid.steps())};
    ctx.field = fbsde::solve_markovian_pde(
        p.terminal, [gen](double t, double x) { return gen(t, x, 0.0, 0.0, 0.0, 0.0); }, p.forward,
        plain);
    return &*ctx.field;
}

std::vector<double> column_means(const Matrix& m) {
    std::vector<double> out(static_cast<std::size_t>(m.cols()));
    for (Index c = 0; c < m.cols(); ++c) out[c] = m.col(c).mean();
    return out;
}

Json run_check(Context& ctx, const CheckSpec& check) {
    Json out = check.params;
    out["kind"] = check.kind;
    bool passed = false;
    const auto not_applicable = [&](const std::string& why) {
        out["passed"] = false;
        out["reason"] = why;
        return out;
    };
    const SolutionEnsemble* sol = ctx.solution();
    const IterationTrace* trace = ctx.trace();
    const TimeGrid& grid = ctx.problem.model.grid;
    const int N = grid.steps();

    if (check.kind == "apriori") {
        if (!sol) return not_applicable("no BSDE solution in this task");
        KernelConstants k{param(check.params, "M"), param(check.params, "beta"), ctx.problem.generator.L};
        const double stat_tol = param(check.params, "stat_tol");
        const auto rep = delay::apriori_estimate_check(ctx.problem, *sol, *ctx.eval, k, stat_tol);
        out["lhs"] = num(rep.lhs);
        out["rhs"] = num(rep.rhs);
        out["worst_ratio"] = num(rep.worst_ratio);
        out["t_worst"] = rep.t_worst;
        passed = rep.satisfied;
        if (ctx.comparison && ctx.dominating && ctx.picard2) {
            const auto rep2 = delay::apriori_estimate_check(*ctx.dominating, ctx.picard2->solution,
                                                            *ctx.eval, k, stat_tol);
            out["dominating"] = {{"lhs", num(rep2.lhs)},
                                 {"rhs", num(rep2.rhs)},
                                 {"worst_ratio", num(rep2.worst_ratio)},
                                 {"satisfied", rep2.satisfied}};
            passed = passed && rep2.satisfied;
        }
    } else if (check.kind == "closed_form") {
        if (!sol) return not_applicable("no BSDE solution in this task");
        const Reference* ref = reference(ctx);
        if (!ref) return not_applicable("no closed form for this generator");
        const double tol = param(check.params, "rel_tol");
        const bool plus_one = check.params.at("denominator") == "one_plus_abs";
        const bool check_z = check.params.at("check_z").get<bool>();
        std::vector<int> idx;
        if (check.params.contains("times")) {
            for (const auto& t : check.params.at("times")) {
                const double v = parse_number(t, "times");
                if (!(v >= 0.0 && v <= grid.horizon())) return not_applicable("check time outside [0, T]");
                idx.push_back(static_cast<int>(std::lround(v / grid.dt())));
            }
        } else {
            for (int i = 0; i <= N; ++i) idx.push_back(i);
        }
        double worst_y = 0.0, worst_z = 0.0;
        Json rows = Json::array();
        passed = true;
        for (int i : idx) {
            const double my = sol->Y.col(sol->column(i)).mean();
            const double mz = sol->Z.col(sol->column(i)).mean();
            const double dy = std::abs(my - ref->y[i]) / (plus_one ? 1.0 + std::abs(ref->y[i]) : std::abs(ref->y[i]));
            const double dz = std::abs(mz - ref->z[i]) / (plus_one ? 1.0 + std::abs(ref->z[i]) : std::abs(ref->z[i]));
            worst_y = std::max(worst_y, dy);
            worst_z = std::max(worst_z, dz);
            if (!(dy <= tol) || (check_z && !(dz <= tol))) passed = false;
            if (check.params.contains("times"))
                rows.push_back({{"t", grid.time(i)}, {"Y_mean", my}, {"Y_reference", ref->y[i]},
                                {"Z_mean", mz}, {"Z_reference", ref->z[i]}});
        }
        out["worst_error_y"] = num(worst_y);
        out["worst_error_z"] = num(worst_z);
        if (!rows.empty()) out["points"] = rows;
    } else if (check.kind == "one_pass") {
        if (!trace) return not_applicable("no Picard trace in this task");
        out["iterations"] = trace->size();
        passed = trace->size() == 1;
    } else if (check.kind == "contraction") {
        if (!ctx.picard) return not_applicable("no Picard solve in this task");
        const double bound = param(check.params, "max_ratio");
        const auto ratios = ctx.picard->trace.ratios();
        double worst = 0.0;
        for (double r : ratios) worst = std::max(worst, r);
        out["iterations"] = ctx.picard->trace.size();
        out["worst_ratio"] = num(worst);
        passed = static_cast<long long>(ctx.picard->trace.size()) >=
                     check.params.at("min_iterations").get<long long>() &&
                 worst <= bound;
    } else if (check.kind == "certified") {
        if (!ctx.picard) return not_applicable("no Picard solve in this task");
        out["admissible"] = ctx.picard->admissible;
        out["lipschitz_passes"] = ctx.picard->lipschitz.passes;
        passed = ctx.picard->certified;
    } else if (check.kind == "dominance") {
        if (!ctx.comparison) return not_applicable("no comparison in this task");
        const auto& cr = *ctx.comparison;
        const auto want = static_cast<std::size_t>(check.params.at("monotone_iterations").get<long long>());
        bool monotone = cr.monotone_violation.size() >= want;
        double worst = 0.0;
        for (std::size_t n = 0; n < std::min(want, cr.monotone_violation.size()); ++n) {
            worst = std::max(worst, cr.monotone_violation[n]);
            if (cr.monotone_violation[n] > cr.tol_num) monotone = false;
        }
        out["monotone_worst"] = num(worst);
        out["tol_num"] = cr.tol_num;
        out["fraction"] = cr.dominance.fraction;
        passed = cr.dominance.verdict && monotone && !cr.comparison_failure;
    } else if (check.kind == "isometry") {
        if (ctx.isometry_summary.is_null()) return not_applicable("no isometry battery in this task");
        const double zmax = param(check.params, "max_z");
        const auto& all = ctx.isometry_summary.at("cases");
        std::size_t ok = 0;
        for (const auto& c : all)
            if (std::abs(c.at("z_mean").get<double>()) <= zmax && std::abs(c.at("z_second").get<double>()) <= zmax)
                ++ok;
        const double share = all.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(all.size());
        out["pass_share"] = share;
        passed = share >= param(check.params, "min_pass_share");
    } else if (check.kind == "product_formula") {
        if (ctx.product_summary.is_null()) return not_applicable("no product-rule cases in this task");
        const double zmax = param(check.params, "max_z");
        passed = true;
        for (const auto& c : ctx.product_summary)
            if (!(c.at("max_abs_z").get<double>() <= zmax)) passed = false;
    } else if (check.kind == "pde_reduction") {
        if (!sol) return not_applicable("no BSDE solution in this task");
        const ValueField* field = pde_field(ctx);
        if (!field) return not_applicable("generator depends on (y, z) or delayed values");
        const SolutionEnsemble pde = fbsde::evaluate_on_paths(*field, ctx.problem.terminal, *ctx.eval);
        const auto a = column_means(sol->Y_on_grid());
        const auto b = column_means(pde.Y);
        const auto az = column_means(sol->Z_on_grid());
        const auto bz = column_means(pde.Z);
        double worst = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            worst = std::max(worst, std::abs(a[i] - b[i]) / (1.0 + std::abs(b[i])));
            worst = std::max(worst, std::abs(az[i] - bz[i]) / (1.0 + std::abs(bz[i])));
        }
        out["worst_error"] = num(worst);
        out["extrapolated"] = pde.extrapolated;
        passed = worst <= param(check.params, "rel_tol");
    } else if (check.kind == "pde_origin") {
        const ValueField* field = pde_field(ctx);
        if (!field) return not_applicable("generator depends on (y, z) or delayed values");
        const auto& p = ctx.problem;
        const std::string& g = ctx.config.equation.generator;
        double cst = 0.0;
        if (g.rfind("const:", 0) == 0) cst = parse_number(Json(g.substr(6)), "generator");
        else if (g != "zero") return not_applicable("origin value needs a zero or constant generator");
        double u, ux;
        fbsde::interpolate(*field, 0, p.forward.eta0, u, ux);
        const double expected =
            fbsde::quasi_expectation(p.terminal, 0.0, p.forward.eta0, p.forward, p.model) +
            cst * p.model.grid.horizon();
        out["u0"] = u;
        out["expected"] = expected;
        passed = std::abs(u - expected) <= param(check.params, "tol");
    }
    out["passed"] = passed;
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::io, "cannot write " + path.string());
    f << text;
    if (!f) fail(ErrorCode::io, "cannot write " + path.string());
}

std::string solution_csv(const SolutionEnsemble* sol, int limit) {
    std::ostringstream os;
    os << "path_id,t,Y,Z\n";
    if (!sol) return os.str();
    const auto times = sol->times();
    const Index rows = limit < 0 ? sol->Y.rows() : std::min<Index>(sol->Y.rows(), limit);
    for (Index p = 0; p < rows; ++p) {
        for (Index c = 0; c < sol->Y.cols(); ++c) {
            os << p << ',';
            csv::put(os, times[c]);
            os << ',';
            csv::put(os, sol->Y(p, c));
            os << ',';
            csv::put(os, sol->Z(p, c));
            os << '\n';
        }
    }
    return os.str();
}

std::string trace_csv(const IterationTrace* trace, bool seconds) {
    std::ostringstream os;
    os << "iter,distance,ratio,seconds\n";
    if (!trace) return os.str();
    for (const auto& r : trace->records) {
        os << r.iter << ',';
        csv::put(os, r.distance);
        os << ',';
        if (!std::isnan(r.ratio)) csv::put(os, r.ratio);
        os << ',';
        if (seconds) csv::put(os, r.seconds);
        os << '\n';
    }
    return os.str();
}

std::string contraction_csv(const IterationTrace* trace) {
    std::ostringstream os;
    os << "iter,ratio,bound\n";
    if (!trace) return os.str();
    for (const auto& r : trace->records) {
        if (std::isnan(r.ratio)) continue;
        os << r.iter << ',';
        csv::put(os, r.ratio);
        os << ",0.5\n";
    }
    return os.str();
}

std::string mean_csv(const SolutionEnsemble* sol, const Reference* ref, const ForwardEnsemble* eta) {
    std::ostringstream os;
    os << "t,Y_mean,Z_mean,Y_reference,eta_mean\n";
    if (!sol) return os.str();
    const auto times = sol->times();
    const int k = sol->segment();
    for (Index c = 0; c < sol->Y.cols(); ++c) {
        csv::put(os, times[c]);
        os << ',';
        csv::put(os, sol->Y.col(c).mean());
        os << ',';
        csv::put(os, sol->Z.col(c).mean());
        os << ',';
        if (ref && c >= k) csv::put(os, ref->y[static_cast<std::size_t>(c - k)]);
        os << ',';
        if (eta && c >= k) csv::put(os, eta->values.col(c - k).mean());
        os << '\n';
    }
    return os.str();
}

Json trace_json(const IterationTrace& trace) {
    Json out = Json::array();
    for (const auto& r : trace.records)
        out.push_back({{"iter", r.iter}, {"distance", num(r.distance)}, {"ratio", num(r.ratio)},
                       {"seconds", r.seconds}});
    return out;
}

Json picard_json(const PicardResult& r) {
    return {{"iterations", r.trace.size()},
            {"converged", r.converged},
            {"admissible", r.admissible},
            {"certified", r.certified},
            {"beta", num(r.beta)},
            {"M", num(r.M)},
            {"delta_max", num(r.delta_max)},
            {"horizon_max", num(r.horizon_max)},
            {"threshold", num(r.threshold)},
            {"lipschitz",
             {{"minimal_L", num(r.lipschitz.minimal_L)},
              {"degenerate_at_delay", r.lipschitz.degenerate_at_delay},
              {"passes", r.lipschitz.passes},
              {"probes", r.lipschitz.probes}}}};
}

void solve(Context& ctx, Json& report, Json& timings) {
    const auto& c = ctx.config;
    auto start = Clock::now();
    const FbmModel model = ctx.problem.model;
    ctx.paths = sampler::sample_fbm(model, c.n_paths, c.seed, c.sampler);
    if (c.task != Task::isometry) {
        ctx.eval = sampler::simulate_forward(ctx.problem.forward, *ctx.paths);
        ctx.fit = sampler::simulate_quasi_markov(ctx.problem.forward, model, c.fit_paths,
                                                 sampler::derive_seed(c.seed, 1));
    }
    timings["sample"] = seconds_since(start);

    start = Clock::now();
    const PicardConfig pc = make_picard_config(c);
    if (c.task == Task::picard) {
        ctx.picard = delay::solve_delayed_picard(ctx.problem, *ctx.eval, *ctx.fit, pc);
        Json s = picard_json(*ctx.picard);
        s["lipschitz"]["declared_L"] = ctx.problem.generator.L;
        report["solver"] = s;
    } else if (c.task == Task::comparison) {
        ctx.dominating = make_problem(c, *c.comparison);
        ctx.picard2 = delay::solve_delayed_picard(*ctx.dominating, *ctx.eval, *ctx.fit, pc);
        ComparisonConfig cc;
        cc.tol = c.tol;
        cc.max_iter = c.max_iter;
        cc.basis = pc.basis;
        ctx.comparison = delay::solve_comparison_sequence(ctx.problem, *ctx.dominating,
                                                          ctx.picard2->solution, *ctx.eval,
                                                          *ctx.fit, cc, pc);
        Json s = picard_json(*ctx.picard2);
        s["lipschitz"]["declared_L"] = ctx.dominating->generator.L;
        const auto& cr = *ctx.comparison;
        report["solver"] = {{"dominating", s},
                            {"sequence_length", cr.trace.size()},
                            {"monotone_violation", cr.monotone_violation},
                            {"tol_num", cr.tol_num},
                            {"psi_ordered", cr.psi_ordered},
                            {"cross_check_gap", num(cr.cross_check_gap)}};
    } else {
        const auto battery = diagnostics::random_piecewise_battery(
            static_cast<std::size_t>(c.isometry_count), c.isometry_seed, model.grid);
        Json cases = Json::array();
        double worst = 0.0;
        for (const auto& f : battery) {
            const auto r = diagnostics::isometry_test(f, *ctx.paths);
            cases.push_back({{"z_mean", r.z_mean}, {"z_second", r.z_second},
                             {"second_moment", r.second_moment},
                             {"expected", r.expected_second_moment}});
            worst = std::max({worst, std::abs(r.z_mean), std::abs(r.z_second)});
        }
        ctx.isometry_summary = {{"cases", cases}};
        ctx.z_scores["battery_max_abs_z"] = num(worst);
        const double T = model.grid.horizon();
        const auto one = DeterministicFn::constant(1.0);
        const auto zero = DeterministicFn::constant(0.0);
        const auto half = DeterministicFn::indicator(0.0, 0.5 * T);
        const std::vector<std::pair<std::string, std::pair<DeterministicFn, DeterministicFn>>> pairs = {
            {"one_one", {one, one}}, {"one_zero", {one, zero}}, {"half_one", {half, one}}};
        ctx.product_summary = Json::array();
        for (const auto& [name, fg] : pairs) {
            const auto r = diagnostics::product_formula_test(fg.first, fg.second, *ctx.paths);
            ctx.product_summary.push_back({{"case", name}, {"max_abs_z", r.max_abs_z},
                                           {"mean_at_T", r.mean_at_end},
                                           {"expected_at_T", r.expected_at_end}});
            ctx.z_scores["product_" + name] = r.max_abs_z;
        }
        const auto iso = diagnostics::isometry_test(one, *ctx.paths);
        ctx.z_scores["isometry_one_mean"] = iso.z_mean;
        ctx.z_scores["isometry_one_second"] = iso.z_second;
        report["isometry"] = {{"battery", ctx.isometry_summary.at("cases")},
                              {"product_formula", ctx.product_summary}};
    }
    timings["solve"] = seconds_since(start);
}

}  // namespace

namespace {

RunOutcome run_loaded(const std::function<std::string()>& load, const RunOptions& options) {
    const auto total_start = Clock::now();
    RunOutcome outcome;
    Json report = {{"config", nullptr}, {"input_hash", nullptr}, {"verdict", "error"},
                   {"error", nullptr}};
    Json timings = Json::object();
    outcome.out_dir = options.out_dir.value_or("out");

    std::optional<Context> ctx;
    auto record_error = [&](int status, const std::string& code, const std::string& message) {
        outcome.status = status;
        report["verdict"] = "error";
        report["error"] = {{"code", code}, {"message", message}};
    };

    try {
        const std::string config_text = load();
        Json doc;
        try {
            doc = Json::parse(config_text);
        } catch (const Json::parse_error& e) {
            fail(ErrorCode::invalid_argument, std::string("config is not valid JSON: ") + e.what());
        }
        if (!doc.is_object()) fail(ErrorCode::invalid_argument, "config must be a JSON object");
        if (options.seed) doc["seed"] = *options.seed;
        if (options.out_dir) doc["outputs"]["dir"] = *options.out_dir;
        if (!options.out_dir && doc.contains("outputs") && doc["outputs"].is_object() &&
            doc["outputs"].contains("dir") && doc["outputs"]["dir"].is_string())
            outcome.out_dir = doc["outputs"]["dir"].get<std::string>();

        ExperimentConfig config = parse_config(doc);
        outcome.out_dir = config.outputs.dir;
        report["config"] = to_json(config);
        report["input_hash"] = input_hash(config);
        if (!config.scenario.empty()) report["scenario"] = config.scenario;
        DelayedBsdeProblem problem = make_problem(config, config.equation);
        ctx.emplace(std::move(config), std::move(problem));

        if (options.write_files) {
            std::error_code ec;
            std::filesystem::create_directories(outcome.out_dir, ec);
            if (ec) fail(ErrorCode::io, "cannot create output directory " + outcome.out_dir + ": " + ec.message());
        }

        solve(*ctx, report, timings);

        const auto diag_start = Clock::now();
        Json diagnostics = {{"norm_y", nullptr}, {"norm_z", nullptr}, {"ratios", Json::array()},
                            {"dominance", nullptr}, {"z_scores", ctx->z_scores}};
        if (const SolutionEnsemble* sol = ctx->solution()) {
            const double beta = ctx->picard ? ctx->picard->beta : ctx->picard2->beta;
            const auto times = sol->times();
            WeightedNormParams params{beta, times.front(), times.back(), ctx->config.H};
            diagnostics["norm_y"] = num(diagnostics::weighted_norm_y(sol->Y, times, params));
            diagnostics["norm_z"] = num(diagnostics::weighted_norm_z(sol->Z, times, params));
            diagnostics["beta"] = num(beta);
            Json ratios = Json::array();
            for (double r : ctx->trace()->ratios()) ratios.push_back(num(r));
            diagnostics["ratios"] = ratios;
            report["trace"] = trace_json(*ctx->trace());
            const int k = sol->segment();
            report["summary"] = {{"Y0_mean", sol->Y.col(k).mean()}, {"Z0_mean", sol->Z.col(k).mean()},
                                 {"YT_mean", sol->Y.col(sol->Y.cols() - 1).mean()}};
        }
        if (ctx->comparison) {
            const auto& d = ctx->comparison->dominance;
            diagnostics["dominance"] = {{"fraction", d.fraction}, {"worst", d.worst}, {"verdict", d.verdict}};
        }

        Json checks = Json::array();
        bool all_passed = true;
        for (const auto& check : ctx->config.checks) {
            Json r = run_check(*ctx, check);
            all_passed = all_passed && r.at("passed").get<bool>();
            checks.push_back(std::move(r));
        }
        report["diagnostics"] = diagnostics;
        report["checks"] = checks;
        report["verdict"] = all_passed ? "pass" : "fail";
        outcome.status = all_passed ? status_ok : status_acceptance;
        timings["diagnose"] = seconds_since(diag_start);
    } catch (const DivergenceError& e) {
        record_error(status_numerical, to_string(e.code()), e.what());
        report["trace"] = trace_json(e.trace());
    } catch (const Error& e) {
        record_error(is_validation_error(e.code()) ? status_validation : status_numerical,
                     to_string(e.code()), e.what());
    } catch (const std::exception& e) {
        record_error(status_internal, "internal", e.what());
    }

    if (options.write_files) {
        try {
            const auto write_start = Clock::now();
            const std::filesystem::path dir(outcome.out_dir);
            std::error_code ec;
            std::filesystem::create_directories(dir, ec);
            if (ctx && report["error"].is_null()) {
                const SolutionEnsemble* sol = ctx->solution();
                const int limit = ctx->config.outputs.solution_paths;
                write_text(dir / "solution.csv", solution_csv(sol, limit));
                write_text(dir / "trace.csv", trace_csv(ctx->trace(), ctx->config.outputs.trace_seconds));
                write_text(dir / "contraction.csv", contraction_csv(ctx->trace()));
                write_text(dir / "Y_mean_vs_t.csv", mean_csv(sol, reference(*ctx), ctx->eval ? &*ctx->eval : nullptr));
                if (ctx->config.outputs.emit_paths && ctx->paths) {
                    std::ostringstream os;
                    PathEnsemble head = *ctx->paths;
                    if (limit >= 0 && head.values.rows() > limit)
                        head.values = Matrix(head.values.topRows(limit));
                    std::optional<ForwardEnsemble> eta;
                    if (ctx->eval) {
                        eta = *ctx->eval;
                        eta->values = Matrix(eta->values.topRows(head.values.rows()));
                    }
                    sampler::write_ensemble_csv(os, head, eta ? &*eta : nullptr);
                    write_text(dir / "paths.csv", os.str());
                }
                if (ctx->config.outputs.emit_fields) {
                    if (const ValueField* field = pde_field(*ctx)) {
                        std::ostringstream os;
                        fbsde::write_field_csv(os, *field);
                        write_text(dir / "field.csv", os.str());
                    }
                }
            }
            timings["write"] = seconds_since(write_start);
            timings["total"] = seconds_since(total_start);
            report["timings"] = timings;
            write_text(dir / "report.json", report.dump(2) + "\n");
        } catch (const Error& e) {
            if (outcome.status == status_ok || outcome.status == status_acceptance)
                record_error(status_validation, to_string(e.code()), e.what());
        } catch (const std::exception& e) {
            record_error(status_internal, "internal", e.what());
        }
    }
    timings["total"] = seconds_since(total_start);
    report["timings"] = timings;
    outcome.report = std::move(report);
    return outcome;
}

}  // namespace

RunOutcome run_experiment(const std::string& config_text, const RunOptions& options) {
    return run_loaded([&] { return config_text; }, options);
}

RunOutcome run_experiment_file(const std::string& path, const RunOptions& options) {
    return run_loaded(
        [&] {
            std::ifstream in(path, std::ios::binary);
            if (!in) fail(ErrorCode::io, "cannot read config file '" + path + "'");
            std::ostringstream os;
            os << in.rdbuf();
            if (in.bad()) fail(ErrorCode::io, "error while reading config file '" + path + "'");
            return os.str();
        },
        options);
}

}  // namespace fracbsde::experiment
