#include "experiment/config.hpp"

#include "core/csv.hpp"
#include "core/error.hpp"
#include "experiment/hash.hpp"
#include "experiment/scenarios.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace fracbsde::experiment {

const char* to_string(Task t) noexcept {
    switch (t) {
        case Task::picard: return "picard";
        case Task::comparison: return "comparison";
        case Task::isometry: return "isometry";
    }
    return "unknown";
}

namespace {

[[noreturn]] void invalid(const std::string& what) { fail(ErrorCode::invalid_argument, what); }

double parse_decimal(const std::string& text, const std::string& where) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || text.empty())
        invalid(where + ": '" + text + "' is not a decimal number");
    if (!std::isfinite(v)) invalid(where + ": value must be finite");
    return v;
}

// Reads the keys of one JSON object and rejects any it was not asked about.
class ObjectReader {
public:
    ObjectReader(const Json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) invalid(where_ + " must be a JSON object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key) && !obj_.at(key).is_null();
    }
    const Json& at(const std::string& key) {
        seen_.insert(key);
        return obj_.at(key);
    }
    std::string path(const std::string& key) const { return where_ + "." + key; }

    double number(const std::string& key, double fallback) {
        return has(key) ? parse_number(at(key), path(key)) : fallback;
    }
    std::optional<double> optional_number(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return parse_number(at(key), path(key));
    }
    long long integer(const std::string& key, long long fallback) {
        if (!has(key)) return fallback;
        const Json& v = at(key);
        if (v.is_number_integer()) return v.get<long long>();
        if (v.is_string()) {
            const auto s = v.get<std::string>();
            long long out = 0;
            const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
            if (res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty()) return out;
        }
        invalid(path(key) + " must be an integer");
    }
    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const Json& v = at(key);
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<long long>() >= 0) return v.get<std::uint64_t>();
        if (v.is_string()) {
            const auto s = v.get<std::string>();
            std::uint64_t out = 0;
            const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
            if (res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty()) return out;
        }
        invalid(path(key) + " must be a nonnegative integer");
    }
    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const Json& v = at(key);
        if (!v.is_string()) invalid(path(key) + " must be a string");
        return v.get<std::string>();
    }
    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const Json& v = at(key);
        if (!v.is_boolean()) invalid(path(key) + " must be true or false");
        return v.get<bool>();
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!seen_.count(it.key())) invalid("unknown key '" + path(it.key()) + "'");
        }
    }

private:
    const Json& obj_;
    std::string where_;
    std::set<std::string> seen_;
};

std::vector<double> preset_args(const std::string& preset, const std::string& name, std::size_t count) {
    const auto colon = preset.find(':');
    std::vector<double> out;
    if (colon == std::string::npos) invalid("preset '" + preset + "' needs arguments");
    std::stringstream ss(preset.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_decimal(item, "preset " + name));
    if (out.size() != count) {
        std::ostringstream os;
        os << "preset '" << preset << "' takes " << count << " argument(s)";
        invalid(os.str());
    }
    return out;
}

std::string head(const std::string& preset) { return preset.substr(0, preset.find(':')); }

Json merge(Json base, const Json& patch) {
    if (!base.is_object() || !patch.is_object()) return patch;
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
            base[it.key()] = merge(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
    return base;
}

std::string number_text(double v) { return csv::shortest(v); }

const std::set<std::string> check_kinds = {"apriori",      "closed_form", "one_pass",
                                           "contraction",  "certified",   "dominance",
                                           "isometry",     "product_formula", "pde_reduction",
                                           "pde_origin"};

// Validates a check's parameters and stores them with numbers as strings.
CheckSpec parse_check(const Json& j, std::size_t index) {
    std::ostringstream where;
    where << "checks[" << index << "]";
    ObjectReader r(j, where.str());
    CheckSpec c;
    c.kind = r.string("kind", "");
    if (!check_kinds.count(c.kind)) invalid(where.str() + ": unknown check kind '" + c.kind + "'");
    Json p = Json::object();
    auto num = [&](const std::string& key, double fallback, double lo, double hi) {
        const double v = r.number(key, fallback);
        if (!(v >= lo && v <= hi)) invalid(r.path(key) + " is out of range");
        p[key] = number_text(v);
    };
    auto integer = [&](const std::string& key, long long fallback, long long lo) {
        const long long v = r.integer(key, fallback);
        if (v < lo) invalid(r.path(key) + " is out of range");
        p[key] = v;
    };
    if (c.kind == "apriori") {
        num("beta", 1.0, 1e-12, 1e6);
        num("M", 2.5, 2.0 + 1e-12, 1e6);
        num("stat_tol", 0.05, 0.0, 10.0);
    } else if (c.kind == "closed_form") {
        num("rel_tol", 1e-2, 0.0, 10.0);
        if (r.has("times")) {
            const Json& ts = r.at("times");
            if (!ts.is_array() || ts.empty()) invalid(r.path("times") + " must be a nonempty array");
            Json out = Json::array();
            for (const auto& t : ts) out.push_back(number_text(parse_number(t, r.path("times"))));
            p["times"] = out;
        }
        p["check_z"] = r.boolean("check_z", true);
        const std::string denom = r.string("denominator", "one_plus_abs");
        if (denom != "one_plus_abs" && denom != "abs")
            invalid(r.path("denominator") + " must be one_plus_abs or abs");
        p["denominator"] = denom;
    } else if (c.kind == "contraction") {
        num("max_ratio", 0.55, 0.0, 1e6);
        integer("min_iterations", 5, 1);
    } else if (c.kind == "dominance") {
        integer("monotone_iterations", 5, 1);
    } else if (c.kind == "isometry") {
        num("min_pass_share", 0.99, 0.0, 1.0);
        num("max_z", 3.0, 0.0, 1e6);
    } else if (c.kind == "product_formula") {
        num("max_z", 3.0, 0.0, 1e6);
    } else if (c.kind == "pde_reduction") {
        num("rel_tol", 1e-2, 0.0, 10.0);
    } else if (c.kind == "pde_origin") {
        num("tol", 1e-3, 0.0, 10.0);
    }
    r.finish();
    c.params = p;
    return c;
}

EquationSpec parse_equation(ObjectReader& r, const EquationSpec& fallback) {
    EquationSpec e = fallback;
    if (r.has("generator")) {
        ObjectReader g(r.at("generator"), r.path("generator"));
        e.generator = g.string("preset", fallback.generator);
        e.L = g.optional_number("L");
        if (g.has("table")) e.table = g.at("table");
        else e.table = Json();
        g.finish();
    }
    e.terminal = r.string("terminal", e.terminal);
    e.phi0 = r.string("phi0", e.phi0);
    e.psi0 = r.string("psi0", e.psi0);
    return e;
}

Json equation_json(const EquationSpec& e) {
    Json g = {{"preset", e.generator}};
    if (e.L) g["L"] = number_text(*e.L);
    if (!e.table.is_null()) g["table"] = e.table;
    return {{"generator", g}, {"terminal", e.terminal}, {"phi0", e.phi0}, {"psi0", e.psi0}};
}

// Multilinear interpolation in a table over a subset of (t, x, y, z, y_delay, z_delay).
GeneratorSpec table_generator(const Json& table, std::optional<double> L) {
    static const std::vector<std::string> names = {"t", "x", "y", "z", "y_delay", "z_delay"};
    if (!table.is_object()) invalid("generator.table must be an object for custom-table");
    ObjectReader r(table, "generator.table");
    const Json& axes = r.at("axes");
    const Json& nodes = r.has("nodes") ? r.at("nodes") : Json();
    const Json& values = r.has("values") ? r.at("values") : Json();
    r.finish();
    if (!axes.is_array() || axes.empty() || axes.size() > 6)
        invalid("generator.table.axes must list 1 to 6 arguments");
    if (!nodes.is_array() || nodes.size() != axes.size())
        invalid("generator.table.nodes needs one node list per axis");
    std::vector<int> arg;
    std::vector<std::vector<double>> grid;
    std::size_t total = 1;
    for (std::size_t a = 0; a < axes.size(); ++a) {
        if (!axes[a].is_string()) invalid("generator.table.axes entries must be strings");
        const auto it = std::find(names.begin(), names.end(), axes[a].get<std::string>());
        if (it == names.end()) invalid("generator.table: unknown axis '" + axes[a].get<std::string>() + "'");
        arg.push_back(static_cast<int>(it - names.begin()));
        std::vector<double> g;
        if (!nodes[a].is_array() || nodes[a].size() < 2)
            invalid("generator.table.nodes: every axis needs at least 2 nodes");
        for (const auto& v : nodes[a]) g.push_back(parse_number(v, "generator.table.nodes"));
        for (std::size_t m = 1; m < g.size(); ++m)
            if (!(g[m] > g[m - 1])) invalid("generator.table.nodes must be strictly increasing");
        total *= g.size();
        grid.push_back(std::move(g));
    }
    if (!values.is_array() || values.size() != total)
        invalid("generator.table.values must hold the product of the node counts");
    std::vector<double> vals;
    for (const auto& v : values) vals.push_back(parse_number(v, "generator.table.values"));
    if (!L) invalid("custom-table generators need an explicit L");

    GeneratorSpec g;
    g.f = [arg, grid, vals](double t, double x, double y, double z, double yd, double zd) {
        const double in[6] = {t, x, y, z, yd, zd};
        const std::size_t d = arg.size();
        std::vector<std::size_t> lo(d);
        std::vector<double> w(d);
        for (std::size_t a = 0; a < d; ++a) {
            const auto& g = grid[a];
            const double v = std::clamp(in[arg[a]], g.front(), g.back());
            std::size_t j = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), v) - g.begin());
            j = std::clamp<std::size_t>(j, 1, g.size() - 1) - 1;
            lo[a] = j;
            w[a] = (v - g[j]) / (g[j + 1] - g[j]);
        }
        double acc = 0.0;
        for (std::size_t corner = 0; corner < (std::size_t{1} << d); ++corner) {
            double weight = 1.0;
            std::size_t flat = 0;
            for (std::size_t a = 0; a < d; ++a) {
                const bool up = (corner >> a) & 1U;
                weight *= up ? w[a] : 1.0 - w[a];
                flat = flat * grid[a].size() + lo[a] + (up ? 1 : 0);
            }
            if (weight != 0.0) acc += weight * vals[flat];
        }
        return acc;
    };
    for (int a : arg) {
        if (a == 2) g.uses_y = true;
        if (a == 3) g.uses_z = true;
        if (a == 4) g.uses_y_delay = true;
        if (a == 5) g.uses_z_delay = true;
    }
    g.L = *L;
    g.label = "custom-table";
    return g;
}

}  // namespace

double parse_number(const Json& value, const std::string& where) {
    if (value.is_number()) {
        const double v = value.get<double>();
        if (!std::isfinite(v)) invalid(where + ": value must be finite");
        return v;
    }
    if (value.is_string()) return parse_decimal(value.get<std::string>(), where);
    invalid(where + " must be a number or a decimal string");
}

DeterministicFn make_function(const std::string& preset, FnRole role) {
    const std::string name = head(preset);
    if (name == "const") return DeterministicFn::constant(preset_args(preset, name, 1)[0], role);
    if (name == "affine") {
        const auto a = preset_args(preset, name, 2);
        return DeterministicFn::affine(a[0], a[1], role);
    }
    invalid("unknown function preset '" + preset + "' (expected const:c or affine:a,c)");
}

TerminalMap make_terminal(const std::string& preset) {
    const std::string name = head(preset);
    if (preset == "id") return TerminalMap::identity();
    if (preset == "square") return TerminalMap::square();
    if (preset == "cos") return TerminalMap::cosine();
    if (preset == "zero") return TerminalMap::zero();
    if (name == "call") return TerminalMap::call(preset_args(preset, name, 1)[0]);
    if (name == "affine") {
        const auto a = preset_args(preset, name, 2);
        return TerminalMap::affine(a[0], a[1]);
    }
    invalid("unknown terminal preset '" + preset + "'");
}

GeneratorSpec make_generator(const EquationSpec& spec, double H, double T) {
    const std::string& p = spec.generator;
    const std::string name = head(p);
    GeneratorSpec g;
    if (p == "zero") g = GeneratorSpec::zero();
    else if (name == "const") g = GeneratorSpec::constant(preset_args(p, name, 1)[0]);
    else if (name == "linear_y") g = GeneratorSpec::linear_y(preset_args(p, name, 1)[0]);
    else if (name == "linear_delay") g = GeneratorSpec::linear_delay(preset_args(p, name, 1)[0]);
    else if (p == "example43_minus") g = GeneratorSpec::example43(H, T, -1.0);
    else if (p == "example43_plus") g = GeneratorSpec::example43(H, T, 1.0);
    else if (p == "custom-table") return table_generator(spec.table, spec.L);
    else invalid("unknown generator preset '" + p + "'");
    if (spec.L) {
        if (!(*spec.L >= 0.0)) fail(ErrorCode::constant_violation, "generator L must be nonnegative");
        g.L = *spec.L;
    }
    return g;
}

FbmModel make_model(const ExperimentConfig& c) {
    return FbmModel{HurstParam(c.H), TimeGrid(c.T, c.N, c.delta_steps)};
}

ForwardCoefficients make_forward(const ExperimentConfig& c) {
    ForwardCoefficients f;
    f.eta0 = c.eta0;
    f.b = make_function(c.b, FnRole::drift);
    f.sigma = make_function(c.sigma, FnRole::volatility);
    return f;
}

DelayedBsdeProblem make_problem(const ExperimentConfig& c, const EquationSpec& e) {
    DelayedBsdeProblem p{make_model(c), make_forward(c)};
    p.terminal = make_terminal(e.terminal);
    p.generator = make_generator(e, c.H, c.T);
    p.phi0 = make_function(e.phi0, FnRole::initial_y);
    p.psi0 = make_function(e.psi0, FnRole::initial_z);
    return p;
}

PicardConfig make_picard_config(const ExperimentConfig& c) {
    PicardConfig p;
    p.tol = c.tol;
    p.max_iter = c.max_iter;
    p.basis.degree = c.basis_degree;
    p.basis.ridge = c.ridge;
    p.mode = c.mode;
    p.beta = c.beta;
    p.M = c.M;
    return p;
}

ExperimentConfig parse_config(const Json& input) {
    if (!input.is_object()) invalid("config must be a JSON object");
    Json doc = input;
    ExperimentConfig c;
    if (doc.contains("scenario")) {
        if (!doc["scenario"].is_string()) invalid("config.scenario must be a string");
        c.scenario = doc["scenario"].get<std::string>();
        const Scenario* s = find_scenario(c.scenario);
        if (!s) invalid("unknown scenario '" + c.scenario + "'");
        Json base = Json::parse(s->config);
        doc = merge(base, doc);
    }

    ObjectReader r(doc, "config");
    r.has("scenario");
    const std::string task = r.string("task", "picard");
    if (task == "picard") c.task = Task::picard;
    else if (task == "comparison") c.task = Task::comparison;
    else if (task == "isometry") c.task = Task::isometry;
    else invalid("config.task must be picard, comparison or isometry");

    std::string delta_rule;
    if (r.has("model")) {
        ObjectReader m(r.at("model"), "config.model");
        c.H = m.number("H", c.H);
        c.T = m.number("T", c.T);
        c.N = static_cast<int>(m.integer("N", c.N));
        if (m.has("delta_steps")) {
            const Json& d = m.at("delta_steps");
            if (d.is_string() && d.get<std::string>() == "half_admissible") delta_rule = "half_admissible";
            else c.delta_steps = static_cast<int>(m.integer("delta_steps", 0));
        }
        m.finish();
    }
    (void)HurstParam(c.H);
    if (!(c.T > 0.0)) fail(ErrorCode::domain, "config.model.T must be positive");
    if (c.N < 2 || c.N > 4096) fail(ErrorCode::domain, "config.model.N must lie in [2, 4096]");

    if (r.has("forward")) {
        ObjectReader f(r.at("forward"), "config.forward");
        c.eta0 = f.number("eta0", c.eta0);
        c.b = f.string("b", c.b);
        c.sigma = f.string("sigma", c.sigma);
        f.finish();
    }
    c.equation = parse_equation(r, c.equation);
    if (r.has("comparison")) {
        ObjectReader q(r.at("comparison"), "config.comparison");
        c.comparison = parse_equation(q, c.equation);
        q.finish();
    }

    c.n_paths = r.integer("n_paths", c.n_paths);
    c.fit_paths = r.integer("fit_paths", c.n_paths);
    if (c.n_paths < 2 || c.n_paths > 10000000) invalid("config.n_paths must lie in [2, 1e7]");
    if (c.fit_paths < 16 || c.fit_paths > 10000000) invalid("config.fit_paths must lie in [16, 1e7]");
    c.seed = r.unsigned_integer("seed", c.seed);
    c.sampler = parse_sampling_method(r.string("sampler", to_string(c.sampler)));

    if (r.has("solver")) {
        ObjectReader s(r.at("solver"), "config.solver");
        c.tol = s.number("tol", c.tol);
        c.max_iter = static_cast<int>(s.integer("max_iter", c.max_iter));
        c.basis_degree = static_cast<int>(s.integer("basis_degree", c.basis_degree));
        c.ridge = s.number("ridge", c.ridge);
        c.mode = parse_admissibility_mode(s.string("mode", to_string(c.mode)));
        c.beta = s.optional_number("beta");
        c.M = s.optional_number("M");
        s.finish();
    }
    if (r.has("isometry")) {
        ObjectReader s(r.at("isometry"), "config.isometry");
        c.isometry_count = static_cast<int>(s.integer("count", c.isometry_count));
        c.isometry_seed = s.unsigned_integer("seed", c.isometry_seed);
        s.finish();
        if (c.isometry_count < 1 || c.isometry_count > 100000)
            invalid("config.isometry.count must lie in [1, 1e5]");
    }
    if (r.has("checks")) {
        const Json& checks = r.at("checks");
        if (!checks.is_array()) invalid("config.checks must be an array");
        for (std::size_t i = 0; i < checks.size(); ++i) c.checks.push_back(parse_check(checks[i], i));
    }
    if (r.has("outputs")) {
        ObjectReader o(r.at("outputs"), "config.outputs");
        c.outputs.dir = o.string("dir", c.outputs.dir);
        c.outputs.emit_paths = o.boolean("emit_paths", c.outputs.emit_paths);
        c.outputs.emit_fields = o.boolean("emit_fields", c.outputs.emit_fields);
        c.outputs.solution_paths = static_cast<int>(o.integer("solution_paths", c.outputs.solution_paths));
        c.outputs.trace_seconds = o.boolean("trace_seconds", c.outputs.trace_seconds);
        o.finish();
        if (c.outputs.solution_paths < -1) invalid("config.outputs.solution_paths must be >= -1");
        if (c.outputs.dir.empty()) invalid("config.outputs.dir must not be empty");
    }
    r.finish();

    // Range checks against the solver preconditions.
    PicardConfig pc = make_picard_config(c);
    pc.validate();
    if (c.task == Task::comparison && !c.comparison)
        invalid("comparison task needs a config.comparison equation");

    const DelayedBsdeProblem probe = make_problem(c, c.equation);
    kernel::validate_volatility(probe.forward.sigma, probe.model.grid);
    if (c.comparison) (void)make_problem(c, *c.comparison);
    if (delta_rule == "half_admissible") {
        const double M = c.M ? *c.M : kernel::ratio_bound(probe.forward.sigma, probe.model.hurst,
                                                          probe.model.grid);
        const auto mode = c.mode == AdmissibilityMode::horizon ? AdmissibilityMode::existence : c.mode;
        const Admissibility adm = delay::admissible_delay(probe.generator.L, M, mode);
        const double dt = c.T / c.N;
        c.delta_steps = std::clamp(static_cast<int>(std::floor(0.5 * adm.delta_max / dt)), 1, c.N);
    }
    if (c.delta_steps < 0 || c.delta_steps > c.N)
        fail(ErrorCode::domain, "config.model.delta_steps must lie in [0, N]");
    return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        fail(ErrorCode::invalid_argument, std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

Json to_json(const ExperimentConfig& c) {
    Json j;
    if (!c.scenario.empty()) j["scenario"] = c.scenario;
    j["task"] = to_string(c.task);
    j["model"] = {{"H", number_text(c.H)},
                  {"T", number_text(c.T)},
                  {"N", c.N},
                  {"delta_steps", c.delta_steps}};
    j["forward"] = {{"eta0", number_text(c.eta0)}, {"b", c.b}, {"sigma", c.sigma}};
    const Json eq = equation_json(c.equation);
    for (auto it = eq.begin(); it != eq.end(); ++it) j[it.key()] = it.value();
    if (c.comparison) j["comparison"] = equation_json(*c.comparison);
    j["n_paths"] = c.n_paths;
    j["fit_paths"] = c.fit_paths;
    j["seed"] = c.seed;
    j["sampler"] = to_string(c.sampler);
    Json solver = {{"tol", number_text(c.tol)},
                   {"max_iter", c.max_iter},
                   {"basis_degree", c.basis_degree},
                   {"ridge", number_text(c.ridge)},
                   {"mode", to_string(c.mode)}};
    if (c.beta) solver["beta"] = number_text(*c.beta);
    if (c.M) solver["M"] = number_text(*c.M);
    j["solver"] = solver;
    j["isometry"] = {{"count", c.isometry_count}, {"seed", c.isometry_seed}};
    Json checks = Json::array();
    for (const auto& ch : c.checks) {
        Json o = ch.params;
        o["kind"] = ch.kind;
        checks.push_back(o);
    }
    j["checks"] = checks;
    j["outputs"] = {{"dir", c.outputs.dir},
                    {"emit_paths", c.outputs.emit_paths},
                    {"emit_fields", c.outputs.emit_fields},
                    {"solution_paths", c.outputs.solution_paths},
                    {"trace_seconds", c.outputs.trace_seconds}};
    return j;
}

std::string input_hash(const ExperimentConfig& config) {
    Json j = to_json(config);
    j.erase("outputs");
    return git_blob_sha1(j.dump());
}

}  // namespace fracbsde::experiment
