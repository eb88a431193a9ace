#include "core/error.hpp"
#include "experiment/config.hpp"
#include "experiment/hash.hpp"
#include "experiment/runner.hpp"
#include "experiment/scenarios.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fracbsde;
using namespace fracbsde::experiment;

namespace {

ErrorCode code_of(const std::function<void()>& body) {
    try {
        body();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::io;
}

// Small inline problem: f = 0, h = id.
Json small_config() {
    return Json::parse(R"({
        "model": {"H": "0.7", "T": "1", "N": 16},
        "forward": {"eta0": "0.25"},
        "n_paths": 400,
        "seed": 3,
        "checks": [{"kind": "closed_form"}]
    })");
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST(Hash, GitBlobDigests) {
    EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Config, LibraryHasTheRequiredScenarios) {
    for (const char* name : {"zero_generator", "quadratic_terminal", "linear_y", "delay_ge_T",
                             "certified_contraction", "example43", "h_degeneration_051",
                             "isometry_battery"}) {
        ASSERT_NE(find_scenario(name), nullptr) << name;
        EXPECT_NO_THROW(parse_config(Json{{"scenario", name}})) << name;
    }
    EXPECT_GE(scenarios().size(), 8u);
    EXPECT_EQ(find_scenario("nope"), nullptr);
}

TEST(Config, DefaultsAndDecimalStrings) {
    const auto c = parse_config(small_config());
    EXPECT_DOUBLE_EQ(c.H, 0.7);
    EXPECT_EQ(c.N, 16);
    EXPECT_EQ(c.fit_paths, 400);
    EXPECT_EQ(c.task, Task::picard);
    Json numbers = small_config();
    numbers["model"]["H"] = 0.7;
    EXPECT_EQ(input_hash(parse_config(numbers)), input_hash(c));
    EXPECT_DOUBLE_EQ(parse_number(Json("1e-3"), "x"), 1e-3);
    EXPECT_THROW(parse_number(Json("0.1abc"), "x"), Error);
    EXPECT_THROW(parse_number(Json(true), "x"), Error);
}

TEST(Config, RejectsUnknownKeysAndBadRanges) {
    Json j = small_config();
    j["model"]["h"] = "0.7";
    EXPECT_EQ(code_of([&] { parse_config(j); }), ErrorCode::invalid_argument);
    j = small_config();
    j["model"]["H"] = "0.5";
    EXPECT_EQ(code_of([&] { parse_config(j); }), ErrorCode::domain);
    j = small_config();
    j["model"]["delta_steps"] = 17;
    EXPECT_EQ(code_of([&] { parse_config(j); }), ErrorCode::domain);
    j = small_config();
    j["n_paths"] = 1;
    EXPECT_THROW(parse_config(j), Error);
    j = small_config();
    j["generator"] = {{"preset", "cubic"}};
    EXPECT_THROW(parse_config(j), Error);
    j = small_config();
    j["checks"] = Json::array({{{"kind", "apriori"}, {"M", "2"}}});
    EXPECT_THROW(parse_config(j), Error);
    j = small_config();
    j["forward"]["sigma"] = "const:0";
    EXPECT_EQ(code_of([&] { parse_config(j); }), ErrorCode::invalid_coefficient);
    j = small_config();
    j["solver"] = {{"M", "2"}};
    EXPECT_EQ(code_of([&] { parse_config(j); }), ErrorCode::constant_violation);
    EXPECT_EQ(code_of([] { parse_config_text("{"); }), ErrorCode::invalid_argument);
}

TEST(Config, RoundTripAndHashScope) {
    const auto c = parse_config(Json{{"scenario", "example43"}});
    const Json echo = to_json(c);
    const auto again = parse_config(echo);
    EXPECT_EQ(to_json(again), echo);
    EXPECT_EQ(input_hash(again), input_hash(c));

    Json moved = echo;
    moved["outputs"]["dir"] = "elsewhere";
    EXPECT_EQ(input_hash(parse_config(moved)), input_hash(c));
    Json reseeded = echo;
    reseeded["seed"] = 2;
    EXPECT_NE(input_hash(parse_config(reseeded)), input_hash(c));
}

TEST(Config, ScenarioOverridesMerge) {
    const auto c = parse_config(Json::parse(R"({"scenario": "linear_y", "model": {"N": 32}, "seed": 9})"));
    EXPECT_EQ(c.N, 32);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_DOUBLE_EQ(c.eta0, 1.0);  // kept from the scenario
    EXPECT_EQ(c.scenario, "linear_y");
}

TEST(Config, HalfAdmissibleDelay) {
    const auto c = parse_config(Json{{"scenario", "certified_contraction"}});
    const auto adm = delay::admissible_delay(0.5, 2.5, AdmissibilityMode::existence);
    EXPECT_EQ(c.delta_steps, static_cast<int>(std::floor(0.5 * adm.delta_max / (c.T / c.N))));
}

TEST(Config, CustomTableInterpolatesMultilinearly) {
    EquationSpec e;
    e.generator = "custom-table";
    e.L = 4.0;
    e.table = Json::parse(R"({"axes": ["t", "y"], "nodes": [[0, 1], [0, 2]], "values": [0, 2, 1, 5]})");
    const auto g = make_generator(e, 0.75, 1.0);
    EXPECT_TRUE(g.uses_y);
    EXPECT_FALSE(g.uses_z);
    // f(t, y) = 2*(y/2)(1-t) + t*(1 + 2 y) on the unit cell, clamped outside.
    EXPECT_NEAR(g(0.5, 0, 1.0, 0, 0, 0), 0.5 * 1.0 + 0.5 * 3.0, 1e-14);
    EXPECT_NEAR(g(0.0, 0, 9.0, 0, 0, 0), 2.0, 1e-14);
    e.L.reset();
    EXPECT_THROW(make_generator(e, 0.75, 1.0), Error);
    e.L = 1.0;
    e.table["values"] = Json::array({0, 1});
    EXPECT_THROW(make_generator(e, 0.75, 1.0), Error);
}

TEST(Runner, SmallRunPassesAndKeepsFilesInMemory) {
    RunOptions o;
    o.write_files = false;
    const auto r = run_experiment(small_config().dump(), o);
    EXPECT_EQ(r.status, status_ok) << r.report.dump();
    EXPECT_EQ(r.report["verdict"], "pass");
    EXPECT_TRUE(r.report["error"].is_null());
    EXPECT_NEAR(r.report["summary"]["Y0_mean"].get<double>(), 0.25, 1e-6);
    ASSERT_EQ(r.report["checks"].size(), 1u);
    EXPECT_EQ(r.report["input_hash"].get<std::string>().size(), 40u);
}

TEST(Runner, StatusCodes) {
    RunOptions o;
    o.write_files = false;
    EXPECT_EQ(run_experiment("not json", o).status, status_validation);
    const auto bad = run_experiment(R"({"model": {"H": "1.5"}})", o);
    EXPECT_EQ(bad.status, status_validation);
    EXPECT_EQ(bad.report["error"]["code"], "domain");

    Json strict = small_config();
    strict["generator"] = {{"preset", "linear_y:1"}};
    strict["checks"] = Json::parse(R"([{"kind": "closed_form", "rel_tol": "1e-9"}])");
    EXPECT_EQ(run_experiment(strict.dump(), o).status, status_acceptance);

    Json diverging = small_config();
    diverging["model"]["delta_steps"] = 1;
    diverging["generator"] = {{"preset", "linear_delay:40"}};
    diverging["phi0"] = "const:1";
    diverging["solver"] = {{"max_iter", 4}};
    const auto d = run_experiment(diverging.dump(), o);
    EXPECT_EQ(d.status, status_numerical);
    EXPECT_EQ(d.report["error"]["code"], "divergence");
    EXPECT_EQ(d.report["trace"].size(), 4u);
}

TEST(Runner, MissingFileIsAnIoError) {
    RunOptions o;
    o.write_files = false;
    const auto r = run_experiment_file("/nonexistent/config.json", o);
    EXPECT_EQ(r.status, status_validation);
    EXPECT_EQ(r.report["error"]["code"], "io");
}

TEST(Runner, WritesArtifactsDeterministically) {
    const auto base = std::filesystem::temp_directory_path() / "fracbsde_runner_test";
    std::filesystem::remove_all(base);
    Json cfg = small_config();
    cfg["outputs"] = {{"emit_paths", true}, {"emit_fields", true}, {"solution_paths", 3}};
    RunOptions a, b;
    a.out_dir = (base / "a").string();
    b.out_dir = (base / "b").string();
    ASSERT_EQ(run_experiment(cfg.dump(), a).status, status_ok);
    ASSERT_EQ(run_experiment(cfg.dump(), b).status, status_ok);
    for (const char* f : {"solution.csv", "trace.csv", "Y_mean_vs_t.csv", "contraction.csv", "paths.csv",
                          "field.csv", "report.json"})
        EXPECT_TRUE(std::filesystem::exists(base / "a" / f)) << f;
    EXPECT_EQ(slurp(base / "a" / "solution.csv"), slurp(base / "b" / "solution.csv"));
    EXPECT_EQ(slurp(base / "a" / "trace.csv"), slurp(base / "b" / "trace.csv"));
    const std::string sol = slurp(base / "a" / "solution.csv");
    EXPECT_EQ(sol.substr(0, sol.find('\n')), "path_id,t,Y,Z");
    EXPECT_EQ(std::count(sol.begin(), sol.end(), '\n'), 1 + 3 * 17);

    // The config echo reproduces the run.
    const Json report = Json::parse(slurp(base / "a" / "report.json"));
    RunOptions c;
    c.out_dir = (base / "c").string();
    ASSERT_EQ(run_experiment(report["config"].dump(), c).status, status_ok);
    EXPECT_EQ(slurp(base / "a" / "solution.csv"), slurp(base / "c" / "solution.csv"));
    std::filesystem::remove_all(base);
}

TEST(Runner, UnwritableOutputDirectory) {
    RunOptions o;
    o.out_dir = "/proc/fracbsde_cannot_write_here";
    const auto r = run_experiment(small_config().dump(), o);
    EXPECT_EQ(r.status, status_validation);
    EXPECT_EQ(r.report["error"]["code"], "io");
}
