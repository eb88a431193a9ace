#include "experiment/scenarios.hpp"

#include <array>

namespace fracbsde::experiment {

namespace {

const std::array<Scenario, 8> library = {{
    {"zero_generator", "f = 0, h(x) = x: Y_t = eta_t, Z = sigma; checked against the PDE solver",
     R"({
  "task": "picard",
  "model": {"H": "0.75", "T": "1", "N": 128, "delta_steps": 0},
  "forward": {"eta0": "0.5", "b": "const:0", "sigma": "const:1"},
  "generator": {"preset": "zero"},
  "terminal": "id",
  "checks": [
    {"kind": "closed_form", "rel_tol": "0.01"},
    {"kind": "pde_reduction", "rel_tol": "0.01"},
    {"kind": "apriori", "beta": "1", "M": "2.5"},
    {"kind": "apriori", "beta": "2", "M": "2.5"}
  ]
})"},
    {"quadratic_terminal", "f = 0, h(x) = x^2: u(t,x) = x^2 + T^2H - t^2H, PDE value at the origin",
     R"({
  "task": "picard",
  "model": {"H": "0.75", "T": "1", "N": 128, "delta_steps": 0},
  "forward": {"eta0": "0", "b": "const:0", "sigma": "const:1"},
  "generator": {"preset": "zero"},
  "terminal": "square",
  "checks": [
    {"kind": "closed_form", "rel_tol": "0.01"},
    {"kind": "pde_origin", "tol": "0.001"},
    {"kind": "pde_reduction", "rel_tol": "0.01"},
    {"kind": "apriori", "beta": "1", "M": "2.5"},
    {"kind": "apriori", "beta": "2", "M": "2.5"}
  ]
})"},
    {"linear_y", "f = y, h(x) = x, eta0 = 1: Y_t = e^(T-t) eta_t",
     R"({
  "task": "picard",
  "model": {"H": "0.75", "T": "1", "N": 128, "delta_steps": 0},
  "forward": {"eta0": "1", "b": "const:0", "sigma": "const:1"},
  "generator": {"preset": "linear_y:1"},
  "terminal": "id",
  "checks": [
    {"kind": "closed_form", "rel_tol": "0.02", "times": ["0", "0.5"], "denominator": "abs"},
    {"kind": "apriori", "beta": "1", "M": "2.5"},
    {"kind": "apriori", "beta": "2", "M": "2.5"}
  ]
})"},
    {"delay_ge_T", "delta = T, f = y(t-delta), phi0 = 1: one Picard pass, Y_t = eta_t + T - t",
     R"({
  "task": "picard",
  "model": {"H": "0.75", "T": "0.5", "N": 128, "delta_steps": 128},
  "forward": {"eta0": "0", "b": "const:0", "sigma": "const:1"},
  "generator": {"preset": "linear_delay:1"},
  "terminal": "id",
  "phi0": "const:1",
  "psi0": "const:0",
  "checks": [
    {"kind": "one_pass"},
    {"kind": "closed_form", "rel_tol": "0.01"},
    {"kind": "apriori", "beta": "1", "M": "2.5"},
    {"kind": "apriori", "beta": "2", "M": "2.5"}
  ]
})"},
    {"certified_contraction",
     "f = 0.5 y(t-delta), L = 0.5, M = 2.5, delta = half the admissible delay: ratios <= 1/2",
     R"({
  "task": "picard",
  "model": {"H": "0.75", "T": "1", "N": 128, "delta_steps": "half_admissible"},
  "forward": {"eta0": "1", "b": "const:0", "sigma": "const:1"},
  "generator": {"preset": "linear_delay:0.5", "L": "0.5"},
  "terminal": "id",
  "solver": {"M": "2.5", "mode": "existence"},
  "checks": [
    {"kind": "contraction", "max_ratio": "0.55", "min_iterations": 5},
    {"kind": "certified"},
    {"kind": "apriori", "beta": "1", "M": "2.5"},
    {"kind": "apriori", "beta": "2", "M": "2.5"}
  ]
})"},
    {"example43",
     "comparison pair f1 = y + t^(2H-1) z + y(t-delta) - 1 <= f2 = f1 + 2, phi1 = 0 <= phi2 = 0.5",
     R"({
  "task": "comparison",
  "model": {"H": "0.75", "T": "0.5", "N": 128, "delta_steps": 1},
  "forward": {"eta0": "0", "b": "const:0", "sigma": "const:1"},
  "generator": {"preset": "example43_minus"},
  "terminal": "id",
  "phi0": "const:0",
  "psi0": "const:0",
  "comparison": {
    "generator": {"preset": "example43_plus"},
    "terminal": "id",
    "phi0": "const:0.5",
    "psi0": "const:0"
  },
  "solver": {"M": "2.5", "mode": "comparison"},
  "checks": [
    {"kind": "dominance", "monotone_iterations": 5},
    {"kind": "apriori", "beta": "1", "M": "2.5"},
    {"kind": "apriori", "beta": "2", "M": "2.5"}
  ]
})"},
    {"h_degeneration_051", "H = 0.51, f = y, h(x) = x: close to the classical Y_t = e^(T-t) eta_t",
     R"({
  "task": "picard",
  "model": {"H": "0.51", "T": "1", "N": 128, "delta_steps": 0},
  "forward": {"eta0": "1", "b": "const:0", "sigma": "const:1"},
  "generator": {"preset": "linear_y:1"},
  "terminal": "id",
  "checks": [
    {"kind": "closed_form", "rel_tol": "0.02", "times": ["0", "0.5"], "denominator": "abs"},
    {"kind": "apriori", "beta": "1", "M": "2.5"},
    {"kind": "apriori", "beta": "2", "M": "2.5"}
  ]
})"},
    {"isometry_battery",
     "100 seeded piecewise-constant f: mean and second moment of int f dB^H, and the product rule",
     R"({
  "task": "isometry",
  "model": {"H": "0.75", "T": "1", "N": 128, "delta_steps": 0},
  "n_paths": 10000,
  "isometry": {"count": 100, "seed": 5},
  "checks": [
    {"kind": "isometry", "min_pass_share": "0.99", "max_z": "3"},
    {"kind": "product_formula", "max_z": "3"}
  ]
})"},
}};

}  // namespace

std::span<const Scenario> scenarios() { return library; }

const Scenario* find_scenario(const std::string& name) {
    for (const auto& s : library)
        if (name == s.name) return &s;
    return nullptr;
}

}  // namespace fracbsde::experiment
