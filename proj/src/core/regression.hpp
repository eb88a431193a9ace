#pragma once

// Least-squares conditional expectations on the two-point state
// (eta_t, eta_{(t-delta) v 0}).

#include "core/types.hpp"

#include <vector>

namespace fracbsde {

struct RegressionBasis {
    int degree = 2;
    double ridge = 1e-8;
    double max_condition = 1e12;

    void validate() const;
};

/// Polynomial of total degree <= d in standardized coordinates. With a second
/// state the coordinates are u = x2 and w = x1 - x2 (standardized), which keeps
/// the design well conditioned when the two states are strongly correlated.
/// Coordinates that are constant across the sample are dropped.
class RegressionFit {
public:
    RegressionFit() = default;

    double value(double x1, double x2) const;
    /// Partial derivatives in the original coordinates.
    void gradient(double x1, double x2, double& d1, double& d2) const;

    /// Number of active (non-degenerate) coordinates, 0 to 2.
    int active_coordinates() const noexcept { return static_cast<int>(coords_.size()); }
    const std::vector<double>& coefficients() const noexcept { return coef_; }

    /// Fits target ~ poly(x1, x2). `x2` may be empty for a single state.
    static RegressionFit fit(const Vector& x1, const Vector& x2, const Vector& target,
                             const RegressionBasis& basis);

private:
    struct Coordinate {
        double a1, a2, mean, scale;  // c = (a1 x1 + a2 x2 - mean) / scale
    };

    void coordinates(double x1, double x2, double* c) const;

    int degree_ = 0;
    std::vector<Coordinate> coords_;
    std::vector<std::pair<int, int>> powers_;  // exponents of (c0, c1)
    std::vector<double> coef_;
};

}  // namespace fracbsde
