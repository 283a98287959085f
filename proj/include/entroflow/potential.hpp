#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "entroflow/grid.hpp"

namespace entroflow {

/// Scalar potential Psi on the line with an analytically coded gradient.
///
/// Immutable once built; copies share nothing mutable, so a Potential can be
/// read from any number of worker threads.
struct Potential {
    std::string label;
    std::vector<double> params;
    std::function<double(double)> value;
    std::function<double(double)> gradient;
    /// Lower bound kappa on Psi'' when known (convexity modulus).
    std::optional<double> hessian_lower_bound;

    double evaluate(double x) const { return value(x); }
    double grad(double x) const { return gradient(x); }
    bool is_zero() const { return label == "zero"; }
};

/// Families: "zero" (Psi = 0), "quadratic" (Psi = k x^2 / 2, params [] or [k]),
/// "double_well" (Psi = (x^2 - a^2)^2, params [a], a > 0) and "polynomial"
/// (Psi = sum_k c_k x^k, params [c_0, c_1, ...]).
Potential builtin_potential(std::string_view name, std::span<const double> params);

/// Invariant (Gibbs) density q = exp(-2 Psi), normalized on a truncated domain.
///
/// Node values are kept in log form so that steep potentials do not underflow
/// the score and entropy computations downstream.
class GibbsMeasure {
public:
    GibbsMeasure(Potential potential, Grid grid);

    const Potential& potential() const { return potential_; }
    const Grid& grid() const { return grid_; }

    /// False only for the zero potential, whose Gibbs measure is Lebesgue measure.
    bool finite() const { return finite_; }
    /// Z_Q; throws ConfigError when the measure is flagged infinite.
    double normalizing_constant() const;
    double log_normalizing_constant() const;

    double density_unnormalized(double x) const;
    /// q(x)/Z_Q; throws ConfigError when infinite.
    double density(double x) const;

    /// log q(x_i) - log Z_Q at the grid nodes (log of the unnormalized density when infinite).
    std::span<const double> log_density_nodes() const { return log_density_; }
    /// Normalized density at the grid nodes.
    std::span<const double> density_nodes() const { return density_; }

    /// Q([a, b]) by quadrature of the node interpolant.
    double probability(double a, double b) const;

private:
    Potential potential_;
    Grid grid_;
    bool finite_ = true;
    double log_z_ = 0.0;
    std::vector<double> log_density_;
    std::vector<double> density_;
};

/// Builds q on `resolution` equally spaced nodes over `domain`. Throws
/// NumericError if exp(-2 Psi) overflows on the grid.
GibbsMeasure gibbs_measure(const Potential& potential, Interval domain, std::size_t resolution);

struct AdmissibilityReport {
    double coercivity_margin = 0.0;  ///< min over |x| >= R of x Psi'(x) + c x^2
    bool coercivity_pass = false;
    double second_moment = 0.0;
    bool second_moment_pass = false;
    std::optional<double> relative_entropy;  ///< empty when Q is infinite
    bool entropy_pass = false;

    bool pass() const { return coercivity_pass && second_moment_pass && entropy_pass; }
};

/// Report-only check of the growth, moment and finite-entropy conditions for an
/// initial density given as node values on `grid`.
AdmissibilityReport check_admissibility(const Potential& potential, const Grid& grid,
                                        std::span<const double> initial_density, double radius,
                                        double coercivity_constant);

}  // namespace entroflow
