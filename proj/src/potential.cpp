#include "entroflow/potential.hpp"

#include <cmath>
#include <limits>

#include "entroflow/entropy.hpp"
#include "entroflow/error.hpp"

namespace entroflow {

namespace {

Potential make_zero() {
    Potential p;
    p.label = "zero";
    p.value = [](double) { return 0.0; };
    p.gradient = [](double) { return 0.0; };
    p.hessian_lower_bound = 0.0;
    return p;
}

Potential make_quadratic(std::span<const double> params) {
    if (params.size() > 1) throw ConfigError("quadratic takes at most one parameter (stiffness k)");
    const double k = params.empty() ? 1.0 : params[0];
    if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("quadratic stiffness must be positive");
    Potential p;
    p.label = "quadratic";
    p.params.assign(params.begin(), params.end());
    p.value = [k](double x) { return 0.5 * k * x * x; };
    p.gradient = [k](double x) { return k * x; };
    p.hessian_lower_bound = k;
    return p;
}

Potential make_double_well(std::span<const double> params) {
    if (params.size() != 1) throw ConfigError("double_well takes exactly one parameter (a)");
    const double a = params[0];
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("double_well parameter a must be > 0");
    const double a2 = a * a;
    Potential p;
    p.label = "double_well";
    p.params.assign(params.begin(), params.end());
    p.value = [a2](double x) {
        const double d = x * x - a2;
        return d * d;
    };
    p.gradient = [a2](double x) { return 4.0 * x * (x * x - a2); };
    return p;
}

Potential make_polynomial(std::span<const double> params) {
    if (params.empty()) throw ConfigError("polynomial needs at least one coefficient");
    for (double c : params) {
        if (!std::isfinite(c)) throw ConfigError("polynomial coefficients must be finite");
    }
    std::vector<double> c(params.begin(), params.end());
    Potential p;
    p.label = "polynomial";
    p.params = c;
    p.value = [c](double x) {
        double acc = 0.0;
        for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
        return acc;
    };
    p.gradient = [c](double x) {
        double acc = 0.0;
        for (std::size_t k = c.size() - 1; k >= 1; --k) acc = acc * x + static_cast<double>(k) * c[k];
        return acc;
    };
    return p;
}

}  // namespace

Potential builtin_potential(std::string_view name, std::span<const double> params) {
    if (name == "zero") {
        if (!params.empty()) throw ConfigError("zero potential takes no parameters");
        return make_zero();
    }
    if (name == "quadratic") return make_quadratic(params);
    if (name == "double_well") return make_double_well(params);
    if (name == "polynomial") return make_polynomial(params);
    throw ConfigError("unknown potential '" + std::string(name) + "'");
}

GibbsMeasure::GibbsMeasure(Potential potential, Grid grid)
    : potential_(std::move(potential)), grid_(grid), finite_(!potential_.is_zero()) {
    const std::size_t n = grid_.size();
    std::vector<double> psi(n);
    double psi_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        psi[i] = potential_.evaluate(grid_.node(i));
        if (!std::isfinite(psi[i])) {
            throw NumericError("potential is not finite at grid node x = " + std::to_string(grid_.node(i)));
        }
        psi_min = std::min(psi_min, psi[i]);
    }
    if (-2.0 * psi_min > std::log(std::numeric_limits<double>::max())) {
        throw NumericError("Gibbs quadrature overflows: exp(-2 Psi) exceeds double range");
    }
    // Shifted sum keeps the quadrature away from underflow for steep potentials.
    std::vector<double> shifted(n);
    for (std::size_t i = 0; i < n; ++i) shifted[i] = std::exp(-2.0 * (psi[i] - psi_min));
    const double log_z = -2.0 * psi_min + std::log(grid_.integrate(shifted));
    if (!std::isfinite(log_z)) throw NumericError("Gibbs normalizing constant is not finite");

    log_z_ = finite_ ? log_z : 0.0;
    log_density_.resize(n);
    density_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        log_density_[i] = -2.0 * psi[i] - log_z_;
        density_[i] = std::exp(log_density_[i]);
    }
}

double GibbsMeasure::normalizing_constant() const {
    if (!finite_) throw ConfigError("Gibbs measure of the zero potential is infinite");
    return std::exp(log_z_);
}

double GibbsMeasure::log_normalizing_constant() const {
    if (!finite_) throw ConfigError("Gibbs measure of the zero potential is infinite");
    return log_z_;
}

double GibbsMeasure::density_unnormalized(double x) const {
    return std::exp(-2.0 * potential_.evaluate(x));
}

double GibbsMeasure::density(double x) const {
    if (!finite_) throw ConfigError("Gibbs measure of the zero potential has no normalized density");
    return std::exp(-2.0 * potential_.evaluate(x) - log_z_);
}

double GibbsMeasure::probability(double a, double b) const {
    if (!finite_) throw ConfigError("probabilities are undefined for an infinite Gibbs measure");
    return grid_.integrate_range(density_, std::max(a, grid_.lower()), std::min(b, grid_.upper()));
}

GibbsMeasure gibbs_measure(const Potential& potential, Interval domain, std::size_t resolution) {
    return GibbsMeasure(potential, Grid(domain, resolution));
}

AdmissibilityReport check_admissibility(const Potential& potential, const Grid& grid,
                                        std::span<const double> initial_density, double radius,
                                        double coercivity_constant) {
    if (initial_density.size() != grid.size()) throw ShapeError("initial density does not match grid");
    AdmissibilityReport report;

    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid.node(i);
        if (std::abs(x) < radius) continue;
        margin = std::min(margin, x * potential.grad(x) + coercivity_constant * x * x);
    }
    report.coercivity_margin = margin;
    report.coercivity_pass = margin >= -1e-12;

    std::vector<double> weighted(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid.node(i);
        weighted[i] = x * x * initial_density[i];
    }
    report.second_moment = grid.integrate(weighted);
    report.second_moment_pass = std::isfinite(report.second_moment);

    if (potential.is_zero()) {
        report.entropy_pass = true;
    } else {
        const GibbsMeasure gibbs(potential, grid);
        report.relative_entropy = relative_entropy(initial_density, gibbs);
        report.entropy_pass = std::isfinite(*report.relative_entropy);
    }
    return report;
}

}  // namespace entroflow
