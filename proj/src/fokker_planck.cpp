#include "entroflow/fokker_planck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "entroflow/error.hpp"

namespace entroflow {

namespace {

// Bernoulli function z / (e^z - 1).
double bernoulli(double z) {
    if (std::abs(z) < 1e-8) return 1.0 - 0.5 * z;
    return z / std::expm1(z);
}

// Tridiagonal flux matrix K with W dp/dt = K p, stored by diagonals.
struct FluxMatrix {
    std::vector<double> lower;  // K(i, i-1)
    std::vector<double> diag;   // K(i, i)
    std::vector<double> upper;  // K(i, i+1)
};

FluxMatrix assemble(const Potential& potential, const Grid& grid) {
    const std::size_t n = grid.size();
    const double inv2h = 1.0 / (2.0 * grid.spacing());
    std::vector<double> psi(n);
    for (std::size_t i = 0; i < n; ++i) psi[i] = potential.evaluate(grid.node(i));

    FluxMatrix k{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (std::size_t i = 0; i + 1 < n; ++i) {
        // Flux through the face between nodes i and i+1.
        const double delta = 2.0 * (psi[i + 1] - psi[i]);
        const double to_right = bernoulli(delta) * inv2h;   // coefficient of p_i
        const double to_left = bernoulli(-delta) * inv2h;   // coefficient of p_{i+1}
        k.upper[i] += to_left;
        k.diag[i] -= to_right;
        k.lower[i + 1] += to_right;
        k.diag[i + 1] -= to_left;
    }
    return k;
}

// Pre-factored (W - theta*dt*K) for repeated Thomas solves.
class ImplicitStep {
public:
    ImplicitStep(const FluxMatrix& k, std::span<const double> w, double dt, double theta)
        : k_(k), w_(w.begin(), w.end()), explicit_weight_((1.0 - theta) * dt) {
        const std::size_t n = w.size();
        a_.resize(n);
        c_prime_.resize(n);
        denom_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            a_[i] = -theta * dt * k.lower[i];
            const double b = w_[i] - theta * dt * k.diag[i];
            const double c = -theta * dt * k.upper[i];
            denom_[i] = i == 0 ? b : b - a_[i] * c_prime_[i - 1];
            c_prime_[i] = c / denom_[i];
        }
        rhs_.resize(n);
    }

    void advance(std::vector<double>& p) {
        const std::size_t n = p.size();
        for (std::size_t i = 0; i < n; ++i) {
            double kp = k_.diag[i] * p[i];
            if (i > 0) kp += k_.lower[i] * p[i - 1];
            if (i + 1 < n) kp += k_.upper[i] * p[i + 1];
            rhs_[i] = w_[i] * p[i] + explicit_weight_ * kp;
        }
        // Forward sweep, then back substitution.
        rhs_[0] /= denom_[0];
        for (std::size_t i = 1; i < n; ++i) rhs_[i] = (rhs_[i] - a_[i] * rhs_[i - 1]) / denom_[i];
        p[n - 1] = rhs_[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) p[i] = rhs_[i] - c_prime_[i] * p[i + 1];
    }

private:
    const FluxMatrix& k_;
    std::vector<double> w_;
    double explicit_weight_;
    std::vector<double> a_, c_prime_, denom_, rhs_;
};

}  // namespace

std::size_t DensityField::index_of(double t) const {
    const auto it = std::lower_bound(times.begin(), times.end(), t - 1e-9 * std::max(1.0, std::abs(t)));
    if (it == times.end() || std::abs(*it - t) > 1e-9 * std::max(1.0, std::abs(t))) {
        throw RangeError("time " + std::to_string(t) + " is not a stored time of the density field");
    }
    return static_cast<std::size_t>(it - times.begin());
}

std::vector<double> gaussian_slice(const Grid& grid, double mean, double variance) {
    if (!(variance > 0.0)) throw ConfigError("Gaussian variance must be positive");
    const MixtureComponent c{1.0, mean, variance};
    return mixture_slice(grid, std::span(&c, 1));
}

std::vector<double> mixture_slice(const Grid& grid, std::span<const MixtureComponent> components) {
    if (components.empty()) throw ConfigError("mixture needs at least one component");
    std::vector<double> p(grid.size(), 0.0);
    for (const auto& c : components) {
        if (!(c.variance > 0.0) || !(c.weight >= 0.0)) {
            throw ConfigError("mixture components need positive variance and nonnegative weight");
        }
        const double norm = c.weight / std::sqrt(2.0 * std::numbers::pi * c.variance);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double d = grid.node(i) - c.mean;
            p[i] += norm * std::exp(-0.5 * d * d / c.variance);
        }
    }
    return normalized_slice(grid, p);
}

std::vector<double> normalized_slice(const Grid& grid, std::span<const double> raw) {
    if (raw.size() != grid.size()) throw ShapeError("slice length does not match grid");
    std::vector<double> p(raw.begin(), raw.end());
    for (double& v : p) {
        if (!std::isfinite(v)) throw NumericError("initial density has non-finite node values");
        v = std::max(v, 0.0);
    }
    const double mass = grid.integrate(p);
    if (!(mass > 0.0)) throw NumericError("initial density has zero mass on the grid");
    for (double& v : p) v /= mass;
    return p;
}

DensityField solve_fokker_planck(const Potential& potential, std::span<const double> p0, const Grid& grid,
                                 const FokkerPlanckOptions& options) {
    if (p0.size() != grid.size()) throw ShapeError("initial slice does not match grid");
    if (!(options.horizon > 0.0)) throw ConfigError("Fokker-Planck horizon must be positive");
    if (!(options.dt > 0.0)) throw ConfigError("Fokker-Planck dt must be positive");
    if (options.store_stride == 0) throw ConfigError("store_stride must be >= 1");
    if (!(options.theta >= 0.5 && options.theta <= 1.0)) throw ConfigError("theta must lie in [0.5, 1]");

    for (double v : p0) {
        if (!(v >= 0.0)) throw NumericError("initial slice must be nonnegative and finite");
    }
    const double mass0 = grid.integrate(p0);
    if (std::abs(mass0 - 1.0) > 1e-6) {
        throw NumericError("initial slice must integrate to 1 (got " + std::to_string(mass0) + ")");
    }

    const auto outer_steps =
        static_cast<std::size_t>(std::max(1.0, std::ceil(options.horizon / options.dt - 1e-9)));
    const double dt_out = options.horizon / static_cast<double>(outer_steps);
    const double h2 = grid.spacing() * grid.spacing();
    const auto substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(dt_out / h2 - 1e-9)));
    const double dt_in = dt_out / static_cast<double>(substeps);

    const FluxMatrix k = assemble(potential, grid);
    const std::vector<double> w = grid.weights();
    ImplicitStep stepper(k, w, dt_in, options.theta);

    DensityField field;
    field.grid = grid;
    std::vector<double> p(p0.begin(), p0.end());
    field.times.push_back(options.start_time);
    field.slices.push_back(p);

    const double max0 = *std::max_element(p.begin(), p.end());
    for (std::size_t step = 1; step <= outer_steps; ++step) {
        for (std::size_t sub = 0; sub < substeps; ++sub) {
            stepper.advance(p);
            bool clipped = false;
            double pmax = 0.0;
            for (double& v : p) {
                if (v < 0.0) {
                    if (v < -1e-12 || !std::isfinite(v)) {
                        throw NumericError("Fokker-Planck instability at step " + std::to_string(step) +
                                           ": negative density " + std::to_string(v));
                    }
                    v = 0.0;
                    clipped = true;
                }
                pmax = std::max(pmax, v);
            }
            if (!std::isfinite(pmax) || pmax > 1e6 * max0) {
                throw NumericError("Fokker-Planck instability at step " + std::to_string(step) +
                                   ": maximum grew beyond 1e6 times its initial value");
            }
            if (clipped) {
                const double mass = grid.integrate(p);
                for (double& v : p) v *= mass0 / mass;
            }
        }
        if (step % options.store_stride == 0 || step == outer_steps) {
            field.times.push_back(options.start_time + static_cast<double>(step) * dt_out);
            field.slices.push_back(p);
        }
    }
    return field;
}

std::vector<double> apply_fokker_planck_operator(const Potential& potential, std::span<const double> slice,
                                                 const Grid& grid) {
    if (slice.size() != grid.size()) throw ShapeError("slice does not match grid");
    const FluxMatrix k = assemble(potential, grid);
    const std::vector<double> w = grid.weights();
    const std::size_t n = grid.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double kp = k.diag[i] * slice[i];
        if (i > 0) kp += k.lower[i] * slice[i - 1];
        if (i + 1 < n) kp += k.upper[i] * slice[i + 1];
        out[i] = kp / w[i];
    }
    return out;
}

double stationary_residual(const Potential& potential, std::span<const double> slice, const Grid& grid) {
    std::vector<double> r = apply_fokker_planck_operator(potential, slice, grid);
    for (double& v : r) v = std::abs(v);
    return grid.integrate(r);
}

Moments slice_moments(const Grid& grid, std::span<const double> slice) {
    if (slice.size() != grid.size()) throw ShapeError("slice does not match grid");
    std::vector<double> first(grid.size()), second(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid.node(i);
        first[i] = x * slice[i];
        second[i] = x * x * slice[i];
    }
    const double mass = grid.integrate(slice);
    Moments m;
    m.mean = grid.integrate(first) / mass;
    m.second_moment = grid.integrate(second) / mass;
    m.variance = m.second_moment - m.mean * m.mean;
    return m;
}

Moments moments(const DensityField& field, double t) {
    return slice_moments(field.grid, field.at(t));
}

}  // namespace entroflow
