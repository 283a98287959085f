#include "entroflow/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "entroflow/error.hpp"
#include "entroflow/rng.hpp"

namespace entroflow {

namespace {

double reflect(double x, const Interval& d) {
    if (x > d.upper) x = 2.0 * d.upper - x;
    if (x < d.lower) x = 2.0 * d.lower - x;
    return std::clamp(x, d.lower, d.upper);
}

std::size_t step_count(double horizon, double dt) {
    if (!(dt > 0.0)) throw ConfigError("simulation dt must be positive");
    if (!(horizon >= dt * (1.0 - 1e-9))) throw ConfigError("simulation horizon must be at least dt");
    return static_cast<std::size_t>(std::max(1.0, std::round(horizon / dt)));
}

PathEnsemble make_ensemble(std::size_t n, std::span<const double> initial, const SimulationOptions& options,
                           Direction direction, std::string label) {
    if (initial.empty()) throw ConfigError("ensemble needs at least one particle");
    if (options.record_stride == 0) throw ConfigError("record_stride must be >= 1");
    PathEnsemble ens;
    ens.particles = initial.size();
    ens.seed = options.seed;
    ens.direction = direction;
    ens.policy_label = std::move(label);
    ens.horizon = options.horizon;
    ens.dt = options.horizon / static_cast<double>(n);
    const std::size_t recorded = n / options.record_stride + 2;
    ens.times.reserve(recorded);
    ens.states.reserve(recorded * ens.particles);
    ens.log_weight.reserve(recorded * ens.particles);
    return ens;
}

void record(PathEnsemble& ens, double t, std::span<const double> x, std::span<const double> logw) {
    ens.times.push_back(t);
    ens.states.insert(ens.states.end(), x.begin(), x.end());
    ens.log_weight.insert(ens.log_weight.end(), logw.begin(), logw.end());
}

[[noreturn]] void fail_particle(std::size_t particle, std::size_t step, const char* what) {
    throw SimulationError(std::string("non-finite ") + what + " for particle " + std::to_string(particle) +
                          " at step " + std::to_string(step));
}

// Shared integrator for both controlled stages. `field_time(tau)` maps the
// simulation clock to the time at which the score field is read;
// `control_time(tau)` is the argument handed to policy callbacks.
template <class FieldTime, class ControlTime>
PathEnsemble integrate_controlled(const Potential& potential, const ScoreField& field, const ControlPolicy& policy,
                                  std::span<const double> initial, const SimulationOptions& options,
                                  Direction direction, StreamTag tag, FieldTime field_time,
                                  ControlTime control_time) {
    const std::size_t steps = step_count(options.horizon, options.dt);
    PathEnsemble ens = make_ensemble(steps, initial, options, direction, policy.label);
    const double dt = ens.dt;
    const double sqrt_dt = std::sqrt(dt);
    const std::size_t n = ens.particles;
    const Interval domain = field.grid().domain();
    const NoiseStreams noise(options.seed, tag);

    const bool needs_callback = policy.kind == PolicyKind::perturbed || policy.kind == PolicyKind::custom;
    if (needs_callback && !policy.callback) throw ConfigError("policy '" + policy.label + "' has no callback");
    if (!(policy.bound > 0.0)) throw ConfigError("policy bound must be positive");

    std::vector<double> x(initial.begin(), initial.end());
    std::vector<double> logw(n, 0.0);
    ens.energy.assign(n, 0.0);
    ens.gap_integral.assign(n, 0.0);
    record(ens, 0.0, x, logw);

    std::size_t clipped = 0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double tau = static_cast<double>(k) * dt;
        const ScoreField::TimeBracket tb = field.bracket(field_time(tau));
        const double ct = control_time(tau);
        std::size_t bad = std::numeric_limits<std::size_t>::max();
        std::size_t bad_bound = std::numeric_limits<std::size_t>::max();

#pragma omp parallel for schedule(static) reduction(+ : clipped) reduction(min : bad, bad_bound)
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = x[i];
            const ScoreField::Sample g = field.score_at(tb, xi);
            clipped += g.clipped ? 1u : 0u;
            double gamma = 0.0;
            double drift = -potential.grad(xi);
            switch (policy.kind) {
                case PolicyKind::zero:
                    drift += g.value;
                    break;
                case PolicyKind::score_optimal:
                case PolicyKind::lambda_optimal:
                    gamma = -g.value;  // drift stays -Psi'
                    break;
                case PolicyKind::perturbed: {
                    const double delta = policy.callback(ct, xi);
                    if (std::abs(delta) > policy.bound) bad_bound = std::min(bad_bound, i);
                    gamma = -g.value + delta;
                    drift += delta;
                    break;
                }
                case PolicyKind::custom:
                    gamma = policy.callback(ct, xi);
                    if (std::abs(gamma) > policy.bound) bad_bound = std::min(bad_bound, i);
                    drift += g.value + gamma;
                    break;
            }
            const double db = options.noise ? sqrt_dt * noise.normal(i, k) : 0.0;
            // log dP/dP^gamma with dW_ref = dB + gamma ds (left-point rule).
            logw[i] += -gamma * db - 0.5 * gamma * gamma * dt;
            ens.energy[i] += 0.5 * gamma * gamma * dt;
            const double r = g.value + gamma;
            ens.gap_integral[i] += 0.5 * r * r * dt;
            const double next = xi + drift * dt + db;
            if (!std::isfinite(next) || !std::isfinite(logw[i])) bad = std::min(bad, i);
            x[i] = reflect(next, domain);
        }
        if (bad_bound != std::numeric_limits<std::size_t>::max()) {
            throw ConfigError("policy '" + policy.label + "' exceeded its bound for particle " +
                              std::to_string(bad_bound) + " at step " + std::to_string(k));
        }
        if (bad != std::numeric_limits<std::size_t>::max()) fail_particle(bad, k, "state or weight");
        if ((k + 1) % options.record_stride == 0 || k + 1 == steps) {
            record(ens, static_cast<double>(k + 1) * dt, x, logw);
        }
    }
    ens.score_evaluations = steps * n;
    ens.clipped_evaluations = clipped;
    return ens;
}

}  // namespace

ControlPolicy ControlPolicy::zero() { return {PolicyKind::zero, "zero", {}, 10.0}; }

ControlPolicy ControlPolicy::score_optimal() { return {PolicyKind::score_optimal, "score_optimal", {}, 10.0}; }

ControlPolicy ControlPolicy::lambda_optimal() { return {PolicyKind::lambda_optimal, "lambda_optimal", {}, 10.0}; }

ControlPolicy ControlPolicy::constant_shift(double c) {
    return perturbed("constant:" + std::to_string(c), [c](double, double) { return c; }, std::max(10.0, std::abs(c)));
}

ControlPolicy ControlPolicy::sine_shift(double amplitude) {
    return perturbed("sine:" + std::to_string(amplitude),
                     [amplitude](double, double x) { return amplitude * std::sin(x); },
                     std::max(10.0, std::abs(amplitude)));
}

ControlPolicy ControlPolicy::perturbed(std::string label, std::function<double(double, double)> delta,
                                       double bound) {
    return {PolicyKind::perturbed, std::move(label), std::move(delta), bound};
}

ControlPolicy ControlPolicy::custom(std::string label, std::function<double(double, double)> gamma, double bound) {
    return {PolicyKind::custom, std::move(label), std::move(gamma), bound};
}

std::size_t PathEnsemble::index_of(double t) const {
    const double tol = 1e-9 * std::max(1.0, std::abs(t));
    const auto it = std::lower_bound(times.begin(), times.end(), t - tol);
    if (it == times.end() || std::abs(*it - t) > tol) {
        throw RangeError("time " + std::to_string(t) + " is not recorded in the ensemble");
    }
    return static_cast<std::size_t>(it - times.begin());
}

std::span<const double> PathEnsemble::states_at(double t) const {
    return std::span(states).subspan(index_of(t) * particles, particles);
}

std::span<const double> PathEnsemble::log_weights_at(double t) const {
    return std::span(log_weight).subspan(index_of(t) * particles, particles);
}

std::span<const double> PathEnsemble::final_states() const {
    return std::span(states).subspan((times.size() - 1) * particles, particles);
}

std::span<const double> PathEnsemble::final_log_weights() const {
    return std::span(log_weight).subspan((times.size() - 1) * particles, particles);
}

double PathEnsemble::clip_rate() const {
    if (score_evaluations == 0) return 0.0;
    return static_cast<double>(clipped_evaluations) / static_cast<double>(score_evaluations);
}

PathEnsemble simulate_forward(const Potential& potential, std::span<const double> initial,
                              const SimulationOptions& options) {
    const std::size_t steps = step_count(options.horizon, options.dt);
    PathEnsemble ens = make_ensemble(steps, initial, options, Direction::forward, "uncontrolled");
    const double dt = ens.dt;
    const double sqrt_dt = std::sqrt(dt);
    const std::size_t n = ens.particles;
    const NoiseStreams noise(options.seed, StreamTag::forward_noise);

    std::vector<double> x(initial.begin(), initial.end());
    const std::vector<double> zeros(n, 0.0);
    ens.energy.assign(n, 0.0);
    ens.gap_integral.assign(n, 0.0);
    record(ens, 0.0, x, zeros);
    for (std::size_t k = 0; k < steps; ++k) {
        std::size_t bad = std::numeric_limits<std::size_t>::max();
#pragma omp parallel for schedule(static) reduction(min : bad)
        for (std::size_t i = 0; i < n; ++i) {
            const double db = options.noise ? sqrt_dt * noise.normal(i, k) : 0.0;
            const double next = x[i] - potential.grad(x[i]) * dt + db;
            if (!std::isfinite(next)) bad = std::min(bad, i);
            x[i] = reflect(next, options.domain);
        }
        if (bad != std::numeric_limits<std::size_t>::max()) fail_particle(bad, k, "state");
        if ((k + 1) % options.record_stride == 0 || k + 1 == steps) {
            record(ens, static_cast<double>(k + 1) * dt, x, zeros);
        }
    }
    return ens;
}

PathEnsemble simulate_reversed(const Potential& potential, const ScoreField& score, const ControlPolicy& policy,
                               std::span<const double> initial, const SimulationOptions& options) {
    if (policy.kind == PolicyKind::lambda_optimal) {
        throw ConfigError("lambda_optimal applies to the second stage only");
    }
    const double origin = options.field_origin;
    const double horizon = options.horizon;
    const double tol = 1e-9 * std::max(1.0, horizon);
    if (score.start_time() > origin + tol || score.end_time() < origin + horizon - tol) {
        throw RangeError("score field does not cover the reversed leg");
    }
    return integrate_controlled(
        potential, score, policy, initial, options, Direction::reversed, StreamTag::reversed_noise,
        [origin, horizon](double s) { return origin + horizon - s; },
        [origin, horizon](double s) { return origin + horizon - s; });
}

PathEnsemble simulate_second_forward(const Potential& potential, const LambdaField& lambda,
                                     const ControlPolicy& policy, std::span<const double> initial,
                                     const SimulationOptions& options) {
    if (policy.kind == PolicyKind::score_optimal) {
        throw ConfigError("score_optimal applies to the reversed stage; use lambda_optimal");
    }
    const double horizon = options.horizon;
    const double tol = 1e-9 * std::max(1.0, horizon);
    if (lambda.field.start_time() > tol || lambda.field.end_time() < horizon - tol) {
        throw RangeError("Lambda field does not cover [0, T]");
    }
    return integrate_controlled(
        potential, lambda.field, policy, initial, options, Direction::forward, StreamTag::second_noise,
        [horizon](double t) { return horizon - t; }, [](double t) { return t; });
}

std::vector<double> sample_from_slice(const Grid& grid, std::span<const double> slice, std::size_t count,
                                      std::uint64_t seed) {
    if (slice.size() != grid.size()) throw ShapeError("slice does not match grid");
    const std::size_t n = grid.size();
    const double h = grid.spacing();
    std::vector<double> cdf(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        cdf[i] = cdf[i - 1] + 0.5 * h * (std::max(slice[i - 1], 0.0) + std::max(slice[i], 0.0));
    }
    const double total = cdf.back();
    if (!(total > 0.0)) throw NumericError("cannot sample from a slice with zero mass");

    const NoiseStreams streams(seed, StreamTag::initial_sample);
    std::vector<double> out(count);
    for (std::size_t j = 0; j < count; ++j) {
        const double target = (1.0 - streams.uniforms(j, 0)[0]) * total;  // in [0, total)
        auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
        std::size_t cell = it == cdf.begin() ? 0 : static_cast<std::size_t>(it - cdf.begin()) - 1;
        cell = std::min(cell, n - 2);
        const double a = std::max(slice[cell], 0.0);
        const double b = std::max(slice[cell + 1], 0.0);
        const double r = (target - cdf[cell]) / h;
        // Solve a f + (b - a) f^2 / 2 = r for f in [0, 1].
        const double disc = std::max(a * a + 2.0 * r * (b - a), 0.0);
        const double denom = a + std::sqrt(disc);
        const double f = denom > 0.0 ? std::clamp(2.0 * r / denom, 0.0, 1.0) : 0.5;
        out[j] = grid.node(cell) + f * h;
    }
    return out;
}

std::vector<double> sample_gaussian(double mean, double variance, std::size_t count, std::uint64_t seed) {
    if (!(variance >= 0.0)) throw ConfigError("Gaussian variance must be nonnegative");
    const NoiseStreams streams(seed, StreamTag::initial_sample);
    const double sd = std::sqrt(variance);
    std::vector<double> out(count);
    for (std::size_t j = 0; j < count; ++j) out[j] = mean + sd * streams.normal(j, 1);
    return out;
}

Histogram empirical_marginal(const PathEnsemble& ensemble, double t, const Grid& bins, bool weighted) {
    const auto x = ensemble.states_at(t);
    const std::size_t cells = bins.size() - 1;
    std::vector<double> w(x.size(), 1.0);
    if (weighted) {
        const auto lw = ensemble.log_weights_at(t);
        const double top = *std::max_element(lw.begin(), lw.end());
        for (std::size_t i = 0; i < x.size(); ++i) w[i] = std::exp(lw[i] - top);
    }
    std::vector<double> mass(cells, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double frac = 0.0;
        std::size_t cell = bins.locate(x[i], frac);
        // A point sitting exactly on an interior edge belongs to the cell on its right.
        if (frac >= 1.0 && cell + 1 < cells && x[i] < bins.upper()) ++cell;
        mass[cell] += w[i];
        total += w[i];
    }
    for (double& m : mass) m /= total;
    return Histogram{bins, std::move(mass)};
}

Histogram bin_masses(const Grid& grid, std::span<const double> slice, const Grid& bins) {
    if (slice.size() != grid.size()) throw ShapeError("slice does not match grid");
    const std::size_t n = grid.size();
    const double h = grid.spacing();
    std::vector<double> cum(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) cum[i] = cum[i - 1] + 0.5 * h * (slice[i - 1] + slice[i]);
    auto cumulative = [&](double x) {
        x = std::clamp(x, grid.lower(), grid.upper());
        double frac = 0.0;
        const std::size_t i = grid.locate(x, frac);
        const double a = slice[i];
        const double b = slice[i + 1];
        return cum[i] + h * (frac * a + 0.5 * frac * frac * (b - a));
    };
    const std::size_t cells = bins.size() - 1;
    std::vector<double> mass(cells);
    double total = 0.0;
    for (std::size_t j = 0; j < cells; ++j) {
        mass[j] = cumulative(bins.node(j + 1)) - cumulative(bins.node(j));
        total += mass[j];
    }
    for (double& m : mass) m /= total;
    return Histogram{bins, std::move(mass)};
}

double histogram_tv(const Histogram& a, const Histogram& b) {
    require_same_grid(a.bins, b.bins, "histogram bins");
    double s = 0.0;
    for (std::size_t j = 0; j < a.mass.size(); ++j) s += std::abs(a.mass[j] - b.mass[j]);
    return 0.5 * s;
}

}  // namespace entroflow
