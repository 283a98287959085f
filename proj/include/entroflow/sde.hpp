#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "entroflow/grid.hpp"
#include "entroflow/potential.hpp"
#include "entroflow/score.hpp"

namespace entroflow {

enum class Direction { forward, reversed };

enum class PolicyKind { zero, score_optimal, lambda_optimal, perturbed, custom };

/// A bounded drift control.
///
/// `perturbed` adds `callback` to the optimal control (gamma = -grad L + delta);
/// `custom` uses `callback` as the whole control. The callback receives the
/// control's own time index (T - s for the reversed stage, t for the second
/// stage) and the position, and must return a finite value bounded by `bound`.
struct ControlPolicy {
    PolicyKind kind = PolicyKind::zero;
    std::string label = "zero";
    std::function<double(double, double)> callback;
    double bound = 10.0;

    static ControlPolicy zero();
    static ControlPolicy score_optimal();
    static ControlPolicy lambda_optimal();
    /// delta(t, x) = c.
    static ControlPolicy constant_shift(double c);
    /// delta(t, x) = amplitude * sin(x).
    static ControlPolicy sine_shift(double amplitude);
    static ControlPolicy perturbed(std::string label, std::function<double(double, double)> delta,
                                   double bound = 10.0);
    static ControlPolicy custom(std::string label, std::function<double(double, double)> gamma,
                                double bound = 10.0);
};

/// N particle paths recorded at a subset of integrator steps.
///
/// `log_weight` holds log(dP/dP^gamma) along each path: the log density of the
/// reference (uncontrolled) path law against the simulated controlled law,
/// accumulated with the same increments that advance the state. It is zero for
/// the zero control, and exp(log_weight) is a mean-one martingale under the
/// simulated law. `energy` is (1/2) int |gamma|^2 and `gap_integral` is
/// (1/2) int |grad L + gamma|^2, both per particle at the final time.
struct PathEnsemble {
    std::size_t particles = 0;
    std::vector<double> times;
    std::vector<double> states;      ///< times.size() x particles, time-major
    std::vector<double> log_weight;  ///< same layout as states
    std::vector<double> energy;
    std::vector<double> gap_integral;
    std::uint64_t seed = 0;
    Direction direction = Direction::forward;
    std::string policy_label = "none";
    double horizon = 0.0;
    double dt = 0.0;
    std::size_t score_evaluations = 0;
    std::size_t clipped_evaluations = 0;

    std::size_t index_of(double t) const;
    std::span<const double> states_at(double t) const;
    std::span<const double> log_weights_at(double t) const;
    std::span<const double> final_states() const;
    std::span<const double> final_log_weights() const;
    double clip_rate() const;
};

struct SimulationOptions {
    double horizon = 1.0;
    double dt = 1e-3;
    /// Record every k-th step; t = 0 and the horizon are always recorded.
    std::size_t record_stride = 50;
    std::uint64_t seed = 1;
    /// Test hook: false integrates the deterministic drift only.
    bool noise = true;
    /// Reflecting boundary for the forward stage; controlled stages use the score grid.
    Interval domain{-8.0, 8.0};
    /// Start of the density leg that the reversed score field describes.
    double field_origin = 0.0;
};

/// Euler-Maruyama for dX = -Psi'(X) dt + dW with reflection at the domain ends.
PathEnsemble simulate_forward(const Potential& potential, std::span<const double> initial,
                              const SimulationOptions& options);

/// Time-reversed dynamics under control gamma:
/// dX(s) = (grad L(T - s, X) + gamma(T - s) - Psi'(X)) ds + dW(s), s in [0, T],
/// with L read from `score` at time field_origin + T - s. For score_optimal the
/// drift is -Psi' exactly while the weights still use gamma = -grad L.
PathEnsemble simulate_reversed(const Potential& potential, const ScoreField& score, const ControlPolicy& policy,
                               std::span<const double> initial, const SimulationOptions& options);

/// Second-stage forward dynamics under control beta:
/// dX(t) = (grad Lambda(T - t, X) + beta(t) - Psi'(X)) dt + dW(t), t in [0, T].
PathEnsemble simulate_second_forward(const Potential& potential, const LambdaField& lambda,
                                     const ControlPolicy& policy, std::span<const double> initial,
                                     const SimulationOptions& options);

/// Inverse-CDF sampling from a piecewise-linear density on `grid`.
std::vector<double> sample_from_slice(const Grid& grid, std::span<const double> slice, std::size_t count,
                                      std::uint64_t seed);
std::vector<double> sample_gaussian(double mean, double variance, std::size_t count, std::uint64_t seed);

/// Cell masses over bins whose edges are the nodes of `bins`.
struct Histogram {
    Grid bins;
    std::vector<double> mass;  ///< sums to 1

    double density(std::size_t cell) const { return mass[cell] / bins.spacing(); }
};

/// Histogram of the recorded states at time t, optionally importance-weighted
/// by self-normalized exp(log_weight). Particles outside the bins are clamped
/// into the end cells.
Histogram empirical_marginal(const PathEnsemble& ensemble, double t, const Grid& bins, bool weighted = false);

/// Exact cell masses of the piecewise-linear interpolant of `slice`.
Histogram bin_masses(const Grid& grid, std::span<const double> slice, const Grid& bins);

/// Half the L1 distance between two histograms on the same bins.
double histogram_tv(const Histogram& a, const Histogram& b);

}  // namespace entroflow
