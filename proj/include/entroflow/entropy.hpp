#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "entroflow/fokker_planck.hpp"
#include "entroflow/potential.hpp"
#include "entroflow/score.hpp"

namespace entroflow {

struct EntropyValue {
    double value = 0.0;                 ///< nats
    double floored_contribution = 0.0;  ///< part of the integral from cells where p < eps*q
};

/// H(p | Q) = int p log(max(p, eps q)/q) dx by the trapezoid rule, in nats.
/// Throws ConfigError for an infinite Gibbs measure, ShapeError on a grid mismatch.
EntropyValue relative_entropy_detailed(std::span<const double> slice, const GibbsMeasure& gibbs,
                                       double floor = ScoreField::kDefaultFloor);
double relative_entropy(std::span<const double> slice, const GibbsMeasure& gibbs,
                        double floor = ScoreField::kDefaultFloor);

/// -int p log p dx; entropy against Lebesgue measure for the heat-flow demo.
double differential_entropy(std::span<const double> slice, const Grid& grid);

/// I(p | Q) = int |grad L|^2 p dx at a time stored in both fields.
double fisher_information(const ScoreField& score, const DensityField& field, double t);

/// (1/2) int |a - b| dx by the trapezoid rule.
double total_variation(std::span<const double> a, std::span<const double> b, const Grid& grid);

struct EntropyReport {
    std::vector<double> times;
    std::vector<double> entropy;              ///< H(t)
    std::vector<double> fisher;               ///< I(t)
    std::vector<double> tv;                   ///< TV(p(t), q)
    std::vector<double> residual;             ///< |dH/dt + I/2|, NaN at the two ends
    std::vector<double> relative_residual;    ///< residual / (I/2), NaN at the ends
    std::vector<double> pinsker_margin;       ///< H - 2 tv^2
    double integral_lhs = 0.0;                ///< H(t_first) - H(t_last)
    double integral_rhs = 0.0;                ///< (1/2) int I dt over the same span
    double max_floored_fraction = 0.0;        ///< max over times of floored/|H|

    double max_relative_residual() const;
    double integral_relative_error() const;
    double min_pinsker_margin() const;
    /// Largest increase H(t_{i+1}) - H(t_i) (<= 0 for a monotone curve).
    double max_entropy_increase() const;
};

/// H, I, TV and the de Bruijn residual at all stored times >= t_min. The time
/// derivative is a second-order centered difference on the stored lattice.
/// Throws ConfigError when fewer than three times qualify.
EntropyReport dissipation_check(const DensityField& field, const ScoreField& score, const GibbsMeasure& gibbs,
                                double t_min);

/// Same report against Lebesgue measure (zero potential): H = int p log p,
/// I = int |grad log p|^2 p. TV and Pinsker entries are NaN.
EntropyReport lebesgue_dissipation_check(const DensityField& field, double t_min,
                                         double floor = ScoreField::kDefaultFloor);

struct HorizonIdentity {
    double lhs = 0.0;         ///< H(P(0) | Q)
    double rhs = 0.0;         ///< (1/2) int_0^T I dt
    double truncation = 0.0;  ///< H(P(T_long) | Q)
    bool horizon_sufficient = true;  ///< truncation <= 1e-4 * lhs
};

/// Integrates the Fisher information along the whole stored field.
HorizonIdentity infinite_horizon_identity(const DensityField& field, const ScoreField& score,
                                          const GibbsMeasure& gibbs);

struct MartingaleExpectation {
    double mean = 0.0;
    double std_error = 0.0;
    double probe_time = 0.0;
};

/// Draws X(0) ~ Q, runs the uncontrolled dynamics up to `probe_time`, and
/// averages the likelihood ratio p(probe_time, X)/q(X) read from `field`.
MartingaleExpectation backwards_martingale_expectation(const Potential& potential, const GibbsMeasure& gibbs,
                                                       const DensityField& field, double probe_time,
                                                       std::size_t particles, std::uint64_t seed,
                                                       double dt = 1e-3);

}  // namespace entroflow
