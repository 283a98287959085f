#pragma once

#include <array>
#include <string>

#include "entroflow/fokker_planck.hpp"
#include "entroflow/potential.hpp"
#include "entroflow/score.hpp"
#include "entroflow/sde.hpp"

namespace entroflow {

/// Largest tolerated fraction of clipped score evaluations in a cost run.
inline constexpr double kMaxClipRate = 1e-4;

struct CostReport {
    std::string policy;
    double terminal_term = 0.0;  ///< mean L at the end of the controlled path (nats)
    double energy_term = 0.0;    ///< mean (1/2) int |gamma|^2 (nats)
    double total = 0.0;
    double std_error = 0.0;
    double reference_entropy = 0.0;  ///< entropy the optimum should reach, from the density field
    double gap = 0.0;                ///< total - reference_entropy
    double clip_rate = 0.0;
    bool clip_flagged = false;  ///< clip_rate >= kMaxClipRate
    /// total with the terminal L read at t_min, 2 t_min and 4 t_min (first stage only).
    std::array<double, 3> terminal_sensitivity{};
    std::size_t particles = 0;
};

/// Expected cost of a reversed-stage ensemble: E[L(t_min, X(T)) + (1/2) int |gamma|^2].
///
/// `field` is the forward density on the leg the score was built from and
/// supplies the reference H(P(T) | Q). `t_min` stands in for time 0, where
/// L may be rough; pass 0 to read L(0, .) directly.
CostReport expected_cost_reversed(const PathEnsemble& ensemble, const ScoreField& score, const DensityField& field,
                                  const GibbsMeasure& gibbs, double t_min);

/// Expected cost of a second-stage ensemble: E[Lambda(0, X(T)) + (1/2) int |beta|^2],
/// with reference H(P(2T) | Q) read from `field` at offset + T.
CostReport expected_cost_second(const PathEnsemble& ensemble, const LambdaField& lambda, const DensityField& field,
                                const GibbsMeasure& gibbs);

struct GapReport {
    double measured = 0.0;  ///< total - reference entropy
    double measured_se = 0.0;
    double predicted = 0.0;  ///< mean (1/2) int |grad L + gamma|^2
    double predicted_se = 0.0;
    double combined_se() const;
};

/// Compares the measured suboptimality gap with the drift term of the cost process.
/// Throws ConfigError when the policy is not a bounded perturbation (bound <= 10).
GapReport suboptimality_gap(const PathEnsemble& ensemble, const CostReport& cost, const ControlPolicy& policy);

struct EntropicDecomposition {
    double total = 0.0;
    double path_entropy = 0.0;      ///< mean log(dP^gamma/dP) over whole paths
    double endpoint_entropy = 0.0;  ///< plug-in KL of the endpoint law, simulated vs reweighted
    double d_term = 0.0;            ///< path_entropy - endpoint_entropy
    double h_term = 0.0;            ///< total - d_term
};

/// Splits a cost into endpoint relative entropy and the entropic cost of time
/// reversal. The endpoint term compares the unweighted endpoint histogram with
/// the one reweighted by exp(log_weight) on `bins`.
EntropicDecomposition entropic_decomposition(const PathEnsemble& ensemble, const CostReport& cost,
                                             const GibbsMeasure& gibbs, const Grid& bins);

}  // namespace entroflow
