#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "entroflow/fokker_planck.hpp"
#include "entroflow/potential.hpp"

namespace entroflow {

/// One stage of the alternating scheme: initial law P(kT), and (optionally)
/// the Monte Carlo value of its control problem, whose optimum is H(P((k+1)T) | Q).
struct IterationStage {
    std::size_t stage = 0;
    std::string direction;  ///< "backward" for even k, "forward" for odd k
    double entropy = 0.0;   ///< H(P(kT) | Q)
    double tv = 0.0;        ///< TV(P(kT), Q)
    double next_entropy = 0.0;  ///< H(P((k+1)T) | Q), the stage's optimal value
    std::optional<double> cost;  ///< Monte Carlo optimal cost when verified
    std::optional<double> cost_se;
    double wall_time = 0.0;  ///< seconds
};

struct IterationOptions {
    double stage_horizon = 0.5;  ///< T
    std::size_t stages = 6;      ///< K
    double dt = 1e-3;
    std::size_t store_stride = 1;
    /// Stages whose optimal control is re-verified by simulation.
    std::set<std::size_t> verify_stages{0, 1};
    std::size_t particles = 100000;
    std::uint64_t seed = 1;
    /// Stop once H(P(kT) | Q) falls below this (0 disables).
    double early_stop = 1e-6;
};

struct IterationResult {
    std::vector<IterationStage> stages;
    bool stopped_early = false;
};

/// Advances the Fokker-Planck flow one leg of length T per stage and records
/// the entropy sequence; verified stages rebuild the score on their leg and run
/// the optimal-control ensemble. Failures are rethrown with the stage index.
IterationResult run_iteration(const Potential& potential, const GibbsMeasure& gibbs, std::span<const double> p0,
                              const IterationOptions& options);

struct OccupationOptions {
    double horizon = 1e4;
    double dt = 1e-2;
    std::size_t trajectories = 16;
    std::uint64_t seed = 1;
};

struct Occupation {
    double fraction = 0.0;      ///< time-average of 1_A
    double std_error = 0.0;     ///< across trajectories
    double gibbs_probability = 0.0;  ///< Q(A)
};

/// Long-run time fraction spent in [a, b] by trajectories started from Q.
Occupation ergodic_occupation(const Potential& potential, const GibbsMeasure& gibbs, Interval set,
                              const OccupationOptions& options);

}  // namespace entroflow
