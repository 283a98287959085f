#include "entroflow/iterate.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "entroflow/control.hpp"
#include "entroflow/entropy.hpp"
#include "entroflow/error.hpp"
#include "entroflow/parallel.hpp"
#include "entroflow/rng.hpp"
#include "entroflow/score.hpp"
#include "entroflow/sde.hpp"

namespace entroflow {

namespace {

template <class E>
[[noreturn]] void rethrow_with_stage(const E& e, std::size_t stage) {
    throw E("stage " + std::to_string(stage) + ": " + e.what());
}

// Optimal control of one leg [kT, (k+1)T]. Even stages run the reversed
// problem and odd stages the second-stage forward problem; both read the score
// of the same leg at field time kT + T - tau, so one ensemble serves either.
CostReport verify_stage(const Potential& potential, const GibbsMeasure& gibbs, const DensityField& leg,
                        std::size_t stage, const IterationOptions& options) {
    const double horizon = options.stage_horizon;
    const ScoreField score = build_score(leg, gibbs);
    const std::vector<double> init =
        sample_from_slice(leg.grid, leg.back(), options.particles, options.seed + stage);

    SimulationOptions sim;
    sim.horizon = horizon;
    sim.dt = options.dt;
    sim.record_stride = std::numeric_limits<std::size_t>::max();
    sim.seed = options.seed + stage;
    sim.field_origin = leg.start_time();
    if (stage % 2 == 0) {
        const PathEnsemble ens = simulate_reversed(potential, score, ControlPolicy::score_optimal(), init, sim);
        // The first leg may start from a rough density, later legs are smooth.
        const double t_min = stage == 0 ? options.dt : 0.0;
        return expected_cost_reversed(ens, score, leg, gibbs, t_min);
    }
    const LambdaField lambda{score.window(leg.start_time(), leg.end_time(), leg.start_time()), leg.start_time()};
    const PathEnsemble ens = simulate_second_forward(potential, lambda, ControlPolicy::lambda_optimal(), init, sim);
    // Lambda(0, .) is L at the start of the leg; reference H(P((k+1)T)).
    CostReport r = expected_cost_second(ens, lambda, leg, gibbs);
    return r;
}

}  // namespace

IterationResult run_iteration(const Potential& potential, const GibbsMeasure& gibbs, std::span<const double> p0,
                              const IterationOptions& options) {
    if (!gibbs.finite()) throw ConfigError("iteration needs a finite Gibbs measure");
    if (options.stages == 0) throw ConfigError("iteration needs at least one stage");
    if (!(options.stage_horizon > 0.0)) throw ConfigError("stage horizon must be positive");

    IterationResult result;
    const Grid& grid = gibbs.grid();
    const auto q = gibbs.density_nodes();
    std::vector<double> current(p0.begin(), p0.end());
    for (std::size_t k = 0; k < options.stages; ++k) {
        const auto started = std::chrono::steady_clock::now();
        IterationStage row;
        row.stage = k;
        row.direction = k % 2 == 0 ? "backward" : "forward";
        try {
            row.entropy = relative_entropy(current, gibbs);
            row.tv = total_variation(current, q, grid);

            FokkerPlanckOptions fp;
            fp.horizon = options.stage_horizon;
            fp.dt = options.dt;
            fp.store_stride = options.store_stride;
            fp.start_time = static_cast<double>(k) * options.stage_horizon;
            const DensityField leg = solve_fokker_planck(potential, current, grid, fp);
            row.next_entropy = relative_entropy(leg.back(), gibbs);

            if (options.verify_stages.contains(k)) {
                const CostReport cost = verify_stage(potential, gibbs, leg, k, options);
                row.cost = cost.total;
                row.cost_se = cost.std_error;
            }
            current.assign(leg.back().begin(), leg.back().end());
        } catch (const NumericError& e) {
            rethrow_with_stage(e, k);
        } catch (const SimulationError& e) {
            rethrow_with_stage(e, k);
        }
        row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.stages.push_back(row);
        if (options.early_stop > 0.0 && row.entropy < options.early_stop && k + 1 < options.stages) {
            result.stopped_early = true;
            break;
        }
    }
    return result;
}

Occupation ergodic_occupation(const Potential& potential, const GibbsMeasure& gibbs, Interval set,
                              const OccupationOptions& options) {
    if (!gibbs.finite()) throw ConfigError("occupation law needs a finite Gibbs measure");
    if (options.trajectories == 0) throw ConfigError("need at least one trajectory");
    if (!(options.dt > 0.0) || !(options.horizon >= options.dt)) throw ConfigError("invalid horizon or dt");
    const Interval domain = gibbs.grid().domain();
    const double a = std::max(set.lower, domain.lower);
    const double b = std::min(set.upper, domain.upper);

    const std::size_t n = options.trajectories;
    const auto steps = static_cast<std::size_t>(std::llround(options.horizon / options.dt));
    const double dt = options.dt;
    const double sqrt_dt = std::sqrt(dt);
    const NoiseStreams noise(options.seed, StreamTag::ergodic_noise);
    const std::vector<double> start = sample_from_slice(gibbs.grid(), gibbs.density_nodes(), n, options.seed);

    std::vector<double> fraction(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t i = 0; i < n; ++i) {
        double x = start[i];
        std::size_t inside = 0;
        for (std::size_t k = 0; k < steps; ++k) {
            x += -potential.grad(x) * dt + sqrt_dt * noise.normal(i, k);
            if (x > domain.upper) x = 2.0 * domain.upper - x;
            if (x < domain.lower) x = 2.0 * domain.lower - x;
            x = std::clamp(x, domain.lower, domain.upper);
            inside += (x >= a && x <= b) ? 1u : 0u;
        }
        fraction[i] = static_cast<double>(inside) / static_cast<double>(steps);
    }
    const MeanEstimate est = estimate_mean(fraction);
    return {est.mean, est.std_error, b > a ? gibbs.probability(a, b) : 0.0};
}

}  // namespace entroflow
