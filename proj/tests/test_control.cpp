#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "entroflow/control.hpp"
#include "entroflow/error.hpp"
#include "entroflow/fokker_planck.hpp"
#include "entroflow/score.hpp"
#include "entroflow/sde.hpp"
#include "oracles.hpp"

using namespace entroflow;

namespace {

const Grid kGrid(Interval{-8.0, 8.0}, 1024);
const Grid kBins(Interval{-8.0, 8.0}, 65);
const Potential kQuad = builtin_potential("quadratic", {});
const GibbsMeasure kGibbs = gibbs_measure(kQuad, kGrid.domain(), kGrid.size());
constexpr double T = 0.5;
constexpr std::size_t N = 50000;

struct Leg {
    DensityField field;
    ScoreField score;
    std::vector<double> start;
};

const Leg& first_leg() {
    static const Leg leg = [] {
        FokkerPlanckOptions o;
        o.horizon = T;
        o.dt = 1e-3;
        DensityField f = solve_fokker_planck(kQuad, gaussian_slice(kGrid, 1.0, 1.0), kGrid, o);
        ScoreField s = build_score(f, kGibbs);
        auto x = sample_from_slice(kGrid, f.back(), N, 101);
        return Leg{std::move(f), std::move(s), std::move(x)};
    }();
    return leg;
}

SimulationOptions options(std::uint64_t seed) {
    SimulationOptions o;
    o.horizon = T;
    o.dt = 1e-3;
    o.record_stride = std::numeric_limits<std::size_t>::max();
    o.seed = seed;
    return o;
}

CostReport first_cost(const ControlPolicy& p, PathEnsemble* keep = nullptr) {
    const Leg& leg = first_leg();
    PathEnsemble ens = simulate_reversed(kQuad, leg.score, p, leg.start, options(7));
    const CostReport r = expected_cost_reversed(ens, leg.score, leg.field, kGibbs, 1e-3);
    if (keep != nullptr) *keep = std::move(ens);
    return r;
}

bool within(double value, double target, double se) {
    return std::abs(value - target) <= std::max(0.01 * std::abs(target), 3.0 * se);
}

}  // namespace

TEST_CASE("zero control costs the initial entropy") {
    const CostReport r = first_cost(ControlPolicy::zero());
    CHECK(r.energy_term == 0.0);
    CHECK(within(r.total, oracle::ou_entropy(1.0, 1.0, 0.0), r.std_error));
}

TEST_CASE("optimal control costs the terminal entropy") {
    PathEnsemble ens;
    const CostReport r = first_cost(ControlPolicy::score_optimal(), &ens);
    CHECK(within(r.total, oracle::ou_entropy(1.0, 1.0, T), r.std_error));
    CHECK(r.reference_entropy == doctest::Approx(oracle::ou_entropy(1.0, 1.0, T)).epsilon(1e-3));
    CHECK_FALSE(r.clip_flagged);
    const GapReport g = suboptimality_gap(ens, r, ControlPolicy::score_optimal());
    CHECK(g.predicted == 0.0);
    CHECK(std::abs(g.measured) <= std::max(0.01 * r.reference_entropy, 3.0 * g.combined_se()));
    const EntropicDecomposition d = entropic_decomposition(ens, r, kGibbs, kBins);
    CHECK(within(d.h_term + d.d_term, oracle::ou_entropy(1.0, 1.0, T), r.std_error));
    CHECK(d.d_term >= -0.01);
}

TEST_CASE("constant perturbation gap") {
    PathEnsemble ens;
    const ControlPolicy p = ControlPolicy::constant_shift(0.5);
    const CostReport r = first_cost(p, &ens);
    const GapReport g = suboptimality_gap(ens, r, p);
    CHECK(g.predicted == doctest::Approx(0.5 * 0.25 * T).epsilon(1e-9));
    CHECK(std::abs(g.measured - g.predicted) <= 3.0 * g.combined_se());
    CHECK(r.total >= r.reference_entropy - 3.0 * r.std_error);
    CHECK(entropic_decomposition(ens, r, kGibbs, kBins).d_term >= -0.01);
}

TEST_CASE("sine perturbation gap is self-consistent") {
    PathEnsemble ens;
    const ControlPolicy p = ControlPolicy::sine_shift(0.3);
    const CostReport r = first_cost(p, &ens);
    const GapReport g = suboptimality_gap(ens, r, p);
    CHECK(g.predicted > 0.0);
    CHECK(std::abs(g.measured - g.predicted) <= 3.0 * g.combined_se());
}

TEST_CASE("zero control decomposes trivially") {
    PathEnsemble ens;
    const CostReport r = first_cost(ControlPolicy::zero(), &ens);
    const EntropicDecomposition d = entropic_decomposition(ens, r, kGibbs, kBins);
    CHECK(d.d_term == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.h_term == doctest::Approx(r.total).epsilon(1e-12));
}

TEST_CASE("unbounded perturbations are refused") {
    PathEnsemble ens;
    const ControlPolicy p = ControlPolicy::constant_shift(0.5);
    const CostReport r = first_cost(p, &ens);
    ControlPolicy loose = p;
    loose.bound = 20.0;
    CHECK_THROWS_AS(suboptimality_gap(ens, r, loose), ConfigError);
}

TEST_CASE("second stage optimal and zero costs") {
    FokkerPlanckOptions o;
    o.horizon = 2.0 * T;
    o.dt = 1e-3;
    const DensityField f = solve_fokker_planck(kQuad, gaussian_slice(kGrid, 1.0, 1.0), kGrid, o);
    const LambdaField lf = build_lambda(f, kGibbs, T);
    const auto start = sample_from_slice(kGrid, f.back(), N, 202);
    const PathEnsemble opt = simulate_second_forward(kQuad, lf, ControlPolicy::lambda_optimal(), start, options(8));
    const CostReport r = expected_cost_second(opt, lf, f, kGibbs);
    CHECK(within(r.total, oracle::ou_entropy(1.0, 1.0, 2.0 * T), r.std_error));

    const PathEnsemble zero = simulate_second_forward(kQuad, lf, ControlPolicy::zero(), start, options(8));
    const CostReport z = expected_cost_second(zero, lf, f, kGibbs);
    CHECK(within(z.total, oracle::ou_entropy(1.0, 1.0, T), z.std_error));
}

TEST_CASE("stationary start costs nothing at the optimum") {
    FokkerPlanckOptions o;
    o.horizon = T;
    o.dt = 1e-3;
    const std::vector<double> q(kGibbs.density_nodes().begin(), kGibbs.density_nodes().end());
    const DensityField f = solve_fokker_planck(kQuad, q, kGrid, o);
    const ScoreField sf = build_score(f, kGibbs);
    const auto start = sample_from_slice(kGrid, f.back(), 10000, 3);
    const PathEnsemble opt = simulate_reversed(kQuad, sf, ControlPolicy::score_optimal(), start, options(3));
    const CostReport r = expected_cost_reversed(opt, sf, f, kGibbs, 0.0);
    CHECK(std::abs(r.total) <= 1e-10);
    const PathEnsemble pert = simulate_reversed(kQuad, sf, ControlPolicy::sine_shift(0.5), start, options(3));
    const CostReport p = expected_cost_reversed(pert, sf, f, kGibbs, 0.0);
    CHECK(p.total >= -3.0 * p.std_error);
}

TEST_CASE("ensembles without accumulators are rejected") {
    const Leg& leg = first_leg();
    PathEnsemble bare;
    bare.particles = 3;
    bare.times = {0.0};
    bare.states = {0.0, 0.1, 0.2};
    bare.log_weight = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(expected_cost_reversed(bare, leg.score, leg.field, kGibbs, 0.0), ConfigError);
}
