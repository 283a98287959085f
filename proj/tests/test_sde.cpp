#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "entroflow/error.hpp"
#include "entroflow/fokker_planck.hpp"
#include "entroflow/parallel.hpp"
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

const DensityField& ou_field() {
    static const DensityField f = [] {
        FokkerPlanckOptions o;
        o.horizon = 3.0 * T;
        o.dt = 1e-3;
        return solve_fokker_planck(kQuad, gaussian_slice(kGrid, 1.0, 1.0), kGrid, o);
    }();
    return f;
}

SimulationOptions options(double horizon, std::uint64_t seed) {
    SimulationOptions o;
    o.horizon = horizon;
    o.dt = 1e-3;
    o.record_stride = 50;
    o.seed = seed;
    return o;
}

double sample_mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
    const double m = sample_mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

double tv_to(const PathEnsemble& ens, double t, std::span<const double> slice) {
    return histogram_tv(empirical_marginal(ens, t, kBins), bin_masses(kGrid, slice, kBins));
}

}  // namespace

TEST_CASE("Brownian motion variance") {
    const std::vector<double> x0(100000, 0.0);
    const PathEnsemble ens = simulate_forward(builtin_potential("zero", {}), x0, options(1.0, 3));
    CHECK(std::abs(sample_variance(ens.final_states()) - 1.0) <= 0.02);
    for (double w : ens.final_log_weights()) CHECK(w == 0.0);
}

TEST_CASE("noise-free gradient flow") {
    SimulationOptions o = options(1.0, 1);
    o.noise = false;
    const PathEnsemble ens = simulate_forward(kQuad, std::vector<double>{1.0}, o);
    CHECK(std::abs(ens.final_states()[0] - std::exp(-1.0)) <= 1e-3);
}

TEST_CASE("OU ensemble moments") {
    const auto x0 = sample_gaussian(1.0, 1.0, 100000, 5);
    const PathEnsemble ens = simulate_forward(kQuad, x0, options(T, 5));
    CHECK(std::abs(sample_mean(ens.final_states()) - oracle::ou_mean(1.0, T)) <= 0.01);
    CHECK(std::abs(sample_variance(ens.final_states()) - oracle::ou_variance(1.0, T)) <= 0.02);
    CHECK(ens.times.size() == 11);
    CHECK(ens.states_at(0.25).size() == 100000);
}

TEST_CASE("inverse-CDF sampling reproduces the slice") {
    const auto p = gaussian_slice(kGrid, 1.0, 1.0);
    const auto x = sample_from_slice(kGrid, p, 100000, 9);
    CHECK(std::abs(sample_mean(x) - 1.0) <= 0.02);
    CHECK(std::abs(sample_variance(x) - 1.0) <= 0.03);
}

TEST_CASE("reversed dynamics without control retrace the flow") {
    const DensityField& f = ou_field();
    const ScoreField sf = build_score(f, kGibbs);
    const auto start = sample_from_slice(kGrid, f.at(T), 100000, 21);
    const PathEnsemble ens = simulate_reversed(kQuad, sf, ControlPolicy::zero(), start, options(T, 21));
    CHECK(tv_to(ens, 0.5 * T, f.at(0.5 * T)) <= 0.02);
    CHECK(tv_to(ens, T, f.at(0.0)) <= 0.02);
    for (double w : ens.final_log_weights()) CHECK(w == 0.0);
}

TEST_CASE("optimally controlled reversal continues the flow") {
    const DensityField& f = ou_field();
    const ScoreField sf = build_score(f, kGibbs);
    const auto start = sample_from_slice(kGrid, f.at(T), 100000, 22);
    const PathEnsemble ens = simulate_reversed(kQuad, sf, ControlPolicy::score_optimal(), start, options(T, 22));
    CHECK(tv_to(ens, 0.25, f.at(T + 0.25)) <= 0.02);
    CHECK(tv_to(ens, 0.5, f.at(T + 0.5)) <= 0.02);
}

TEST_CASE("second stage marginals") {
    const DensityField& f = ou_field();
    const LambdaField lf = build_lambda(f, kGibbs, T);
    const auto start = sample_from_slice(kGrid, f.at(2.0 * T), 100000, 23);

    const PathEnsemble opt =
        simulate_second_forward(kQuad, lf, ControlPolicy::lambda_optimal(), start, options(T, 23));
    CHECK(tv_to(opt, 0.5 * T, f.at(2.0 * T + 0.5 * T)) <= 0.02);
    CHECK(tv_to(opt, T, f.at(3.0 * T)) <= 0.02);

    const PathEnsemble zero = simulate_second_forward(kQuad, lf, ControlPolicy::zero(), start, options(T, 23));
    CHECK(tv_to(zero, 0.5 * T, f.at(1.5 * T)) <= 0.02);
    CHECK(tv_to(zero, T, f.at(T)) <= 0.02);
    for (double w : zero.final_log_weights()) CHECK(w == 0.0);
}

TEST_CASE("stage and policy mismatches are rejected") {
    const DensityField& f = ou_field();
    const ScoreField sf = build_score(f, kGibbs);
    const LambdaField lf = build_lambda(f, kGibbs, T);
    const std::vector<double> x{0.0, 1.0};
    CHECK_THROWS_AS(simulate_reversed(kQuad, sf, ControlPolicy::lambda_optimal(), x, options(T, 1)), ConfigError);
    CHECK_THROWS_AS(simulate_second_forward(kQuad, lf, ControlPolicy::score_optimal(), x, options(T, 1)),
                    ConfigError);
}

TEST_CASE("control bound and non-finite values") {
    const DensityField& f = ou_field();
    const ScoreField sf = build_score(f, kGibbs);
    const std::vector<double> x{0.0, 1.0};
    const ControlPolicy wild = ControlPolicy::custom("wild", [](double, double) { return 50.0; });
    CHECK_THROWS_AS(simulate_reversed(kQuad, sf, wild, x, options(T, 1)), ConfigError);
    const ControlPolicy nan =
        ControlPolicy::custom("nan", [](double, double) { return std::numeric_limits<double>::quiet_NaN(); });
    CHECK_THROWS_AS(simulate_reversed(kQuad, sf, nan, x, options(T, 1)), SimulationError);
}

TEST_CASE("results do not depend on the thread count") {
    const DensityField& f = ou_field();
    const ScoreField sf = build_score(f, kGibbs);
    const auto start = sample_from_slice(kGrid, f.at(T), 2000, 4);
    set_thread_limit(1);
    const PathEnsemble a = simulate_reversed(kQuad, sf, ControlPolicy::sine_shift(0.3), start, options(T, 4));
    set_thread_limit(4);
    const PathEnsemble b = simulate_reversed(kQuad, sf, ControlPolicy::sine_shift(0.3), start, options(T, 4));
    set_thread_limit(0);
    CHECK(a.states == b.states);
    CHECK(a.log_weight == b.log_weight);
    CHECK(a.energy == b.energy);
    const PathEnsemble c = simulate_reversed(kQuad, sf, ControlPolicy::sine_shift(0.3), start, options(T, 5));
    CHECK(a.states != c.states);
}

TEST_CASE("empirical marginals") {
    PathEnsemble one;
    one.particles = 1;
    one.times = {0.0};
    one.states = {0.3};
    one.log_weight = {0.0};
    const Histogram h = empirical_marginal(one, 0.0, kBins);
    int nonzero = 0;
    for (double m : h.mass) nonzero += m > 0.0 ? 1 : 0;
    CHECK(nonzero == 1);

    const auto x0 = sample_gaussian(0.0, 1.0, 20000, 8);
    const PathEnsemble ens = simulate_forward(kQuad, x0, options(0.1, 8));
    const Histogram u = empirical_marginal(ens, 0.1, kBins, false);
    const Histogram w = empirical_marginal(ens, 0.1, kBins, true);
    for (std::size_t j = 0; j < u.mass.size(); ++j) CHECK(u.mass[j] == doctest::Approx(w.mass[j]).epsilon(1e-12));
}

TEST_CASE("Brownian marginal at large N") {
    const std::vector<double> x0(1000000, 0.0);
    SimulationOptions o = options(1.0, 77);
    o.dt = 1.0;
    o.record_stride = 1;
    const PathEnsemble ens = simulate_forward(builtin_potential("zero", {}), x0, o);
    const auto ref = gaussian_slice(kGrid, 0.0, 1.0);
    CHECK(tv_to(ens, 1.0, ref) <= 0.01);
}
