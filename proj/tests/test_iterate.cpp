#include <doctest.h>

#include <cmath>
#include <vector>

#include "entroflow/error.hpp"
#include "entroflow/fokker_planck.hpp"
#include "entroflow/iterate.hpp"
#include "oracles.hpp"

using namespace entroflow;

namespace {

const Grid kGrid(Interval{-8.0, 8.0}, 1024);
const Potential kQuad = builtin_potential("quadratic", {});
const GibbsMeasure kGibbs = gibbs_measure(kQuad, kGrid.domain(), kGrid.size());

// Double-well trace (a = 1, p0 = N(1, 0.04), T = 1) from the same solver at
// 2048 nodes on [-3, 3]; the 1024-node run must agree to 1e-3.
constexpr double kDoubleWellTrace[5] = {0.86433759896, 0.42559857498, 0.24845891760, 0.15140160924,
                                        0.09395254305};

}  // namespace

TEST_CASE("fixed point at q") {
    IterationOptions o;
    o.stages = 3;
    o.verify_stages.clear();
    o.early_stop = 0.0;
    const std::vector<double> q(kGibbs.density_nodes().begin(), kGibbs.density_nodes().end());
    const IterationResult r = run_iteration(kQuad, kGibbs, q, o);
    REQUIRE(r.stages.size() == 3);
    for (const auto& s : r.stages) {
        CHECK(std::abs(s.entropy) <= 1e-8);
        CHECK(s.tv <= 1e-6);
    }
}

TEST_CASE("OU stages follow the Gaussian closed form") {
    IterationOptions o;
    o.stages = 6;
    o.verify_stages.clear();
    const IterationResult r = run_iteration(kQuad, kGibbs, gaussian_slice(kGrid, 1.0, 1.0), o);
    REQUIRE(r.stages.size() == 6);
    for (std::size_t k = 0; k < 6; ++k) {
        const double exact = oracle::ou_entropy(1.0, 1.0, 0.5 * static_cast<double>(k));
        CHECK(std::abs(r.stages[k].entropy - exact) <= 0.01 * exact);
        CHECK(r.stages[k].direction == (k % 2 == 0 ? "backward" : "forward"));
        if (k > 0) CHECK(r.stages[k].entropy < r.stages[k - 1].entropy);
        CHECK(2.0 * r.stages[k].tv * r.stages[k].tv <= r.stages[k].entropy);
    }
}

TEST_CASE("verified stages reproduce the next entropy") {
    IterationOptions o;
    o.stages = 2;
    o.verify_stages = {0, 1};
    o.particles = 30000;
    const IterationResult r = run_iteration(kQuad, kGibbs, gaussian_slice(kGrid, 1.0, 1.0), o);
    for (const auto& s : r.stages) {
        REQUIRE(s.cost);
        CHECK(std::abs(*s.cost - s.next_entropy) <= std::max(0.01 * s.next_entropy, 3.0 * *s.cost_se));
    }
}

TEST_CASE("double-well trace decreases") {
    const Grid g(Interval{-3.0, 3.0}, 1024);
    const Potential dw = builtin_potential("double_well", std::vector<double>{1.0});
    const GibbsMeasure q = gibbs_measure(dw, g.domain(), g.size());
    IterationOptions o;
    o.stage_horizon = 1.0;
    o.stages = 5;
    o.verify_stages.clear();
    const IterationResult r = run_iteration(dw, q, gaussian_slice(g, 1.0, 0.04), o);
    REQUIRE(r.stages.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(r.stages[k].entropy == doctest::Approx(kDoubleWellTrace[k]).epsilon(1e-3));
        if (k > 0) {
            CHECK(r.stages[k].entropy < r.stages[k - 1].entropy);
            CHECK(r.stages[k].tv < r.stages[k - 1].tv);
        }
    }
}

TEST_CASE("early stop") {
    IterationOptions o;
    o.stages = 10;
    o.stage_horizon = 2.0;
    o.dt = 1e-2;
    o.verify_stages.clear();
    o.early_stop = 1e-6;
    const IterationResult r = run_iteration(kQuad, kGibbs, gaussian_slice(kGrid, 1.0, 1.0), o);
    CHECK(r.stopped_early);
    CHECK(r.stages.size() < 10);
    CHECK(r.stages.back().entropy < 1e-6);
}

TEST_CASE("single stage and invalid options") {
    IterationOptions o;
    o.stages = 1;
    o.verify_stages.clear();
    CHECK(run_iteration(kQuad, kGibbs, gaussian_slice(kGrid, 1.0, 1.0), o).stages.size() == 1);
    o.stages = 0;
    CHECK_THROWS_AS(run_iteration(kQuad, kGibbs, gaussian_slice(kGrid, 1.0, 1.0), o), ConfigError);
}

TEST_CASE("occupation of the whole domain and of a half line") {
    OccupationOptions o;
    o.horizon = 100.0;
    o.trajectories = 4;
    const Occupation all = ergodic_occupation(kQuad, kGibbs, Interval{-8.0, 8.0}, o);
    CHECK(all.fraction == 1.0);
    CHECK(all.gibbs_probability == doctest::Approx(1.0).epsilon(1e-12));

    o.horizon = 1e4;
    o.trajectories = 16;
    const Occupation half = ergodic_occupation(kQuad, kGibbs, Interval{0.0, 8.0}, o);
    CHECK(half.gibbs_probability == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(half.fraction - 0.5) <= 0.01);
}

TEST_CASE("double-well occupation") {
    const Grid g(Interval{-3.0, 3.0}, 1024);
    const Potential dw = builtin_potential("double_well", std::vector<double>{1.0});
    const GibbsMeasure q = gibbs_measure(dw, g.domain(), g.size());
    OccupationOptions o;
    o.horizon = 1e4;
    o.trajectories = 16;
    o.seed = 5;
    const Occupation r = ergodic_occupation(dw, q, Interval{0.0, 3.0}, o);
    CHECK(r.gibbs_probability == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(r.fraction - 0.5) <= 0.02);
}
