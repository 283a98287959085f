#include <doctest.h>

#include <cmath>
#include <vector>

#include "entroflow/error.hpp"
#include "entroflow/fokker_planck.hpp"
#include "entroflow/potential.hpp"
#include "oracles.hpp"

using namespace entroflow;

namespace {
// Double-well normalizing constant on [-3, 3], a = 1, from a 2^16-interval
// Simpson rule (tests/oracles.hpp) and confirmed by 30-digit adaptive quadrature.
constexpr double kDoubleWellZ = 1.4109147031962089;
}  // namespace

TEST_CASE("builtin families") {
    const Potential zero = builtin_potential("zero", {});
    CHECK(zero.evaluate(3.0) == 0.0);
    CHECK(zero.grad(-2.0) == 0.0);
    CHECK(zero.is_zero());

    const Potential quad = builtin_potential("quadratic", {});
    CHECK(quad.evaluate(1.0) == doctest::Approx(0.5));
    CHECK(quad.grad(1.0) == doctest::Approx(1.0));
    REQUIRE(quad.hessian_lower_bound);
    CHECK(*quad.hessian_lower_bound == 1.0);

    const std::vector<double> a{1.0};
    const Potential dw = builtin_potential("double_well", a);
    CHECK(dw.evaluate(0.0) == doctest::Approx(1.0));
    CHECK(dw.grad(0.0) == 0.0);
    CHECK(dw.grad(1.0) == doctest::Approx(0.0));
    CHECK(dw.grad(-1.0) == doctest::Approx(0.0));
    CHECK_FALSE(dw.hessian_lower_bound);

    const std::vector<double> c{1.0, 0.0, 0.0, 0.0, 0.25};
    const Potential poly = builtin_potential("polynomial", c);
    CHECK(poly.evaluate(2.0) == doctest::Approx(5.0));
    CHECK(poly.grad(2.0) == doctest::Approx(8.0));
}

TEST_CASE("gradients agree with finite differences") {
    const std::vector<double> a{1.3};
    for (const Potential& p : {builtin_potential("quadratic", std::vector<double>{2.0}),
                               builtin_potential("double_well", a)}) {
        for (double x : {-2.1, -0.4, 0.3, 1.7}) {
            const double h = 1e-6;
            const double fd = (p.evaluate(x + h) - p.evaluate(x - h)) / (2.0 * h);
            CHECK(p.grad(x) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("invalid potential parameters") {
    CHECK_THROWS_AS(builtin_potential("cubic_well", {}), ConfigError);
    CHECK_THROWS_AS(builtin_potential("double_well", std::vector<double>{-1.0}), ConfigError);
    CHECK_THROWS_AS(builtin_potential("double_well", {}), ConfigError);
    CHECK_THROWS_AS(builtin_potential("quadratic", std::vector<double>{1.0, 2.0}), ConfigError);
}

TEST_CASE("Gaussian normalizing constant") {
    const GibbsMeasure q = gibbs_measure(builtin_potential("quadratic", {}), Interval{-8.0, 8.0}, 4096);
    REQUIRE(q.finite());
    const long double z = oracle::simpson([](long double x) { return std::exp(-x * x); }, -8.0L, 8.0L, 1L << 16);
    CHECK(std::abs(q.normalizing_constant() - std::sqrt(M_PI)) / std::sqrt(M_PI) <= 1e-8);
    CHECK(std::abs(static_cast<double>(z) - std::sqrt(M_PI)) <= 1e-12);
    CHECK(q.probability(0.0, 8.0) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("double-well normalizing constant baseline") {
    const long double z =
        oracle::simpson([](long double x) { return std::exp(-2.0L * (x * x - 1) * (x * x - 1)); }, -3.0L, 3.0L,
                        1L << 16);
    CHECK(static_cast<double>(z) == doctest::Approx(kDoubleWellZ).epsilon(1e-12));
    const GibbsMeasure q = gibbs_measure(builtin_potential("double_well", std::vector<double>{1.0}),
                                         Interval{-3.0, 3.0}, 1024);
    CHECK(q.normalizing_constant() == doctest::Approx(kDoubleWellZ).epsilon(1e-5));
    CHECK(q.probability(0.0, 3.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("zero potential has an infinite Gibbs measure") {
    const GibbsMeasure q = gibbs_measure(builtin_potential("zero", {}), Interval{-5.0, 5.0}, 256);
    CHECK_FALSE(q.finite());
    CHECK(q.density_unnormalized(1.7) == 1.0);
    CHECK_THROWS_AS(q.normalizing_constant(), ConfigError);
    CHECK_THROWS_AS(q.density(0.0), ConfigError);
}

TEST_CASE("overflowing Gibbs weight is reported") {
    const std::vector<double> c{-500.0};
    CHECK_THROWS_AS(gibbs_measure(builtin_potential("polynomial", c), Interval{-1.0, 1.0}, 64), NumericError);
}

TEST_CASE("admissibility reports") {
    const Grid g(Interval{-8.0, 8.0}, 1024);
    const Potential quad = builtin_potential("quadratic", {});
    const auto p0 = gaussian_slice(g, 1.0, 1.0);
    const AdmissibilityReport r = check_admissibility(quad, g, p0, 0.0, 0.0);
    CHECK(r.coercivity_margin >= 0.0);
    CHECK(r.coercivity_pass);
    CHECK(r.second_moment == doctest::Approx(2.0).epsilon(5e-4));
    REQUIRE(r.relative_entropy);
    CHECK(std::abs(*r.relative_entropy - oracle::gaussian_kl(1.0, 1.0)) <= 1e-3);
    CHECK(r.pass());

    const AdmissibilityReport z = check_admissibility(builtin_potential("zero", {}), g, p0, 0.0, 0.0);
    CHECK(z.coercivity_margin == 0.0);
    CHECK(z.coercivity_pass);
    CHECK_FALSE(z.relative_entropy);
}
