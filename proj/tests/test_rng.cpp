#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "entroflow/rng.hpp"

using namespace entroflow;

TEST_CASE("Philox4x32-10 known-answer vectors") {
    const Philox4x32 zero({0u, 0u});
    const auto a = zero({0u, 0u, 0u, 0u});
    CHECK(a[0] == 0x6627e8d5u);
    CHECK(a[1] == 0xe169c58du);
    CHECK(a[2] == 0xbc57ac4cu);
    CHECK(a[3] == 0x9b00dbd8u);

    const Philox4x32 ones({0xffffffffu, 0xffffffffu});
    const auto b = ones({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu});
    CHECK(b[0] == 0x408f276du);
    CHECK(b[1] == 0x41c83b0eu);
    CHECK(b[2] == 0xa20bc7c6u);
    CHECK(b[3] == 0x6d5451fdu);

    const Philox4x32 pi({0xa4093822u, 0x299f31d0u});
    const auto c = pi({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u});
    CHECK(c[0] == 0xd16cfe09u);
    CHECK(c[1] == 0x94fdccebu);
    CHECK(c[2] == 0x5001e420u);
    CHECK(c[3] == 0x24126ea1u);
}

TEST_CASE("draws are pure functions of (seed, tag, particle, step)") {
    const NoiseStreams a(42, StreamTag::forward_noise);
    const NoiseStreams b(42, StreamTag::forward_noise);
    for (std::uint64_t i = 0; i < 10; ++i) CHECK(a.normal(i, 7) == b.normal(i, 7));
    CHECK(a.normal(3, 5) != a.normal(5, 3));
    CHECK(a.normal(0, 0) != NoiseStreams(43, StreamTag::forward_noise).normal(0, 0));
}

TEST_CASE("uniforms lie in (0, 1]") {
    const NoiseStreams s(1, StreamTag::initial_sample);
    for (std::uint64_t i = 0; i < 10000; ++i) {
        const auto u = s.uniforms(i, 0);
        CHECK(u[0] > 0.0);
        CHECK(u[0] <= 1.0);
        CHECK(u[1] > 0.0);
        CHECK(u[1] <= 1.0);
    }
}

TEST_CASE("normal moments") {
    const NoiseStreams s(2024, StreamTag::reversed_noise);
    const std::size_t n = 200000;
    double m1 = 0.0, m2 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = s.normal(i, 11);
        m1 += z;
        m2 += z * z;
        m4 += z * z * z * z;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    CHECK(std::abs(m1) <= 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(m2 - 1.0) <= 4.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(m4 - 3.0) <= 4.0 * std::sqrt(96.0 / n));
}

TEST_CASE("streams with different tags are uncorrelated") {
    const NoiseStreams a(9, StreamTag::forward_noise);
    const NoiseStreams b(9, StreamTag::second_noise);
    const std::size_t n = 100000;
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += a.normal(i, 0) * b.normal(i, 0);
    CHECK(std::abs(c / n) <= 4.0 / std::sqrt(static_cast<double>(n)));

    double lag = 0.0;
    for (std::size_t k = 0; k < n; ++k) lag += a.normal(0, k) * a.normal(0, k + 1);
    CHECK(std::abs(lag / n) <= 4.0 / std::sqrt(static_cast<double>(n)));
}
