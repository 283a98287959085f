#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace entroflow {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Every draw is a pure function of (key, counter), so streams can be indexed
/// by particle and step and evaluated in any order or on any thread.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit constexpr Philox4x32(Key key) : key_(key) {}

    constexpr Counter operator()(Counter ctr) const {
        Key key = key_;
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Counter single_round(const Counter& c, const Key& k) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }

    Key key_;
};

/// splitmix64 finalizer; used to derive independent keys from (seed, stream tag).
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Purposes that must never share random numbers under the same master seed.
enum class StreamTag : std::uint64_t {
    forward_noise = 1,
    reversed_noise = 2,
    second_noise = 3,
    initial_sample = 4,
    ergodic_noise = 5,
    martingale_noise = 6,
};

/// Indexed normal/uniform draws for (particle, step) pairs under one master seed.
class NoiseStreams {
public:
    NoiseStreams(std::uint64_t seed, StreamTag tag) : gen_(make_key(seed, tag)) {}

    /// Two uniforms in (0, 1] from the 64-bit halves of one block.
    std::array<double, 2> uniforms(std::uint64_t particle, std::uint64_t step) const {
        const auto out = gen_({static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                               static_cast<std::uint32_t>(particle), static_cast<std::uint32_t>(particle >> 32)});
        const std::uint64_t a = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
        const std::uint64_t b = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
        return {to_unit(a), to_unit(b)};
    }

    /// Standard normal via Box-Muller (cosine branch).
    double normal(std::uint64_t particle, std::uint64_t step) const {
        const auto u = uniforms(particle, step);
        return std::sqrt(-2.0 * std::log(u[0])) * std::cos(2.0 * std::numbers::pi * u[1]);
    }

private:
    static Philox4x32::Key make_key(std::uint64_t seed, StreamTag tag) {
        const std::uint64_t k = mix64(seed ^ mix64(static_cast<std::uint64_t>(tag)));
        return {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    }
    // 53 random bits mapped to (0, 1].
    static double to_unit(std::uint64_t bits) {
        return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
    }

    Philox4x32 gen_;
};

}  // namespace entroflow
