#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace specklegi {

/// SplitMix64 finalizer. Stateless bit mixer used for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent substream seed from (master, stream, index).
/// Counter-based: the result depends only on the arguments, so per-frame
/// streams can be created in any order (or in parallel) and still match a
/// sequential run bit for bit.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept {
    std::uint64_t z = mix64(master ^ (0xa0761d6478bd642fULL * (stream + 1)));
    return mix64(z ^ (0xe7037ed1a0b428dbULL * (index + 1)));
}

/// xoshiro256++ engine with the distribution samplers used by the simulator.
/// All samplers are implemented here (not std::<random>) so that sequences
/// are identical across standard libraries and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept {
        // expand the seed with splitmix64; all-zero state is impossible
        std::uint64_t s = seed;
        for (auto& w : state_) {
            s += 0x9e3779b97f4a7c15ULL;
            w = mix64(s);
        }
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double uniform_pos() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal deviate (Marsaglia polar method, one value cached).
    double normal() noexcept {
        if (have_cache_) {
            have_cache_ = false;
            return cache_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        cache_ = v * f;
        have_cache_ = true;
        return u * f;
    }

    /// Exponential deviate with the given mean.
    double exponential(double mean) noexcept { return -mean * std::log(uniform_pos()); }

    /// Gamma(shape, scale 1) deviate for shape >= 1 (Marsaglia-Tsang).
    double gamma(double shape) {
        if (!(shape >= 1.0))
            throw std::invalid_argument("Rng::gamma: shape must be >= 1");
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_pos();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    double cache_ = 0.0;
    bool have_cache_ = false;
};

}  // namespace specklegi
