#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ammfg {

// Counter-based random streams built on the splitmix64 finalizer.
//
// Every logical entity (Monte Carlo path, particle, (repetition, player)
// pair) gets its own stream keyed by (seed, stream, substream). Draw i of a
// stream is a pure function of the key and i, so results are identical under
// any parallel schedule and streams can be created in any order.

inline constexpr std::uint64_t kGolden64 = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Key derivation for nested stream ids.
inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream,
                                std::uint64_t substream = 0) {
    std::uint64_t k = mix64(seed + kGolden64);
    k = mix64(k ^ (stream + 2 * kGolden64));
    k = mix64(k ^ (substream + 3 * kGolden64));
    return k;
}

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0,
                          std::uint64_t substream = 0)
        : key_(derive_key(seed, stream, substream)) {}

    std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden64); }

    // Uniform on (0, 1]; never returns 0 so log() stays finite.
    double uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (portable across libstdc++ versions,
    // unlike std::normal_distribution).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace ammfg
