#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace transience {

using Rng = std::mt19937_64;

/// Derives an independent, reproducible generator from a master seed and a
/// stream name ("data", "init", "batching", "shuffle", ...). Components seeded
/// from different names can be varied independently without disturbing each
/// other's random sequences.
Rng substream(std::uint64_t master_seed, std::string_view name);

/// Uniform double in [0, 1) with 53 random bits. Does not depend on
/// distribution internals of the standard library, so sequences are
/// identical across platforms.
double uniform01(Rng& rng);

/// Standard normal via Box-Muller (no cached second value).
double gaussian(Rng& rng);

/// Uniform integer in [lo, hi], inclusive. Rejection-sampled, unbiased.
std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);

/// Fisher-Yates shuffle driven by uniform_int (platform-stable order).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace transience
