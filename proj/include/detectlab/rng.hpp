// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * Portable seeded randomness.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the C++
 * standard. Uniform doubles take the top 53 bits of one draw, and token
 * sampling is inverse-CDF over the dense vector summed in index order, so
 * sampled corpora do not depend on the standard library implementation.
 *
 * Stream splitting: a child stream for key K under base seed S is seeded
 * with S ^ fnv1a64(K).
 */

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "detectlab/distribution.hpp"

namespace detectlab {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view key) { return base ^ fnv1a64(key); }

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

// Cumulative table for repeated draws from one distribution.
class CategoricalSampler {
public:
    explicit CategoricalSampler(const TokenDistribution& d) : cdf_(d.size()) {
        double cum = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            cum += d[i];
            cdf_[i] = cum;
            if (d[i] > 0.0) last_positive_ = static_cast<TokenId>(i);
        }
    }

    // First index whose cumulative mass exceeds u; never a zero-probability id.
    TokenId operator()(Rng& rng) const {
        const double u = rng.uniform();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.end()) return last_positive_;
        return static_cast<TokenId>(it - cdf_.begin());
    }

private:
    std::vector<double> cdf_;
    TokenId last_positive_ = 0;
};

inline TokenId sample_token(const TokenDistribution& d, Rng& rng) { return CategoricalSampler(d)(rng); }

}  // namespace detectlab
