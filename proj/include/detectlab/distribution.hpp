// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * Dense next-token distributions and the divergence measures used to
 * compare them. Every quantity is in nats.
 *
 * A TokenDistribution is a dense probability vector over the augmented
 * vocabulary (content tokens plus EOS). Truncated distributions keep exact
 * zeros, so support checks are plain `> 0` tests.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "detectlab/errors.hpp"

namespace detectlab {

using TokenId = std::uint32_t;

inline constexpr double kNormTolerance = 1e-9;

class Vocabulary {
public:
    Vocabulary() = default;

    Vocabulary(std::vector<std::string> tokens, TokenId bos_id, TokenId eos_id, TokenId unk_id)
        : tokens_(std::move(tokens)), bos_(bos_id), eos_(eos_id), unk_(unk_id) {
        if (bos_ >= tokens_.size() || eos_ >= tokens_.size() || unk_ >= tokens_.size()) {
            throw DataError("vocabulary special id out of range");
        }
        if (bos_ == eos_) {
            throw DataError("vocabulary bos_id must differ from eos_id");
        }
        index_.reserve(tokens_.size());
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
                throw DataError("duplicate vocabulary token: " + tokens_[i]);
            }
        }
    }

    std::size_t size() const noexcept { return tokens_.size(); }
    TokenId bos_id() const noexcept { return bos_; }
    TokenId eos_id() const noexcept { return eos_; }
    TokenId unk_id() const noexcept { return unk_; }

    const std::string& token(TokenId id) const { return tokens_.at(id); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    // Unknown strings map to the UNK id.
    TokenId id_of(const std::string& tok) const {
        auto it = index_.find(tok);
        return it == index_.end() ? unk_ : it->second;
    }
    bool contains(const std::string& tok) const { return index_.count(tok) != 0; }

    // FNV-1a over the token list and special ids; equal iff the vocabularies agree.
    std::string fingerprint() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](unsigned char c) {
            h ^= c;
            h *= 1099511628211ULL;
        };
        for (const auto& t : tokens_) {
            for (unsigned char c : t) mix(c);
            mix(0xff);
        }
        for (TokenId id : {bos_, eos_, unk_}) {
            for (int s = 0; s < 32; s += 8) mix(static_cast<unsigned char>(id >> s));
        }
        static constexpr char kHex[] = "0123456789abcdef";
        std::string out(16, '0');
        for (int i = 15; i >= 0; --i) {
            out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
            h >>= 4;
        }
        return out;
    }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.tokens_ == b.tokens_ && a.bos_ == b.bos_ && a.eos_ == b.eos_ && a.unk_ == b.unk_;
    }

private:
    std::vector<std::string> tokens_;
    TokenId bos_ = 0;
    TokenId eos_ = 1;
    TokenId unk_ = 2;
    std::unordered_map<std::string, TokenId> index_;
};

class TokenDistribution {
public:
    TokenDistribution() = default;

    // Validates: non-empty, non-negative, sums to 1 within kNormTolerance.
    explicit TokenDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.empty()) throw DataError("distribution must be non-empty");
        double total = 0.0;
        for (double p : probs_) {
            if (!(p >= 0.0) || !std::isfinite(p)) throw DataError("distribution entry is negative or not finite");
            total += p;
        }
        if (std::abs(total - 1.0) > kNormTolerance) {
            throw DataError("distribution does not sum to 1 (sum=" + std::to_string(total) + ")");
        }
    }

    // Renormalizes non-negative weights; zero weights stay exact zeros.
    static TokenDistribution from_weights(std::vector<double> weights) {
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("weight is negative or not finite");
            total += w;
        }
        if (!(total > 0.0)) throw DataError("weights have no positive mass");
        for (double& w : weights) w /= total;
        return TokenDistribution(std::move(weights));
    }

    static TokenDistribution uniform(std::size_t n) { return TokenDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n))); }

    static TokenDistribution one_hot(std::size_t n, TokenId at) {
        std::vector<double> v(n, 0.0);
        v.at(at) = 1.0;
        return TokenDistribution(std::move(v));
    }

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t i) const noexcept { return probs_[i]; }
    std::span<const double> probs() const noexcept { return probs_; }
    const std::vector<double>& vec() const noexcept { return probs_; }

    std::size_t support_size() const noexcept {
        return static_cast<std::size_t>(std::count_if(probs_.begin(), probs_.end(), [](double p) { return p > 0.0; }));
    }
    bool full_support() const noexcept { return support_size() == probs_.size(); }

    // Lowest id among the most probable tokens.
    TokenId argmax() const noexcept {
        return static_cast<TokenId>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
    }

    friend bool operator==(const TokenDistribution&, const TokenDistribution&) = default;

private:
    std::vector<double> probs_;
};

struct SmoothingConfig {
    double epsilon = 1e-10;
};

inline double entropy(const TokenDistribution& d) {
    double h = 0.0;
    for (double p : d.probs()) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

// p_eps = (p + eps) / (1 + |V| eps)
inline TokenDistribution smooth(const TokenDistribution& d, SmoothingConfig cfg = {}) {
    if (!(cfg.epsilon > 0.0)) throw ParameterError("smoothing epsilon must be > 0");
    const double denom = 1.0 + static_cast<double>(d.size()) * cfg.epsilon;
    std::vector<double> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = (d[i] + cfg.epsilon) / denom;
    return TokenDistribution(std::move(out));
}

namespace detail {

inline void require_same_size(const TokenDistribution& p, const TokenDistribution& q) {
    if (p.size() != q.size()) {
        throw DimensionError("distribution sizes differ: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
    }
}

inline void require_support(const TokenDistribution& p, const TokenDistribution& q) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0 && !(q[i] > 0.0)) {
            throw SupportError("support mismatch at token " + std::to_string(i) + ": smooth q first");
        }
    }
}

}  // namespace detail

inline double tv_distance(const TokenDistribution& p, const TokenDistribution& q) {
    detail::require_same_size(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

inline double l2_distance(const TokenDistribution& p, const TokenDistribution& q) {
    detail::require_same_size(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - q[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// -sum p log q; requires support(p) within support(q).
inline double cross_entropy(const TokenDistribution& p, const TokenDistribution& q) {
    detail::require_same_size(p, q);
    detail::require_support(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) s -= p[i] * std::log(q[i]);
    }
    return s;
}

inline double kl_divergence(const TokenDistribution& p, const TokenDistribution& q) {
    detail::require_same_size(p, q);
    detail::require_support(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) s += p[i] * (std::log(p[i]) - std::log(q[i]));
    }
    // Rounding can leave a tiny negative value for p == q.
    return std::max(s, 0.0);
}

// D_alpha = log(sum p^alpha q^(1-alpha)) / (alpha - 1), alpha > 0 and != 1.
inline double renyi_divergence(const TokenDistribution& p, const TokenDistribution& q, double alpha) {
    if (!(alpha > 0.0) || alpha == 1.0 || !std::isfinite(alpha)) {
        throw ParameterError("renyi alpha must be > 0 and != 1");
    }
    detail::require_same_size(p, q);
    detail::require_support(p, q);
    // log-sum-exp over the support of p for stability at extreme alpha.
    std::vector<double> terms;
    terms.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) terms.push_back(alpha * std::log(p[i]) + (1.0 - alpha) * std::log(q[i]));
    }
    const double m = *std::max_element(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    const double d = (m + std::log(s)) / (alpha - 1.0);
    return std::max(d, 0.0);
}

}  // namespace detectlab
