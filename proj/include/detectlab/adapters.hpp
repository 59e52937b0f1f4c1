// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * Sampling adapters: pure transforms of a next-token distribution applied
 * before sampling. Truncation adapters (top-k, top-p, typical, eta) pick a
 * kept set and renormalize the base probabilities over it; zero-probability
 * tokens are never re-admitted.
 *
 * Ordering is deterministic: top-k/top-p sort by probability descending,
 * typical by |H + log p| ascending (then probability descending), and all
 * remaining ties go to the lower token id.
 */

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detectlab/distribution.hpp"

namespace detectlab {

enum class AdapterFamily { ancestral, temperature, repetition_penalty, top_k, top_p, typical, eta };

// inverse applies p^(1/T) to repeated tokens, which raises their probability
// for T > 1. penalizing applies p^T.
enum class RepetitionMode { penalizing, inverse };

inline std::string_view family_name(AdapterFamily f) {
    switch (f) {
        case AdapterFamily::ancestral: return "ancestral";
        case AdapterFamily::temperature: return "temperature";
        case AdapterFamily::repetition_penalty: return "repetition_penalty";
        case AdapterFamily::top_k: return "top_k";
        case AdapterFamily::top_p: return "top_p";
        case AdapterFamily::typical: return "typical";
        case AdapterFamily::eta: return "eta";
    }
    return "?";
}

struct AdapterSpec {
    AdapterFamily family = AdapterFamily::ancestral;
    double param = 1.0;
    RepetitionMode rep_mode = RepetitionMode::penalizing;

    static AdapterSpec ancestral() { return {}; }
    static AdapterSpec temperature(double t) { return {AdapterFamily::temperature, t}; }
    static AdapterSpec repetition_penalty(double t, RepetitionMode m = RepetitionMode::penalizing) {
        return {AdapterFamily::repetition_penalty, t, m};
    }
    static AdapterSpec top_k(int k) { return {AdapterFamily::top_k, static_cast<double>(k)}; }
    static AdapterSpec top_p(double p) { return {AdapterFamily::top_p, p}; }
    static AdapterSpec typical(double tau) { return {AdapterFamily::typical, tau}; }
    static AdapterSpec eta(double eps) { return {AdapterFamily::eta, eps}; }

    // Throws ParameterError when the parameter is outside the family's domain.
    void validate() const {
        auto bad = [this](const char* why) {
            throw ParameterError(std::string(family_name(family)) + ": " + why);
        };
        if (!std::isfinite(param)) bad("parameter must be finite");
        switch (family) {
            case AdapterFamily::ancestral: break;
            case AdapterFamily::temperature:
            case AdapterFamily::repetition_penalty:
                if (!(param > 0.0)) bad("parameter must be > 0");
                break;
            case AdapterFamily::top_k:
                if (param < 1.0 || param != std::floor(param)) bad("k must be an integer >= 1");
                break;
            case AdapterFamily::top_p:
            case AdapterFamily::typical:
                if (!(param > 0.0 && param <= 1.0)) bad("parameter must lie in (0, 1]");
                break;
            case AdapterFamily::eta:
                if (!(param > 0.0 && param < 1.0)) bad("epsilon must lie in (0, 1)");
                break;
        }
    }

    friend bool operator==(const AdapterSpec& a, const AdapterSpec& b) {
        if (a.family != b.family) return false;
        if (a.family == AdapterFamily::ancestral) return true;
        if (a.family == AdapterFamily::repetition_penalty && a.rep_mode != b.rep_mode) return false;
        return a.param == b.param;
    }
};

namespace detail {

// Shortest fixed-notation text that parses back to the same double.
inline std::string format_param(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
    return std::string(buf, res.ptr);
}

}  // namespace detail

// `family=value`, e.g. `top_p=0.95`; `ancestral` has no value. The inverse
// repetition mode is written `repetition_penalty=1.1:inverse`.
inline std::string to_string(const AdapterSpec& s) {
    if (s.family == AdapterFamily::ancestral) return "ancestral";
    std::string out(family_name(s.family));
    out += '=';
    if (s.family == AdapterFamily::top_k) {
        out += std::to_string(static_cast<long long>(s.param));
    } else {
        out += detail::format_param(s.param);
    }
    if (s.family == AdapterFamily::repetition_penalty && s.rep_mode == RepetitionMode::inverse) {
        out += ":inverse";
    }
    return out;
}

inline AdapterSpec parse_adapter_spec(std::string_view text) {
    auto fail = [&](const std::string& why) -> AdapterSpec {
        throw ParameterError("bad adapter spec '" + std::string(text) + "': " + why);
    };
    if (text == "ancestral") return AdapterSpec::ancestral();
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) return fail("expected family=value");
    const std::string_view name = text.substr(0, eq);
    std::string_view value = text.substr(eq + 1);

    AdapterSpec spec;
    if (name == "temperature") spec.family = AdapterFamily::temperature;
    else if (name == "repetition_penalty") spec.family = AdapterFamily::repetition_penalty;
    else if (name == "top_k") spec.family = AdapterFamily::top_k;
    else if (name == "top_p") spec.family = AdapterFamily::top_p;
    else if (name == "typical") spec.family = AdapterFamily::typical;
    else if (name == "eta") spec.family = AdapterFamily::eta;
    else return fail("unknown family");

    if (spec.family == AdapterFamily::repetition_penalty) {
        const auto colon = value.find(':');
        if (colon != std::string_view::npos) {
            const auto mode = value.substr(colon + 1);
            if (mode == "inverse") spec.rep_mode = RepetitionMode::inverse;
            else if (mode == "penalizing") spec.rep_mode = RepetitionMode::penalizing;
            else return fail("unknown repetition mode");
            value = value.substr(0, colon);
        }
    }
    const std::string owned(value);
    char* end = nullptr;
    const double v = std::strtod(owned.c_str(), &end);
    if (owned.empty() || end != owned.c_str() + owned.size()) return fail("value is not a number");
    spec.param = v;
    spec.validate();
    return spec;
}

// The 36 tested parameterizations in family-major order, then ancestral: 37 settings.
inline std::vector<AdapterSpec> default_grid() {
    std::vector<AdapterSpec> g;
    for (double t : {0.5, 0.7, 0.9, 1.1, 1.2, 1.3}) g.push_back(AdapterSpec::temperature(t));
    for (double t : {1.05, 1.10, 1.15, 1.20, 1.25, 1.30}) g.push_back(AdapterSpec::repetition_penalty(t));
    for (int k : {10, 20, 50, 75, 100, 1000}) g.push_back(AdapterSpec::top_k(k));
    for (double p : {0.3, 0.5, 0.7, 0.8, 0.9, 0.95}) g.push_back(AdapterSpec::top_p(p));
    for (double tau : {0.3, 0.5, 0.7, 0.8, 0.9, 0.95}) g.push_back(AdapterSpec::typical(tau));
    for (double e : {1e-4, 1e-3, 5e-3, 0.01, 0.05, 0.1}) g.push_back(AdapterSpec::eta(e));
    g.push_back(AdapterSpec::ancestral());
    return g;
}

namespace detail {

// Token ids with positive probability, most probable first, ties by id.
inline std::vector<TokenId> order_by_probability(const TokenDistribution& d) {
    std::vector<TokenId> idx;
    idx.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0.0) idx.push_back(static_cast<TokenId>(i));
    }
    std::sort(idx.begin(), idx.end(), [&d](TokenId a, TokenId b) {
        if (d[a] != d[b]) return d[a] > d[b];
        return a < b;
    });
    return idx;
}

// |H + log p| rounded to a 2^-40 grid so that mathematically equal scores
// computed through different roundings compare equal.
inline double typicality_key(double h, double p) {
    return std::nearbyint(std::abs(h + std::log(p)) * 0x1p40);
}

// Positive-probability ids, closest to the entropy first.
inline std::vector<TokenId> order_by_typicality(const TokenDistribution& d) {
    const double h = entropy(d);
    std::vector<std::pair<double, TokenId>> keyed;
    keyed.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0.0) keyed.emplace_back(typicality_key(h, d[i]), static_cast<TokenId>(i));
    }
    std::sort(keyed.begin(), keyed.end(), [&d](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        if (d[a.second] != d[b.second]) return d[a.second] > d[b.second];
        return a.second < b.second;
    });
    std::vector<TokenId> idx;
    idx.reserve(keyed.size());
    for (const auto& kv : keyed) idx.push_back(kv.second);
    return idx;
}

// Renormalize d over the first `count` ids of `order`.
inline TokenDistribution keep_prefix(const TokenDistribution& d, std::span<const TokenId> order, std::size_t count) {
    count = std::min(count, order.size());
    std::vector<double> out(d.size(), 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < count; ++i) z += d[order[i]];
    for (std::size_t i = 0; i < count; ++i) out[order[i]] = d[order[i]] / z;
    return TokenDistribution(std::move(out));
}

inline constexpr double kMassSlack = 1e-12;

// Length of the shortest prefix of `order` whose mass reaches `target`; a
// cumulative sum within kMassSlack below the target counts as reaching it.
inline std::size_t mass_prefix_length(const TokenDistribution& d, std::span<const TokenId> order, double target) {
    double cum = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        cum += d[order[i]];
        if (cum >= target - kMassSlack) return i + 1;
    }
    return order.size();
}

inline TokenDistribution top_k_with_order(const TokenDistribution& d, std::span<const TokenId> order, int k) {
    return keep_prefix(d, order, static_cast<std::size_t>(k));
}

inline TokenDistribution top_p_with_order(const TokenDistribution& d, std::span<const TokenId> order, double p) {
    return keep_prefix(d, order, mass_prefix_length(d, order, p));
}

inline TokenDistribution typical_with_order(const TokenDistribution& d, std::span<const TokenId> order, double tau) {
    return keep_prefix(d, order, mass_prefix_length(d, order, tau));
}

inline TokenDistribution eta_with_entropy(const TokenDistribution& d, double h, double eps) {
    const double eta = std::min(eps, std::sqrt(eps) * std::exp(-h));
    std::vector<double> out(d.size(), 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > eta) z += d[i];
    }
    if (z == 0.0) return TokenDistribution::one_hot(d.size(), d.argmax());
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > eta) out[i] = d[i] / z;
    }
    return TokenDistribution(std::move(out));
}

}  // namespace detail

inline TokenDistribution apply_temperature(const TokenDistribution& d, double t) {
    AdapterSpec::temperature(t).validate();
    if (t == 1.0) return d;
    const double log_max = std::log(d[d.argmax()]);
    std::vector<double> w(d.size(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0.0) w[i] = std::exp((std::log(d[i]) - log_max) / t);
    }
    return TokenDistribution::from_weights(std::move(w));
}

inline TokenDistribution apply_repetition_penalty(const TokenDistribution& d, std::span<const TokenId> context, double t,
                                                  RepetitionMode mode = RepetitionMode::penalizing) {
    AdapterSpec::repetition_penalty(t, mode).validate();
    if (context.empty() || t == 1.0) return d;
    std::vector<char> seen(d.size(), 0);
    for (TokenId id : context) {
        if (id >= d.size()) throw DimensionError("context token id out of range");
        seen[id] = 1;
    }
    const double exponent = mode == RepetitionMode::penalizing ? t : 1.0 / t;
    std::vector<double> w(d.vec());
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (seen[i] && w[i] > 0.0) w[i] = std::pow(w[i], exponent);
    }
    return TokenDistribution::from_weights(std::move(w));
}

inline TokenDistribution apply_top_k(const TokenDistribution& d, int k) {
    AdapterSpec::top_k(k).validate();
    const auto order = detail::order_by_probability(d);
    return detail::top_k_with_order(d, order, k);
}

inline TokenDistribution apply_top_p(const TokenDistribution& d, double p) {
    AdapterSpec::top_p(p).validate();
    const auto order = detail::order_by_probability(d);
    return detail::top_p_with_order(d, order, p);
}

inline TokenDistribution apply_typical(const TokenDistribution& d, double tau) {
    AdapterSpec::typical(tau).validate();
    const auto order = detail::order_by_typicality(d);
    return detail::typical_with_order(d, order, tau);
}

// Keeps {y : p(y) > min(eps, sqrt(eps) exp(-H))}; falls back to the argmax if empty.
inline TokenDistribution apply_eta(const TokenDistribution& d, double eps) {
    AdapterSpec::eta(eps).validate();
    return detail::eta_with_entropy(d, entropy(d), eps);
}

inline TokenDistribution apply(const AdapterSpec& spec, const TokenDistribution& d, std::span<const TokenId> context = {}) {
    switch (spec.family) {
        case AdapterFamily::ancestral: return d;
        case AdapterFamily::temperature: return apply_temperature(d, spec.param);
        case AdapterFamily::repetition_penalty: return apply_repetition_penalty(d, context, spec.param, spec.rep_mode);
        case AdapterFamily::top_k: return apply_top_k(d, static_cast<int>(spec.param));
        case AdapterFamily::top_p: return apply_top_p(d, spec.param);
        case AdapterFamily::typical: return apply_typical(d, spec.param);
        case AdapterFamily::eta: return apply_eta(d, spec.param);
    }
    throw ParameterError("unknown adapter family");
}

/**
 * Uniform mixture of adapted distributions, (1/N) sum_i adapter_i(d).
 *
 * Orderings and the entropy of `d` are computed once and shared by all
 * members; each member's output is identical to calling apply() on it.
 */
struct MixtureSpec {
    std::vector<AdapterSpec> members;

    static MixtureSpec default_grid() { return {detectlab::default_grid()}; }
};

inline TokenDistribution apply_mixture(const MixtureSpec& mix, const TokenDistribution& d, std::span<const TokenId> context = {}) {
    if (mix.members.empty()) throw ParameterError("mixture needs at least one member");
    std::optional<std::vector<TokenId>> by_prob;
    std::optional<std::vector<TokenId>> by_typ;
    std::optional<double> h;

    std::vector<double> acc(d.size(), 0.0);
    for (const auto& spec : mix.members) {
        spec.validate();
        TokenDistribution out;
        switch (spec.family) {
            case AdapterFamily::top_k:
                if (!by_prob) by_prob = detail::order_by_probability(d);
                out = detail::top_k_with_order(d, *by_prob, static_cast<int>(spec.param));
                break;
            case AdapterFamily::top_p:
                if (!by_prob) by_prob = detail::order_by_probability(d);
                out = detail::top_p_with_order(d, *by_prob, spec.param);
                break;
            case AdapterFamily::typical:
                if (!by_typ) by_typ = detail::order_by_typicality(d);
                out = detail::typical_with_order(d, *by_typ, spec.param);
                break;
            case AdapterFamily::eta:
                if (!h) h = entropy(d);
                out = detail::eta_with_entropy(d, *h, spec.param);
                break;
            default:
                out = apply(spec, d, context);
                break;
        }
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += out[i];
    }
    const double n = static_cast<double>(mix.members.size());
    for (double& v : acc) v /= n;
    return TokenDistribution(std::move(acc));
}

inline TokenDistribution apply_mixture(std::span<const AdapterSpec> members, const TokenDistribution& d,
                                       std::span<const TokenId> context = {}) {
    return apply_mixture(MixtureSpec{{members.begin(), members.end()}}, d, context);
}

}  // namespace detectlab
