// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * Zero-shot detection scores over a main model q and an auxiliary model r.
 *
 * A document is a token sequence whose first `first_scored` tokens are pure
 * context (normally just <bos>); every later token y_t is scored against
 * q(. | y_<t) and r(. | y_<t).
 *
 *   perplexity   exp(mean_t -log q(y_t))
 *   binoculars   sum_t -log q(y_t) / sum_t sum_y r(y) (-log q(y))
 *   fastdetect   mean_t (-log q(y_t) - mu_t) / sigma_t, where mu_t, sigma_t are
 *                the mean and standard deviation of -log q(Y), Y ~ r; either
 *                estimated from N samples (mc) or computed exactly (analytic).
 *
 * All four scores are lower for more machine-like text.
 */

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detectlab/adapters.hpp"
#include "detectlab/distribution.hpp"
#include "detectlab/errors.hpp"
#include "detectlab/provider.hpp"
#include "detectlab/rng.hpp"

namespace detectlab {

enum class DetectorKind { perplexity, binoculars, fastdetect_mc, fastdetect_analytic };

enum class Orientation { higher_is_machine, lower_is_machine };

enum class FastAggregation {
    // Mean of per-token normalized discrepancies.
    token_mean,
    // sum_t (s_t - mu_t) / sqrt(sum_t sigma_t^2).
    sequence,
};

inline std::string_view detector_name(DetectorKind k) {
    switch (k) {
        case DetectorKind::perplexity: return "perplexity";
        case DetectorKind::binoculars: return "binoculars";
        case DetectorKind::fastdetect_mc: return "fastdetect_mc";
        case DetectorKind::fastdetect_analytic: return "fastdetect_analytic";
    }
    return "?";
}

inline DetectorKind parse_detector_kind(std::string_view s) {
    if (s == "perplexity") return DetectorKind::perplexity;
    if (s == "binoculars") return DetectorKind::binoculars;
    if (s == "fastdetect_mc") return DetectorKind::fastdetect_mc;
    if (s == "fastdetect_analytic") return DetectorKind::fastdetect_analytic;
    throw ParameterError("unknown detector '" + std::string(s) + "'");
}

inline Orientation orientation_of(DetectorKind) { return Orientation::lower_is_machine; }

struct DocView {
    std::span<const TokenId> tokens;
    std::size_t first_scored = 1;

    std::size_t steps() const { return tokens.size() > first_scored ? tokens.size() - first_scored : 0; }
};

struct TokenDiagnostic {
    TokenId token_id = 0;
    double surprisal = 0.0;  // -log q(y_t)
    double expected = 0.0;   // binoculars: CE term; fastdetect: mu_t
    double sigma = 0.0;      // fastdetect only
    bool skipped = false;
};

struct DetectionScore {
    std::string record_id;
    DetectorKind kind = DetectorKind::perplexity;
    double score = 0.0;
    std::size_t skipped_steps = 0;
    std::vector<TokenDiagnostic> per_token;
};

inline constexpr double kMinSigma = 1e-12;

namespace detail {

inline void require_steps(const DocView& doc) {
    if (doc.first_scored == 0) throw DataError("document needs at least one context token");
    if (doc.steps() == 0) throw DataError("document has no scored tokens");
}

inline void require_shared_vocab(const NextTokenProvider& q, const NextTokenProvider& r) {
    if (!same_vocabulary(q, r)) {
        throw SupportError("q and r must share one vocabulary and tokenizer (fingerprints " + q.vocab_info().fingerprint +
                           " vs " + r.vocab_info().fingerprint + ")");
    }
}

inline double surprisal_at(const TokenDistribution& q, TokenId y, std::size_t step) {
    if (y >= q.size()) throw DimensionError("token id out of range at step " + std::to_string(step));
    if (!(q[y] > 0.0)) throw SupportError("q assigns zero probability to the observed token at step " + std::to_string(step));
    return -std::log(q[y]);
}

}  // namespace detail

inline double perplexity_score(const NextTokenProvider& q, const DocView& doc) {
    detail::require_steps(doc);
    double total = 0.0;
    for (std::size_t t = doc.first_scored; t < doc.tokens.size(); ++t) {
        total += detail::surprisal_at(q.next_distribution(doc.tokens.first(t)), doc.tokens[t], t);
    }
    return std::exp(total / static_cast<double>(doc.steps()));
}

inline DetectionScore binoculars_score(const NextTokenProvider& q, const NextTokenProvider& r, const DocView& doc) {
    detail::require_shared_vocab(q, r);
    detail::require_steps(doc);
    DetectionScore out;
    out.kind = DetectorKind::binoculars;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t t = doc.first_scored; t < doc.tokens.size(); ++t) {
        const auto ctx = doc.tokens.first(t);
        const TokenDistribution qd = q.next_distribution(ctx);
        const TokenDistribution rd = r.next_distribution(ctx);
        const double s = detail::surprisal_at(qd, doc.tokens[t], t);
        double ce = 0.0;
        try {
            ce = cross_entropy(rd, qd);
        } catch (const SupportError&) {
            throw SupportError("r has mass where q is zero at step " + std::to_string(t));
        }
        num += s;
        den += ce;
        out.per_token.push_back({doc.tokens[t], s, ce, 0.0, false});
    }
    if (!(den > 0.0)) throw DegenerateDistributionError("binoculars denominator is zero");
    out.score = num / den;
    return out;
}

namespace detail {

struct StepMoments {
    double surprisal = 0.0;
    double mu = 0.0;
    double sigma = 0.0;
};

inline DetectionScore aggregate_fast(DetectorKind kind, const std::vector<StepMoments>& steps,
                                     const std::vector<TokenId>& ids, FastAggregation agg) {
    DetectionScore out;
    out.kind = kind;
    double sum_norm = 0.0;
    double sum_diff = 0.0;
    double sum_var = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& s = steps[i];
        const bool skip = s.sigma < kMinSigma;
        out.per_token.push_back({ids[i], s.surprisal, s.mu, s.sigma, skip});
        if (skip) {
            ++out.skipped_steps;
            continue;
        }
        ++used;
        sum_norm += (s.surprisal - s.mu) / s.sigma;
        sum_diff += s.surprisal - s.mu;
        sum_var += s.sigma * s.sigma;
    }
    if (used == 0) throw DegenerateDistributionError("every step has zero surprisal variance under r");
    out.score = agg == FastAggregation::token_mean ? sum_norm / static_cast<double>(used) : sum_diff / std::sqrt(sum_var);
    return out;
}

}  // namespace detail

inline DetectionScore fastdetect_analytic_score(const NextTokenProvider& q, const NextTokenProvider& r, const DocView& doc,
                                                FastAggregation agg = FastAggregation::token_mean) {
    detail::require_shared_vocab(q, r);
    detail::require_steps(doc);
    std::vector<detail::StepMoments> steps;
    std::vector<TokenId> ids;
    for (std::size_t t = doc.first_scored; t < doc.tokens.size(); ++t) {
        const auto ctx = doc.tokens.first(t);
        const TokenDistribution qd = q.next_distribution(ctx);
        const TokenDistribution rd = r.next_distribution(ctx);
        detail::StepMoments m;
        m.surprisal = detail::surprisal_at(qd, doc.tokens[t], t);
        double e1 = 0.0;
        for (std::size_t y = 0; y < qd.size(); ++y) {
            if (!(rd[y] > 0.0)) continue;
            if (!(qd[y] > 0.0)) throw SupportError("r has mass where q is zero at step " + std::to_string(t));
            e1 += rd[y] * std::log(qd[y]);
        }
        double var = 0.0;
        for (std::size_t y = 0; y < qd.size(); ++y) {
            if (!(rd[y] > 0.0)) continue;
            const double d = std::log(qd[y]) - e1;
            var += rd[y] * d * d;
        }
        m.mu = -e1;
        m.sigma = std::sqrt(var);
        steps.push_back(m);
        ids.push_back(doc.tokens[t]);
    }
    return detail::aggregate_fast(DetectorKind::fastdetect_analytic, steps, ids, agg);
}

// mu_t, sigma_t from n draws of r with one Rng seeded by `seed`; sigma_t is the
// (n - 1)-normalized sample standard deviation of log q.
inline DetectionScore fastdetect_mc_score(const NextTokenProvider& q, const NextTokenProvider& r, const DocView& doc,
                                          std::size_t n, std::uint64_t seed,
                                          FastAggregation agg = FastAggregation::token_mean) {
    if (n < 2) throw ParameterError("fastdetect_mc needs at least 2 samples");
    detail::require_shared_vocab(q, r);
    detail::require_steps(doc);
    Rng rng(seed);
    std::vector<detail::StepMoments> steps;
    std::vector<TokenId> ids;
    std::vector<double> logs(n);
    for (std::size_t t = doc.first_scored; t < doc.tokens.size(); ++t) {
        const auto ctx = doc.tokens.first(t);
        const TokenDistribution qd = q.next_distribution(ctx);
        const TokenDistribution rd = r.next_distribution(ctx);
        detail::StepMoments m;
        m.surprisal = detail::surprisal_at(qd, doc.tokens[t], t);
        const CategoricalSampler sampler(rd);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const TokenId y = sampler(rng);
            if (!(qd[y] > 0.0)) throw SupportError("r sampled a token q gives zero mass at step " + std::to_string(t));
            logs[i] = std::log(qd[y]);
            mean += logs[i];
        }
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double l : logs) ss += (l - mean) * (l - mean);
        m.mu = -mean;
        m.sigma = std::sqrt(ss / static_cast<double>(n - 1));
        steps.push_back(m);
        ids.push_back(doc.tokens[t]);
    }
    return detail::aggregate_fast(DetectorKind::fastdetect_mc, steps, ids, agg);
}

struct DetectorConfig {
    DetectorKind kind = DetectorKind::binoculars;
    ProviderPtr q;
    ProviderPtr r;
    std::size_t mc_samples = 10000;
    std::uint64_t seed = 0;
    FastAggregation aggregation = FastAggregation::token_mean;
    std::optional<MixtureSpec> mixture;

    Orientation orientation() const { return orientation_of(kind); }

    void validate() const {
        if (!q) throw ParameterError("detector needs a main model q");
        if (kind != DetectorKind::perplexity && !r) {
            throw ParameterError(std::string(detector_name(kind)) + " needs an auxiliary model r");
        }
        if (kind == DetectorKind::fastdetect_mc && mc_samples < 2) throw ParameterError("mc_samples must be >= 2");
        if (r) detail::require_shared_vocab(*q, *r);
    }
};

// Replaces q by the uniform mixture of its adapted distributions; r is untouched.
inline DetectorConfig with_mixture_main(DetectorConfig cfg, MixtureSpec mix) {
    if (mix.members.empty()) throw ParameterError("mixture needs at least one member");
    cfg.q = std::make_shared<MixtureProvider>(cfg.q, mix);
    cfg.mixture = std::move(mix);
    return cfg;
}

inline DetectorConfig with_mixture_main(DetectorConfig cfg) {
    if (!cfg.mixture) throw ParameterError("detector config has no mixture_specs");
    MixtureSpec mix = *cfg.mixture;
    return with_mixture_main(std::move(cfg), std::move(mix));
}

// Monte-Carlo draws for a record use seed ^ fnv1a64(record_id).
inline DetectionScore score_document(const DetectorConfig& cfg, const DocView& doc, const std::string& record_id = {}) {
    DetectionScore s;
    switch (cfg.kind) {
        case DetectorKind::perplexity:
            s.kind = DetectorKind::perplexity;
            s.score = perplexity_score(*cfg.q, doc);
            break;
        case DetectorKind::binoculars: s = binoculars_score(*cfg.q, *cfg.r, doc); break;
        case DetectorKind::fastdetect_analytic: s = fastdetect_analytic_score(*cfg.q, *cfg.r, doc, cfg.aggregation); break;
        case DetectorKind::fastdetect_mc:
            s = fastdetect_mc_score(*cfg.q, *cfg.r, doc, cfg.mc_samples, derive_seed(cfg.seed, record_id), cfg.aggregation);
            break;
    }
    s.record_id = record_id;
    return s;
}

// ---------------------------------------------------------------------------
// Indicators relating adapted generator p, main model q and auxiliary r.
// ---------------------------------------------------------------------------

inline const std::vector<double>& indicator_renyi_alphas() {
    static const std::vector<double> alphas{0.2, 0.4, 0.6, 0.8, 1.2, 1.4, 1.6, 1.8, 2.0};
    return alphas;
}

struct IndicatorRow {
    std::vector<std::pair<std::string, double>> values;

    double at(const std::string& name) const {
        for (const auto& [k, v] : values) {
            if (k == name) return v;
        }
        throw DataError("no indicator named " + name);
    }
};

/**
 * Token-averaged indicators for documents sampled from p = adapter(q).
 *
 *   perplexity      mean over documents of perplexity under q
 *   entropy         H(q_t)
 *   tv, l2          TV(q_t, p_t), ||q_t - p_t||
 *   cross_entropy   CE(q_t, p_t), kl_adapted KL(q_t || p_t)
 *   kl_models       KL(q_t || r_t), renyi_<a> D_a(q_t || r_t)
 *
 * The second argument of CE/KL/Renyi is eps-smoothed only when its support
 * does not cover the first argument's.
 */
inline IndicatorRow indicator_suite(const AdapterSpec& p_spec, const NextTokenProvider& q, const NextTokenProvider& r,
                                    std::span<const DocView> docs, SmoothingConfig smoothing = {}) {
    detail::require_shared_vocab(q, r);
    if (docs.empty()) throw DataError("indicator suite needs at least one document");
    auto covered = [](const TokenDistribution& a, const TokenDistribution& b) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] > 0.0 && !(b[i] > 0.0)) return false;
        }
        return true;
    };
    const auto& alphas = indicator_renyi_alphas();
    double ppl = 0.0;
    double h = 0.0, tv = 0.0, l2 = 0.0, ce = 0.0, kla = 0.0, klm = 0.0;
    std::vector<double> ren(alphas.size(), 0.0);
    std::size_t tokens = 0;
    std::size_t scored_docs = 0;
    for (const auto& doc : docs) {
        if (doc.steps() == 0) continue;
        ++scored_docs;
        double doc_surprisal = 0.0;
        for (std::size_t t = doc.first_scored; t < doc.tokens.size(); ++t) {
            const auto ctx = doc.tokens.first(t);
            const TokenDistribution qd = q.next_distribution(ctx);
            const TokenDistribution rd = r.next_distribution(ctx);
            const TokenDistribution pd = apply(p_spec, qd, ctx);
            const TokenDistribution pd_s = covered(qd, pd) ? pd : smooth(pd, smoothing);
            const TokenDistribution rd_s = covered(qd, rd) ? rd : smooth(rd, smoothing);
            doc_surprisal += detail::surprisal_at(qd, doc.tokens[t], t);
            h += entropy(qd);
            tv += tv_distance(qd, pd);
            l2 += l2_distance(qd, pd);
            ce += cross_entropy(qd, pd_s);
            kla += kl_divergence(qd, pd_s);
            klm += kl_divergence(qd, rd_s);
            for (std::size_t a = 0; a < alphas.size(); ++a) ren[a] += renyi_divergence(qd, rd_s, alphas[a]);
            ++tokens;
        }
        ppl += std::exp(doc_surprisal / static_cast<double>(doc.steps()));
    }
    if (tokens == 0) throw DataError("indicator suite: no scored tokens");
    const double n = static_cast<double>(tokens);
    IndicatorRow row;
    row.values = {{"perplexity", ppl / static_cast<double>(scored_docs)},
                  {"entropy", h / n},
                  {"tv", tv / n},
                  {"l2", l2 / n},
                  {"cross_entropy", ce / n},
                  {"kl_adapted", kla / n},
                  {"kl_models", klm / n}};
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        row.values.emplace_back("renyi_" + detail::format_param(alphas[a]), ren[a] / n);
    }
    return row;
}

}  // namespace detectlab
