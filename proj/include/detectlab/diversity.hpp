// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * Lexical diversity statistics over word sequences: MTLD, hapax ratio,
 * Simpson's index (per text), Zipf exponent (pooled counts) and Heaps
 * exponent (across documents).
 */

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "detectlab/errors.hpp"
#include "detectlab/generate.hpp"
#include "detectlab/tokenizer.hpp"

namespace detectlab {

using Words = std::vector<std::string>;

enum class MtldRule {
    // Trailing span counts (1 - TTR_end) / (1 - threshold) of a factor.
    partial_factor,
    // Mean length of completed spans only; the trailing span counts only if
    // no span completed.
    completed_only,
};

inline double mtld(std::span<const std::string> words, double threshold = 0.72, MtldRule rule = MtldRule::partial_factor) {
    if (words.empty()) throw DataError("MTLD of an empty text");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ParameterError("MTLD threshold must lie in (0, 1)");

    std::unordered_map<std::string_view, int> types;
    std::size_t span_len = 0;
    std::size_t completed = 0;
    std::size_t completed_tokens = 0;
    for (const auto& w : words) {
        ++span_len;
        types[w] += 1;
        const double ttr = static_cast<double>(types.size()) / static_cast<double>(span_len);
        if (ttr < threshold) {
            ++completed;
            completed_tokens += span_len;
            span_len = 0;
            types.clear();
        }
    }
    const double n = static_cast<double>(words.size());
    if (rule == MtldRule::completed_only) {
        if (completed == 0) return n;
        return static_cast<double>(completed_tokens) / static_cast<double>(completed);
    }
    double factors = static_cast<double>(completed);
    if (span_len > 0) {
        const double ttr_end = static_cast<double>(types.size()) / static_cast<double>(span_len);
        factors += (1.0 - ttr_end) / (1.0 - threshold);
    }
    // A text whose TTR never drops counts as a single factor.
    if (factors == 0.0) return n;
    return n / factors;
}

namespace detail {

inline std::vector<std::size_t> type_counts(std::span<const std::string> words) {
    std::unordered_map<std::string_view, std::size_t> c;
    for (const auto& w : words) c[w] += 1;
    std::vector<std::size_t> out;
    out.reserve(c.size());
    for (const auto& [_, n] : c) out.push_back(n);
    return out;
}

// Least-squares slope of y on x: Cov(x, y) / Var(x).
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw DataError("regression needs distinct x values");
    return sxy / sxx;
}

}  // namespace detail

// Types occurring once / number of types.
inline double hapax_ratio(std::span<const std::string> words) {
    if (words.empty()) throw DataError("hapax ratio of an empty text");
    const auto counts = detail::type_counts(words);
    const auto once = std::count(counts.begin(), counts.end(), std::size_t{1});
    return static_cast<double>(once) / static_cast<double>(counts.size());
}

// Probability two tokens drawn with replacement share a type.
inline double simpson(std::span<const std::string> words) {
    if (words.empty()) throw DataError("Simpson index of an empty text");
    const double n = static_cast<double>(words.size());
    double d = 0.0;
    for (std::size_t c : detail::type_counts(words)) {
        const double p = static_cast<double>(c) / n;
        d += p * p;
    }
    return d;
}

/**
 * alpha = -Cov(log r, log f) / Var(log r) over all types. `counts` lists
 * type frequencies in first-occurrence order; ranks are 1-based by
 * descending frequency with ties kept in that order.
 */
inline double zipf_alpha(std::span<const std::size_t> counts) {
    if (counts.size() < 2) throw DataError("Zipf exponent needs at least 2 ranks");
    std::vector<std::size_t> f(counts.begin(), counts.end());
    std::stable_sort(f.begin(), f.end(), std::greater<>());
    std::vector<double> lr(f.size()), lf(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] == 0) throw DataError("Zipf exponent needs positive frequencies");
        lr[i] = std::log(static_cast<double>(i + 1));
        lf[i] = std::log(static_cast<double>(f[i]));
    }
    return -detail::ols_slope(lr, lf);
}

struct DocSize {
    std::size_t tokens = 0;  // N_i
    std::size_t types = 0;   // V_i
};

// beta = Cov(log N_i, log V_i) / Var(log N_i).
inline double heaps_beta(std::span<const DocSize> docs) {
    if (docs.size() < 2) throw DataError("Heaps exponent needs at least 2 documents");
    std::vector<double> ln, lv;
    for (const auto& d : docs) {
        if (d.tokens == 0 || d.types == 0) throw DataError("Heaps exponent needs non-empty documents");
        ln.push_back(std::log(static_cast<double>(d.tokens)));
        lv.push_back(std::log(static_cast<double>(d.types)));
    }
    return detail::ols_slope(ln, lv);
}

struct TextDiversity {
    std::string id;
    std::size_t length = 0;
    double mtld = 0.0;
    double hapax_ratio = 0.0;
    double simpson = 0.0;
};

struct DiversityReport {
    double mtld = 0.0;
    double hapax_ratio = 0.0;
    double simpson = 0.0;
    std::optional<double> zipf_alpha;
    std::optional<double> heaps_beta;
    double avg_length_tokens = 0.0;
    MtldRule mtld_rule = MtldRule::partial_factor;
    std::size_t empty_texts = 0;
    std::vector<TextDiversity> per_text;
};

inline Tokenizer diversity_tokenizer() { return Tokenizer{TokenizerMode::whitespace_word, true}; }

/**
 * Per-text metrics are averaged over non-empty texts (empty ones are counted
 * in `empty_texts`). Zipf/Heaps are left unset when their preconditions fail.
 */
inline DiversityReport corpus_report(std::span<const GeneratedRecord> records, const Tokenizer& tok = diversity_tokenizer(),
                                     double threshold = 0.72, MtldRule rule = MtldRule::partial_factor) {
    if (records.empty()) throw DataError("diversity report of an empty corpus");
    DiversityReport rep;
    rep.mtld_rule = rule;

    std::map<std::string, std::size_t> first_seen;
    std::vector<std::size_t> pooled;
    std::vector<DocSize> sizes;
    std::size_t total_len = 0;
    for (const auto& r : records) {
        const Words words = tok.pieces(r.text);
        total_len += words.size();
        if (words.empty()) {
            ++rep.empty_texts;
            continue;
        }
        TextDiversity td{r.id, words.size(), mtld(words, threshold, rule), hapax_ratio(words), simpson(words)};
        rep.mtld += td.mtld;
        rep.hapax_ratio += td.hapax_ratio;
        rep.simpson += td.simpson;
        rep.per_text.push_back(std::move(td));

        for (const auto& w : words) {
            auto [it, inserted] = first_seen.emplace(w, pooled.size());
            if (inserted) pooled.push_back(0);
            ++pooled[it->second];
        }
        sizes.push_back({words.size(), detail::type_counts(words).size()});
    }
    const double n = static_cast<double>(rep.per_text.size());
    if (n == 0) throw DataError("diversity report: every text is empty");
    rep.mtld /= n;
    rep.hapax_ratio /= n;
    rep.simpson /= n;
    rep.avg_length_tokens = static_cast<double>(total_len) / static_cast<double>(records.size());
    try {
        rep.zipf_alpha = zipf_alpha(pooled);
    } catch (const DataError&) {
    }
    try {
        rep.heaps_beta = heaps_beta(sizes);
    } catch (const DataError&) {
    }
    return rep;
}

}  // namespace detectlab
