// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * AUROC, threshold accuracy, score histograms and the correlation statistics
 * (Pearson, Spearman, Kendall tau-b) used to relate indicators to detector
 * performance.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"

#include "detectlab/detectors.hpp"
#include "detectlab/errors.hpp"

namespace detectlab {

enum class Label { human, machine };

struct LabeledScore {
    double score = 0.0;
    Label label = Label::human;
};

namespace detail {

inline void require_both_classes(std::span<const LabeledScore> s, std::size_t& nh, std::size_t& nm) {
    nh = nm = 0;
    for (const auto& x : s) {
        if (!std::isfinite(x.score)) throw DataError("scores must be finite");
        (x.label == Label::human ? nh : nm) += 1;
    }
    if (nh == 0 || nm == 0) throw DataError("need at least one human and one machine score");
}

// 1-based average ranks; tied values share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace detail

// P(machine > human) + P(tie)/2 via the Mann-Whitney rank sum.
inline double auroc(std::span<const LabeledScore> scores) {
    std::size_t nh = 0, nm = 0;
    detail::require_both_classes(scores, nh, nm);
    std::vector<double> v;
    v.reserve(scores.size());
    for (const auto& s : scores) v.push_back(s.score);
    const auto ranks = detail::average_ranks(v);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i].label == Label::machine) rank_sum += ranks[i];
    }
    const double m = static_cast<double>(nm);
    const double u = rank_sum - m * (m + 1.0) / 2.0;
    return u / (m * static_cast<double>(nh));
}

// AUROC after flipping scores so that "machine" is always the high side.
inline double auroc_oriented(std::span<const LabeledScore> scores, Orientation o) {
    if (o == Orientation::higher_is_machine) return auroc(scores);
    std::vector<LabeledScore> flipped(scores.begin(), scores.end());
    for (auto& s : flipped) s.score = -s.score;
    return auroc(flipped);
}

// Predicts machine when the score lies strictly beyond the threshold on the
// machine side.
inline double accuracy_at(std::span<const LabeledScore> scores, double threshold, Orientation o) {
    std::size_t nh = 0, nm = 0;
    detail::require_both_classes(scores, nh, nm);
    std::size_t correct = 0;
    for (const auto& s : scores) {
        const bool machine = o == Orientation::higher_is_machine ? s.score > threshold : s.score < threshold;
        if (machine == (s.label == Label::machine)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

// Two-threshold mode: machine when score < low or score > high.
inline double accuracy_band(std::span<const LabeledScore> scores, double low, double high) {
    if (!(low <= high)) throw ParameterError("accuracy band needs low <= high");
    std::size_t nh = 0, nm = 0;
    detail::require_both_classes(scores, nh, nm);
    std::size_t correct = 0;
    for (const auto& s : scores) {
        const bool machine = s.score < low || s.score > high;
        if (machine == (s.label == Label::machine)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t bins = 50;
    std::vector<std::size_t> human;
    std::vector<std::size_t> machine;
};

// Uniform bins over the pooled range; the maximum falls in the last bin.
inline Histogram histogram(std::span<const LabeledScore> scores, std::size_t bins = 50) {
    if (bins < 1) throw ParameterError("histogram needs at least one bin");
    if (scores.empty()) throw DataError("histogram of no scores");
    Histogram h;
    h.bins = bins;
    h.human.assign(bins, 0);
    h.machine.assign(bins, 0);
    auto [mn, mx] = std::minmax_element(scores.begin(), scores.end(),
                                        [](const LabeledScore& a, const LabeledScore& b) { return a.score < b.score; });
    h.lo = mn->score;
    h.hi = mx->score;
    const double width = (h.hi - h.lo) / static_cast<double>(bins);
    for (const auto& s : scores) {
        std::size_t b = 0;
        if (width > 0.0) {
            b = static_cast<std::size_t>((s.score - h.lo) / width);
            b = std::min(b, bins - 1);
        }
        (s.label == Label::human ? h.human : h.machine)[b] += 1;
    }
    return h;
}

inline nlohmann::ordered_json to_json(const Histogram& h) {
    nlohmann::ordered_json j;
    j["lo"] = h.lo;
    j["hi"] = h.hi;
    j["bins"] = h.bins;
    std::vector<double> edges(h.bins + 1);
    for (std::size_t i = 0; i <= h.bins; ++i) {
        edges[i] = h.lo + (h.hi - h.lo) * static_cast<double>(i) / static_cast<double>(h.bins);
    }
    j["edges"] = edges;
    j["human"] = h.human;
    j["machine"] = h.machine;
    return j;
}

struct EvalReport {
    double auroc = 0.0;           // raw: higher score = machine
    double auroc_oriented = 0.0;  // after applying the detector's orientation
    Orientation orientation = Orientation::lower_is_machine;
    std::optional<std::pair<double, double>> accuracy_at_threshold;
    std::size_t n_human = 0;
    std::size_t n_machine = 0;
    Histogram histogram;
};

inline EvalReport evaluate(std::span<const LabeledScore> scores, Orientation o, std::optional<double> threshold = {}) {
    EvalReport r;
    detail::require_both_classes(scores, r.n_human, r.n_machine);
    r.orientation = o;
    r.auroc = auroc(scores);
    r.auroc_oriented = auroc_oriented(scores, o);
    if (threshold) r.accuracy_at_threshold = std::make_pair(*threshold, accuracy_at(scores, *threshold, o));
    r.histogram = histogram(scores);
    return r;
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

struct Correlation {
    double coef = 0.0;
    double p_value = 1.0;
};

namespace detail {

inline void require_pairs(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionError("correlation inputs differ in length");
    if (x.size() < 3) throw DataError("correlation needs at least 3 pairs");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw DataError("correlation inputs must be finite");
    }
}

// Two-sided p-value of r under a t distribution with n - 2 degrees of freedom.
inline double t_p_value(double r, std::size_t n) {
    const double df = static_cast<double>(n - 2);
    const double denom = 1.0 - r * r;
    if (denom <= 0.0) return 0.0;
    const double t = std::abs(r) * std::sqrt(df / denom);
    const boost::math::students_t dist(df);
    return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
}

inline double pearson_coef(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw DataError("correlation undefined for a constant input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Tie-group statistics over a sorted run: sum t(t-1)/2, sum t(t-1)(t-2), sum t(t-1)(2t+5).
struct TieSums {
    double pairs = 0.0;
    double t0 = 0.0;
    double t1 = 0.0;

    void add(double t) {
        pairs += t * (t - 1.0) / 2.0;
        t0 += t * (t - 1.0) * (t - 2.0);
        t1 += t * (t - 1.0) * (2.0 * t + 5.0);
    }
};

inline TieSums tie_sums(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    TieSums s;
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        while (j < v.size() && v[j] == v[i]) ++j;
        s.add(static_cast<double>(j - i));
        i = j;
    }
    return s;
}

// Number of inversions in v, counted by merge sort.
inline std::uint64_t count_inversions(std::vector<double>& v) {
    std::vector<double> buf(v.size());
    std::uint64_t inv = 0;
    for (std::size_t width = 1; width < v.size(); width *= 2) {
        for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, v.size());
            const std::size_t hi = std::min(lo + 2 * width, v.size());
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (v[j] < v[i]) {
                    inv += mid - i;
                    buf[k++] = v[j++];
                } else {
                    buf[k++] = v[i++];
                }
            }
            while (i < mid) buf[k++] = v[i++];
            while (j < hi) buf[k++] = v[j++];
        }
        std::swap(v, buf);
    }
    return inv;
}

}  // namespace detail

inline Correlation pearson(std::span<const double> x, std::span<const double> y) {
    detail::require_pairs(x, y);
    const double r = detail::pearson_coef(x, y);
    return {r, detail::t_p_value(r, x.size())};
}

inline Correlation spearman(std::span<const double> x, std::span<const double> y) {
    detail::require_pairs(x, y);
    const auto rx = detail::average_ranks(x);
    const auto ry = detail::average_ranks(y);
    const double rho = detail::pearson_coef(rx, ry);
    return {rho, detail::t_p_value(rho, x.size())};
}

/**
 * Kendall tau-b in O(n log n): sort by (x, y), count joint and x ties, then
 * count discordant pairs as inversions of y. p-value from the normal
 * approximation with the tie-corrected variance.
 */
inline Correlation kendall(std::span<const double> x, std::span<const double> y) {
    detail::require_pairs(x, y);
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
    });

    double joint_ties = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && x[idx[j]] == x[idx[i]] && y[idx[j]] == y[idx[i]]) ++j;
        const double t = static_cast<double>(j - i);
        joint_ties += t * (t - 1.0) / 2.0;
        i = j;
    }
    const detail::TieSums xt = detail::tie_sums(std::vector<double>(x.begin(), x.end()));
    const detail::TieSums yt = detail::tie_sums(std::vector<double>(y.begin(), y.end()));

    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
    const double dis = static_cast<double>(detail::count_inversions(ys));

    const double nd = static_cast<double>(n);
    const double total = nd * (nd - 1.0) / 2.0;
    const double denom = (total - xt.pairs) * (total - yt.pairs);
    if (!(denom > 0.0)) throw DataError("Kendall tau undefined when an input is constant");
    const double con_minus_dis = total - xt.pairs - yt.pairs + joint_ties - 2.0 * dis;
    const double tau = std::clamp(con_minus_dis / std::sqrt(denom), -1.0, 1.0);

    const double m = nd * (nd - 1.0);
    const double var = (m * (2.0 * nd + 5.0) - xt.t1 - yt.t1) / 18.0 + 2.0 * xt.pairs * yt.pairs / m +
                       xt.t0 * yt.t0 / (9.0 * m * (nd - 2.0));
    const double z = con_minus_dis / std::sqrt(var);
    return {tau, std::erfc(std::abs(z) / std::sqrt(2.0))};
}

struct CorrelationRow {
    std::string indicator;
    Correlation pearson;
    Correlation spearman;
    Correlation kendall;
};

/**
 * One row per indicator. `indicators[i]` holds that indicator's value for
 * every configuration, aligned with `aurocs`.
 */
inline std::vector<CorrelationRow> correlation_table(std::span<const std::string> names,
                                                     std::span<const std::vector<double>> indicators,
                                                     std::span<const double> aurocs) {
    if (names.size() != indicators.size()) throw DimensionError("indicator names and columns differ in count");
    if (aurocs.size() < 3) throw DataError("correlation table needs at least 3 configurations");
    std::vector<CorrelationRow> rows;
    for (std::size_t i = 0; i < names.size(); ++i) {
        try {
            rows.push_back({names[i], pearson(indicators[i], aurocs), spearman(indicators[i], aurocs),
                            kendall(indicators[i], aurocs)});
        } catch (const Error& e) {
            throw DataError("indicator '" + names[i] + "': " + e.what());
        }
    }
    return rows;
}

}  // namespace detectlab
