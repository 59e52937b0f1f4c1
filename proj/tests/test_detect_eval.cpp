// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "support.hpp"

using namespace detectlab;
using namespace testing_support;

namespace {

const std::vector<std::vector<double>> kQ{{0.1, 0.2, 0.3, 0.4}, {0.4, 0.3, 0.2, 0.1}, {0.05, 0.5, 0.25, 0.2}};
const std::vector<std::vector<double>> kR{{0.25, 0.25, 0.25, 0.25}, {0.1, 0.1, 0.4, 0.4}, {0.3, 0.3, 0.2, 0.2}};
const std::vector<TokenId> kDoc{0, 2, 3, 1};

// Step t (context length t) served from rows[t - 1].
std::shared_ptr<TableProvider> by_step(std::vector<std::vector<double>> rows, std::string fp = "table") {
    const std::size_t v = rows.front().size();
    return std::make_shared<TableProvider>(
        v, [rows](std::span<const TokenId> ctx) { return TokenDistribution(rows[(ctx.size() - 1) % rows.size()]); },
        std::move(fp));
}

std::shared_ptr<TableProvider> constant(std::vector<double> p, std::string fp = "table") {
    return TableProvider::constant(TokenDistribution(std::move(p)), std::move(fp));
}

double direct_binoculars(const std::vector<std::vector<double>>& q, const std::vector<std::vector<double>>& r,
                         const std::vector<TokenId>& doc) {
    double num = 0, den = 0;
    for (std::size_t t = 1; t < doc.size(); ++t) {
        const auto& qt = q[(t - 1) % q.size()];
        const auto& rt = r[(t - 1) % r.size()];
        num += -std::log(qt[doc[t]]);
        for (std::size_t y = 0; y < qt.size(); ++y) den += -rt[y] * std::log(qt[y]);
    }
    return num / den;
}

std::vector<LabeledScore> labeled(const std::vector<double>& machine, const std::vector<double>& human) {
    std::vector<LabeledScore> out;
    for (double m : machine) out.push_back({m, Label::machine});
    for (double h : human) out.push_back({h, Label::human});
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// perplexity

TEST(Perplexity, UniformSteps) {
    const auto q = constant({0.25, 0.25, 0.25, 0.25});
    const std::vector<TokenId> doc{0, 3, 2, 1, 0};
    EXPECT_NEAR(perplexity_score(*q, DocView{doc}), 4.0, 1e-12);
}

TEST(Perplexity, CertainStep) {
    const auto q = constant({0.0, 1.0, 0.0});
    const std::vector<TokenId> doc{0, 1};
    EXPECT_DOUBLE_EQ(perplexity_score(*q, DocView{doc}), 1.0);
}

TEST(Perplexity, MatchesNgramPerplexity) {
    const auto texts = toy_texts();
    const auto c = make_train_corpus(Tokenizer{}, texts);
    const auto m = std::make_shared<NgramModel>(NgramModel::train(c, NgramOptions{}));
    for (const auto& doc : c.documents) EXPECT_NEAR(perplexity_score(*m, DocView{doc}) / m->perplexity(doc), 1.0, 1e-12);
}

TEST(Perplexity, Errors) {
    const auto q = constant({0.5, 0.5, 0.0});
    EXPECT_THROW(perplexity_score(*q, DocView{std::vector<TokenId>{0, 2}}), SupportError);
    EXPECT_THROW(perplexity_score(*q, DocView{std::vector<TokenId>{0}}), DataError);
    EXPECT_THROW(perplexity_score(*q, DocView{std::vector<TokenId>{0, 7}}), DimensionError);
}

// ---------------------------------------------------------------------------
// binoculars

TEST(Binoculars, ThreeStepOracle) {
    const auto q = by_step(kQ), r = by_step(kR);
    const auto s = binoculars_score(*q, *r, DocView{kDoc});
    EXPECT_NEAR(s.score, direct_binoculars(kQ, kR, kDoc), 1e-12);
    EXPECT_NEAR(s.score, 0.8415032694009216, 1e-12);
    ASSERT_EQ(s.per_token.size(), 3u);
    EXPECT_EQ(s.per_token[0].token_id, 2u);
    EXPECT_NEAR(s.per_token[0].surprisal, -std::log(0.3), 1e-15);
    EXPECT_EQ(s.kind, DetectorKind::binoculars);
}

TEST(Binoculars, ConstantSurprisalGivesOne) {
    const auto q = constant({0.25, 0.25, 0.25, 0.25});
    const auto r = constant({0.7, 0.1, 0.1, 0.1});
    const std::vector<TokenId> doc{0, 2};
    const auto s = binoculars_score(*q, *r, DocView{doc});
    EXPECT_NEAR(s.per_token[0].surprisal, std::log(4.0), 1e-15);
    EXPECT_NEAR(s.per_token[0].expected, std::log(4.0), 1e-15);
    EXPECT_NEAR(s.score, 1.0, 1e-15);
}

TEST(Binoculars, DenominatorIsSumOfCrossEntropies) {
    const auto texts = toy_texts();
    const auto c = make_train_corpus(Tokenizer{}, texts);
    const auto [q, r] = derive_pair(c, NgramOptions{}, PairMode::lower_order);
    for (const auto& doc : c.documents) {
        const auto s = binoculars_score(q, r, DocView{doc});
        double num = 0, den = 0;
        for (std::size_t t = 1; t < doc.size(); ++t) {
            const auto ctx = std::span<const TokenId>(doc).first(t);
            num += -std::log(q.next_distribution(ctx)[doc[t]]);
            den += cross_entropy(r.next_distribution(ctx), q.next_distribution(ctx));
        }
        double diag_den = 0;
        for (const auto& d : s.per_token) diag_den += d.expected;
        EXPECT_NEAR(diag_den, den, 1e-9);
        EXPECT_NEAR(s.score, num / den, 1e-12);
    }
}

TEST(Binoculars, DuplicatedStepsKeepRatio) {
    const auto q = by_step(kQ), r = by_step(kR);
    // Same three contexts (cycled by context length) seen twice.
    const std::vector<TokenId> twice{0, 2, 3, 1, 2, 3, 1};
    const auto once = binoculars_score(*q, *r, DocView{kDoc});
    const auto dup = binoculars_score(*q, *r, DocView{twice});
    double n1 = 0, d1 = 0, n2 = 0, d2 = 0;
    for (const auto& t : once.per_token) n1 += t.surprisal, d1 += t.expected;
    for (const auto& t : dup.per_token) n2 += t.surprisal, d2 += t.expected;
    EXPECT_NEAR(n2, 2 * n1, 1e-12);
    EXPECT_NEAR(d2, 2 * d1, 1e-12);
    EXPECT_NEAR(dup.score, once.score, 1e-12);
}

TEST(Binoculars, SupportErrorNamesStep) {
    const auto q = by_step({{0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}, {0.5, 0.0, 0.5}});
    const auto r = by_step({{0.2, 0.4, 0.4}});
    try {
        binoculars_score(*q, *r, DocView{std::vector<TokenId>{0, 1, 1, 2}});
        FAIL();
    } catch (const SupportError& e) {
        EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
    }
    const auto q2 = constant({0.5, 0.5, 0.0}), r2 = constant({0.3, 0.3, 0.4});
    try {
        binoculars_score(*q2, *r2, DocView{std::vector<TokenId>{0, 1, 1}});
        FAIL();
    } catch (const SupportError& e) {
        EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
    }
}

TEST(Binoculars, RequiresSharedVocabulary) {
    const auto q = constant({0.5, 0.5}, "a"), r = constant({0.5, 0.5}, "b");
    EXPECT_THROW(binoculars_score(*q, *r, DocView{std::vector<TokenId>{0, 1}}), SupportError);
    const auto r3 = constant({0.2, 0.4, 0.4}, "a");
    EXPECT_THROW(binoculars_score(*q, *r3, DocView{std::vector<TokenId>{0, 1}}), SupportError);
    DetectorConfig cfg{DetectorKind::binoculars, q, r};
    EXPECT_THROW(cfg.validate(), SupportError);
}

// ---------------------------------------------------------------------------
// fastdetect

TEST(FastDetect, AnalyticHandCase) {
    const auto q = constant({0.7, 0.2, 0.1}), r = constant({0.6, 0.3, 0.1});
    const auto s = fastdetect_analytic_score(*q, *r, DocView{std::vector<TokenId>{0, 0}});
    const double l0 = std::log(0.7), l1 = std::log(0.2), l2 = std::log(0.1);
    const double mu = -(0.6 * l0 + 0.3 * l1 + 0.1 * l2);
    const double sigma = std::sqrt(0.6 * l0 * l0 + 0.3 * l1 * l1 + 0.1 * l2 * l2 - mu * mu);
    EXPECT_NEAR(s.per_token[0].expected, mu, 1e-12);
    EXPECT_NEAR(s.per_token[0].sigma, sigma, 1e-12);
    EXPECT_NEAR(s.score, (-l0 - mu) / sigma, 1e-12);
    EXPECT_NEAR(mu, 0.9270948, 1e-6);
    EXPECT_NEAR(sigma, 0.7239491, 1e-6);
    EXPECT_NEAR(s.score, -0.7879282, 1e-6);
}

TEST(FastDetect, AnalyticThreeStepOracle) {
    const auto q = by_step(kQ), r = by_step(kR);
    EXPECT_NEAR(fastdetect_analytic_score(*q, *r, DocView{kDoc}).score, -0.19891508031671748, 1e-12);
}

TEST(FastDetect, SequenceAggregation) {
    const auto q = by_step(kQ), r = by_step(kR);
    const auto s = fastdetect_analytic_score(*q, *r, DocView{kDoc}, FastAggregation::sequence);
    double diff = 0, var = 0;
    for (const auto& t : s.per_token) {
        diff += t.surprisal - t.expected;
        var += t.sigma * t.sigma;
    }
    EXPECT_NEAR(s.score, diff / std::sqrt(var), 1e-12);
}

TEST(FastDetect, DegenerateCases) {
    const auto uni = constant({0.25, 0.25, 0.25, 0.25});
    const auto other = constant({0.1, 0.2, 0.3, 0.4});
    const std::vector<TokenId> doc{0, 1, 2, 3};
    EXPECT_THROW(fastdetect_mc_score(*uni, *other, DocView{doc}, 100, 1), DegenerateDistributionError);
    EXPECT_THROW(fastdetect_analytic_score(*uni, *other, DocView{doc}), DegenerateDistributionError);

    const auto half = constant({0.5, 0.5});
    EXPECT_THROW(fastdetect_analytic_score(*half, *half, DocView{std::vector<TokenId>{0, 1}}), DegenerateDistributionError);

    const auto onehot = constant({0.0, 0.0, 1.0, 0.0});
    EXPECT_THROW(fastdetect_analytic_score(*other, *onehot, DocView{std::vector<TokenId>{0, 1}}), DegenerateDistributionError);
    EXPECT_THROW(fastdetect_mc_score(*other, *onehot, DocView{std::vector<TokenId>{0, 1}}, 50, 3), DegenerateDistributionError);
}

TEST(FastDetect, SkippedStepsAreCounted) {
    const auto q = by_step({{0.1, 0.2, 0.3, 0.4}, {0.25, 0.25, 0.25, 0.25}, {0.1, 0.2, 0.3, 0.4}});
    const auto r = constant({0.3, 0.3, 0.2, 0.2});
    const auto s = fastdetect_analytic_score(*q, *r, DocView{std::vector<TokenId>{0, 3, 1, 2}});
    EXPECT_EQ(s.skipped_steps, 1u);
    EXPECT_TRUE(s.per_token[1].skipped);
    EXPECT_FALSE(s.per_token[0].skipped);
    const double a = (s.per_token[0].surprisal - s.per_token[0].expected) / s.per_token[0].sigma;
    const double c = (s.per_token[2].surprisal - s.per_token[2].expected) / s.per_token[2].sigma;
    EXPECT_NEAR(s.score, (a + c) / 2, 1e-12);
}

TEST(FastDetect, MonteCarloDeterministic) {
    const auto q = by_step(kQ), r = by_step(kR);
    const auto a = fastdetect_mc_score(*q, *r, DocView{kDoc}, 500, 9);
    const auto b = fastdetect_mc_score(*q, *r, DocView{kDoc}, 500, 9);
    const auto c = fastdetect_mc_score(*q, *r, DocView{kDoc}, 500, 10);
    EXPECT_EQ(a.score, b.score);
    EXPECT_NE(a.score, c.score);
    EXPECT_THROW(fastdetect_mc_score(*q, *r, DocView{kDoc}, 1, 9), ParameterError);
}

TEST(FastDetect, MonteCarloConvergesOnTwoTokens) {
    const auto q = constant({0.8, 0.2}), r = constant({0.35, 0.65});
    const std::vector<TokenId> doc{0, 1};
    const std::size_t n = 100000;
    const auto exact = fastdetect_analytic_score(*q, *r, DocView{doc});
    const auto mc = fastdetect_mc_score(*q, *r, DocView{doc}, n, 123);
    const double se = mc.per_token[0].sigma / std::sqrt(static_cast<double>(n));
    EXPECT_LE(std::abs(mc.per_token[0].expected - exact.per_token[0].expected), 3 * se);
    EXPECT_NEAR(mc.score, exact.score, 0.02);
}

TEST(FastDetect, MonteCarloAgreesWithAnalyticOnToyDoc) {
    const auto q = by_step(kQ), r = by_step(kR);
    const auto exact = fastdetect_analytic_score(*q, *r, DocView{kDoc});
    const auto mc = fastdetect_mc_score(*q, *r, DocView{kDoc}, 100000, 77);
    EXPECT_NEAR(mc.score, exact.score, 0.02);
}

// ---------------------------------------------------------------------------
// configs and mixtures

TEST(DetectorConfig, Validation) {
    const auto q = constant({0.5, 0.5});
    EXPECT_THROW((DetectorConfig{DetectorKind::binoculars, q, nullptr}.validate()), ParameterError);
    EXPECT_THROW((DetectorConfig{DetectorKind::perplexity, nullptr, nullptr}.validate()), ParameterError);
    DetectorConfig mc{DetectorKind::fastdetect_mc, q, q};
    mc.mc_samples = 1;
    EXPECT_THROW(mc.validate(), ParameterError);
    EXPECT_NO_THROW((DetectorConfig{DetectorKind::perplexity, q, nullptr}.validate()));
    EXPECT_THROW(with_mixture_main(DetectorConfig{DetectorKind::binoculars, q, q}, MixtureSpec{}), ParameterError);
    EXPECT_THROW(with_mixture_main(DetectorConfig{DetectorKind::binoculars, q, q}), ParameterError);
    for (auto k : {DetectorKind::perplexity, DetectorKind::binoculars, DetectorKind::fastdetect_mc,
                   DetectorKind::fastdetect_analytic}) {
        EXPECT_EQ(parse_detector_kind(detector_name(k)), k);
    }
    EXPECT_THROW(parse_detector_kind("detectgpt"), ParameterError);
}

TEST(DetectorConfig, ScoreDocumentDispatchAndSeeds) {
    const auto q = by_step(kQ), r = by_step(kR);
    DetectorConfig cfg{DetectorKind::fastdetect_mc, q, r};
    cfg.mc_samples = 300;
    cfg.seed = 5;
    const auto a = score_document(cfg, DocView{kDoc}, "doc-1");
    EXPECT_EQ(a.record_id, "doc-1");
    EXPECT_EQ(a.score, fastdetect_mc_score(*q, *r, DocView{kDoc}, 300, 5 ^ fnv1a64("doc-1")).score);
    EXPECT_EQ(a.score, score_document(cfg, DocView{kDoc}, "doc-1").score);
    EXPECT_NE(a.score, score_document(cfg, DocView{kDoc}, "doc-2").score);

    cfg.kind = DetectorKind::binoculars;
    EXPECT_EQ(score_document(cfg, DocView{kDoc}).score, binoculars_score(*q, *r, DocView{kDoc}).score);
    cfg.kind = DetectorKind::perplexity;
    EXPECT_EQ(score_document(cfg, DocView{kDoc}).score, perplexity_score(*q, DocView{kDoc}));
}

TEST(Mixture, AncestralAloneMatchesBase) {
    const auto texts = toy_texts();
    const auto c = make_train_corpus(Tokenizer{}, texts);
    auto [q0, r0] = derive_pair(c, NgramOptions{}, PairMode::lower_order);
    const ProviderPtr q = std::make_shared<NgramModel>(std::move(q0));
    const ProviderPtr r = std::make_shared<NgramModel>(std::move(r0));
    for (auto kind : {DetectorKind::binoculars, DetectorKind::fastdetect_analytic, DetectorKind::perplexity}) {
        const DetectorConfig base{kind, q, r};
        const auto mixed = with_mixture_main(base, MixtureSpec{{AdapterSpec::ancestral()}});
        EXPECT_EQ(mixed.r, base.r);
        for (const auto& doc : c.documents) {
            EXPECT_NEAR(score_document(mixed, DocView{doc}).score, score_document(base, DocView{doc}).score, 1e-12);
        }
    }
}

TEST(Mixture, DefaultGridGivesValidDistributions) {
    const auto texts = toy_texts();
    const auto c = make_train_corpus(Tokenizer{}, texts);
    const ProviderPtr q = std::make_shared<NgramModel>(NgramModel::train(c, NgramOptions{}));
    const auto cfg = with_mixture_main(DetectorConfig{DetectorKind::binoculars, q, q}, MixtureSpec::default_grid());
    for (const auto& doc : c.documents) {
        for (std::size_t t = 1; t < doc.size(); ++t) {
            const auto d = cfg.q->next_distribution(std::span<const TokenId>(doc).first(t));
            EXPECT_NEAR(std::accumulate(d.probs().begin(), d.probs().end(), 0.0), 1.0, 1e-12);
            for (double p : d.probs()) EXPECT_GE(p, 0.0);
        }
        EXPECT_TRUE(std::isfinite(score_document(cfg, DocView{doc}).score));
    }
}

// ---------------------------------------------------------------------------
// indicator suite

namespace {

struct IndicatorFixture {
    TrainCorpus corpus;
    std::shared_ptr<NgramModel> q, r;
    std::vector<std::vector<TokenId>> docs;

    std::vector<DocView> views() const {
        std::vector<DocView> v;
        for (const auto& d : docs) v.push_back(DocView{d});
        return v;
    }
};

const IndicatorFixture& indicator_fixture() {
    static const IndicatorFixture f = [] {
        IndicatorFixture x;
        const auto texts = toy_texts();
        x.corpus = make_train_corpus(Tokenizer{}, texts);
        auto [q, r] = derive_pair(x.corpus, NgramOptions{}, PairMode::lower_order);
        x.q = std::make_shared<NgramModel>(std::move(q));
        x.r = std::make_shared<NgramModel>(std::move(r));
        x.docs = x.corpus.documents;
        return x;
    }();
    return f;
}

}  // namespace

TEST(Indicators, AncestralHasNoAdaptationGap) {
    const auto& f = indicator_fixture();
    const auto row = indicator_suite(AdapterSpec::ancestral(), *f.q, *f.r, f.views());
    EXPECT_EQ(row.at("tv"), 0.0);
    EXPECT_EQ(row.at("l2"), 0.0);
    EXPECT_NEAR(row.at("kl_adapted"), 0.0, 1e-15);
    EXPECT_NEAR(row.at("cross_entropy"), row.at("entropy"), 1e-12);
    EXPECT_GT(row.at("kl_models"), 0.0);
    EXPECT_EQ(row.values.size(), 7u + indicator_renyi_alphas().size());
    EXPECT_THROW(row.at("nope"), DataError);
}

TEST(Indicators, IdenticalModelsHaveZeroDivergence) {
    const auto& f = indicator_fixture();
    const auto row = indicator_suite(AdapterSpec::top_p(0.8), *f.q, *f.q, f.views());
    EXPECT_NEAR(row.at("kl_models"), 0.0, 1e-15);
    for (double a : indicator_renyi_alphas()) {
        EXPECT_NEAR(row.at("renyi_" + detail::format_param(a)), 0.0, 1e-12) << a;
    }
}

TEST(Indicators, StrongerTruncationMovesFurther) {
    const auto& f = indicator_fixture();
    const auto tight = indicator_suite(AdapterSpec::top_p(0.3), *f.q, *f.r, f.views());
    const auto loose = indicator_suite(AdapterSpec::top_p(0.95), *f.q, *f.r, f.views());
    EXPECT_GT(tight.at("tv"), loose.at("tv"));
    EXPECT_GT(tight.at("kl_adapted"), loose.at("kl_adapted"));
    EXPECT_EQ(tight.at("entropy"), loose.at("entropy"));
    EXPECT_EQ(tight.at("perplexity"), loose.at("perplexity"));
}

TEST(Indicators, PerplexityIsMeanOverDocuments) {
    const auto& f = indicator_fixture();
    const auto row = indicator_suite(AdapterSpec::ancestral(), *f.q, *f.r, f.views());
    double mean = 0;
    for (const auto& d : f.docs) mean += f.q->perplexity(d);
    EXPECT_NEAR(row.at("perplexity"), mean / static_cast<double>(f.docs.size()), 1e-9);
    EXPECT_THROW(indicator_suite(AdapterSpec::ancestral(), *f.q, *f.r, std::vector<DocView>{}), DataError);
}

// ---------------------------------------------------------------------------
// AUROC and accuracy

namespace {

double brute_auroc(const std::vector<LabeledScore>& s) {
    double wins = 0, pairs = 0;
    for (const auto& m : s) {
        if (m.label != Label::machine) continue;
        for (const auto& h : s) {
            if (h.label != Label::human) continue;
            pairs += 1;
            if (m.score > h.score) wins += 1;
            else if (m.score == h.score) wins += 0.5;
        }
    }
    return wins / pairs;
}

std::vector<LabeledScore> random_labeled(std::mt19937_64& g, bool ties) {
    std::uniform_int_distribution<int> n(2, 40), coarse(0, 6);
    std::normal_distribution<double> fine(0.0, 1.0);
    std::vector<LabeledScore> s(static_cast<std::size_t>(n(g)));
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i].score = ties ? coarse(g) : fine(g);
        s[i].label = i % 2 ? Label::machine : Label::human;
    }
    std::shuffle(s.begin(), s.end(), g);
    return s;
}

}  // namespace

TEST(Auroc, Examples) {
    EXPECT_DOUBLE_EQ(auroc(labeled({0.8, 0.9}, {0.1, 0.2})), 1.0);
    EXPECT_DOUBLE_EQ(auroc(labeled({0.4, 0.4}, {0.4, 0.4, 0.4})), 0.5);
    EXPECT_DOUBLE_EQ(auroc(labeled({0.3, 0.7}, {0.5})), 0.5);
    EXPECT_THROW(auroc(labeled({0.3, 0.7}, {})), DataError);
    EXPECT_THROW(auroc(labeled({}, {0.3})), DataError);
}

TEST(Auroc, MatchesPairwiseOracle) {
    std::mt19937_64 g(31);
    for (int trial = 0; trial < 500; ++trial) {
        const auto s = random_labeled(g, trial % 2 == 0);
        EXPECT_NEAR(auroc(s), brute_auroc(s), 1e-12);
    }
}

TEST(Auroc, LabelSwapAndMonotoneTransforms) {
    std::mt19937_64 g(32);
    for (int trial = 0; trial < 300; ++trial) {
        auto s = random_labeled(g, trial % 3 == 0);
        const double a = auroc(s);
        auto swapped = s;
        for (auto& x : swapped) x.label = x.label == Label::human ? Label::machine : Label::human;
        EXPECT_DOUBLE_EQ(a + auroc(swapped), 1.0);

        auto transformed = s;
        for (auto& x : transformed) x.score = std::exp(x.score);
        EXPECT_DOUBLE_EQ(auroc(transformed), a);
        for (auto& x : transformed) x.score = 3.0 * std::log(x.score) - 7.0;
        EXPECT_DOUBLE_EQ(auroc(transformed), a);

        EXPECT_DOUBLE_EQ(auroc_oriented(s, Orientation::higher_is_machine), a);
        EXPECT_DOUBLE_EQ(auroc_oriented(s, Orientation::lower_is_machine), 1.0 - a);
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
    }
}

TEST(Auroc, DetectorScoresInvariantUnderExp) {
    const auto texts = toy_texts();
    const auto c = make_train_corpus(Tokenizer{}, texts);
    const auto [q, r] = derive_pair(c, NgramOptions{}, PairMode::lower_order);
    std::vector<LabeledScore> bino, fast;
    for (std::size_t i = 0; i < c.documents.size(); ++i) {
        const Label l = i % 3 == 0 ? Label::machine : Label::human;
        bino.push_back({binoculars_score(q, r, DocView{c.documents[i]}).score, l});
        fast.push_back({fastdetect_analytic_score(q, r, DocView{c.documents[i]}).score, l});
    }
    for (auto* s : {&bino, &fast}) {
        auto e = *s;
        for (auto& x : e) x.score = std::exp(x.score);
        EXPECT_DOUBLE_EQ(auroc(e), auroc(*s));
    }
}

TEST(Accuracy, Examples) {
    const auto s = labeled({0.8, 0.9, 0.7}, {0.1, 0.2});
    EXPECT_DOUBLE_EQ(accuracy_at(s, 0.45, Orientation::higher_is_machine), 1.0);
    EXPECT_DOUBLE_EQ(accuracy_at(s, 0.45, Orientation::lower_is_machine), 0.0);

    std::mt19937_64 g(4);
    for (int trial = 0; trial < 100; ++trial) {
        const auto r = random_labeled(g, false);
        const double th = 0.1234;
        EXPECT_NEAR(accuracy_at(r, th, Orientation::higher_is_machine) + accuracy_at(r, th, Orientation::lower_is_machine),
                    1.0, 1e-12);
    }
    EXPECT_THROW(accuracy_at(labeled({1.0}, {}), 0.0, Orientation::higher_is_machine), DataError);
}

TEST(Accuracy, BandRecoversBimodalMachineScores) {
    std::mt19937_64 g(12);
    std::normal_distribution<double> low(-3.0, 0.4), high(3.0, 0.4), mid(0.0, 0.5);
    std::vector<double> machine, human;
    for (int i = 0; i < 200; ++i) machine.push_back(i % 2 ? low(g) : high(g));
    for (int i = 0; i < 200; ++i) human.push_back(mid(g));
    const auto s = labeled(machine, human);
    EXPECT_GT(accuracy_band(s, -1.5, 1.5), 0.9);
    EXPECT_LT(std::max(accuracy_at(s, 0.0, Orientation::higher_is_machine), accuracy_at(s, 0.0, Orientation::lower_is_machine)),
              0.75);
    EXPECT_THROW(accuracy_band(s, 1.0, -1.0), ParameterError);
}

TEST(Histogram, BinsAndEdges) {
    const auto s = labeled({1.0, 2.0, 3.0}, {0.0, 0.5});
    const auto h = histogram(s, 6);
    EXPECT_EQ(h.lo, 0.0);
    EXPECT_EQ(h.hi, 3.0);
    EXPECT_EQ(h.human, (std::vector<std::size_t>{1, 1, 0, 0, 0, 0}));
    EXPECT_EQ(h.machine, (std::vector<std::size_t>{0, 0, 1, 0, 1, 1}));
    const auto j = to_json(h);
    EXPECT_EQ(j["edges"].size(), 7u);
    EXPECT_DOUBLE_EQ(j["edges"][2].get<double>(), 1.0);

    const auto flat = histogram(labeled({2.0}, {2.0, 2.0}));
    EXPECT_EQ(flat.human[0], 2u);
    EXPECT_EQ(flat.machine[0], 1u);
    EXPECT_EQ(flat.human.size(), 50u);
    EXPECT_THROW(histogram(std::vector<LabeledScore>{}), DataError);
}

TEST(Evaluate, Report) {
    const auto s = labeled({0.1, 0.2}, {0.8, 0.9, 0.7});
    const auto r = evaluate(s, Orientation::lower_is_machine, 0.5);
    EXPECT_EQ(r.n_machine, 2u);
    EXPECT_EQ(r.n_human, 3u);
    EXPECT_DOUBLE_EQ(r.auroc, 0.0);
    EXPECT_DOUBLE_EQ(r.auroc_oriented, 1.0);
    ASSERT_TRUE(r.accuracy_at_threshold);
    EXPECT_DOUBLE_EQ(r.accuracy_at_threshold->second, 1.0);
}

// ---------------------------------------------------------------------------
// correlation

namespace {

double brute_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> brute_ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0, equal = 0;
        for (double w : v) less += w < v[i], equal += w == v[i];
        r[i] = less + (equal + 1) / 2;
    }
    return r;
}

double brute_kendall(const std::vector<double>& x, const std::vector<double>& y) {
    double c = 0, d = 0, tx = 0, ty = 0, n0 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            n0 += 1;
            const double a = x[i] - x[j], b = y[i] - y[j];
            if (a == 0) tx += 1;
            if (b == 0) ty += 1;
            if (a * b > 0) c += 1;
            if (a * b < 0) d += 1;
        }
    }
    return (c - d) / std::sqrt((n0 - tx) * (n0 - ty));
}

bool constant_vec(const std::vector<double>& v) {
    return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

}  // namespace

TEST(Correlation, PearsonExamples) {
    const std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y, z;
    for (double v : x) y.push_back(2 * v + 1), z.push_back(-v);
    EXPECT_NEAR(pearson(x, y).coef, 1.0, 1e-15);
    EXPECT_NEAR(pearson(x, z).coef, -1.0, 1e-15);
    const auto r = pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2});
    EXPECT_NEAR(r.coef, 0.5, 1e-15);
    // t = 1/sqrt(3) on 1 degree of freedom (Cauchy): p = 1 - (2/pi) atan(t) = 2/3.
    EXPECT_NEAR(r.p_value, 2.0 / 3.0, 1e-12);
}

TEST(Correlation, SpearmanExamples) {
    const std::vector<double> x{1, 2, 3, 4, 5, 6};
    std::vector<double> cube, rev;
    for (double v : x) cube.push_back(v * v * v - 40), rev.push_back(-std::exp(v));
    EXPECT_NEAR(spearman(x, cube).coef, 1.0, 1e-15);
    EXPECT_NEAR(spearman(x, rev).coef, -1.0, 1e-15);
    const auto r = spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4});
    EXPECT_NEAR(r.coef, 0.8, 1e-15);
    // 2 degrees of freedom: p = 1 - t / sqrt(t^2 + 2), t = 0.8 sqrt(2 / 0.36).
    const double t = 0.8 * std::sqrt(2.0 / 0.36);
    EXPECT_NEAR(r.p_value, 1.0 - t / std::sqrt(t * t + 2.0), 1e-12);
    EXPECT_NEAR(r.p_value, 0.2, 1e-12);
}

TEST(Correlation, KendallExamples) {
    const std::vector<double> x{1, 2, 3, 4, 5};
    EXPECT_NEAR(kendall(x, x).coef, 1.0, 1e-15);
    const auto k = kendall(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2});
    EXPECT_NEAR(k.coef, 1.0 / 3.0, 1e-15);
    // No ties: S = 1, Var(S) = n(n-1)(2n+5)/18.
    EXPECT_NEAR(k.p_value, std::erfc(1.0 / std::sqrt(3.0 * 2.0 * 11.0 / 18.0) / std::sqrt(2.0)), 1e-12);
    EXPECT_THROW(kendall(x, std::vector<double>(5, 2.0)), DataError);
}

TEST(Correlation, Errors) {
    const std::vector<double> a{1, 2, 3}, b{1, 2}, c{4, 4, 4};
    EXPECT_THROW(pearson(a, b), DimensionError);
    EXPECT_THROW(pearson(b, b), DataError);
    EXPECT_THROW(pearson(a, c), DataError);
    EXPECT_THROW(spearman(c, a), DataError);
    EXPECT_THROW(pearson(a, std::vector<double>{1, NAN, 2}), DataError);
}

TEST(Correlation, MatchesBruteForceOracles) {
    std::mt19937_64 g(99);
    std::uniform_int_distribution<int> len(3, 50), small(0, 5);
    std::normal_distribution<double> nd(0.0, 2.0);
    int checked = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = static_cast<std::size_t>(len(g));
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = trial % 2 ? small(g) : nd(g);
            y[i] = trial % 3 ? 0.5 * x[i] + nd(g) : small(g);
        }
        if (constant_vec(x) || constant_vec(y)) continue;
        ++checked;
        EXPECT_NEAR(pearson(x, y).coef, brute_pearson(x, y), 1e-9);
        EXPECT_NEAR(spearman(x, y).coef, brute_pearson(brute_ranks(x), brute_ranks(y)), 1e-9);
        EXPECT_NEAR(kendall(x, y).coef, brute_kendall(x, y), 1e-9);
        for (const auto& c : {pearson(x, y), spearman(x, y), kendall(x, y)}) {
            EXPECT_GE(c.p_value, 0.0);
            EXPECT_LE(c.p_value, 1.0);
        }
    }
    EXPECT_GE(checked, 450);
}

TEST(Correlation, LinearMapsAndRankIdentity) {
    std::mt19937_64 g(7);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(20), y(20), ax(20);
        for (auto& v : x) v = nd(g);
        for (auto& v : y) v = nd(g);
        const double a = trial % 2 ? 2.5 : -0.3;
        for (std::size_t i = 0; i < x.size(); ++i) ax[i] = a * x[i] + 4.0;
        EXPECT_NEAR(pearson(x, ax).coef, a > 0 ? 1.0 : -1.0, 1e-12);
        EXPECT_NEAR(spearman(x, y).coef, pearson(brute_ranks(x), brute_ranks(y)).coef, 1e-12);
    }
}

TEST(Correlation, PValuesShrinkWithStrongerEvidence) {
    std::vector<double> x, y;
    for (int i = 0; i < 30; ++i) x.push_back(i), y.push_back(i + 3.0 * std::sin(i * 1.7));
    const auto strong = pearson(x, y);
    std::vector<double> y2;
    for (int i = 0; i < 30; ++i) y2.push_back(0.1 * i + 3.0 * std::sin(i * 1.7));
    const auto weak = pearson(x, y2);
    EXPECT_LT(strong.p_value, weak.p_value);
    EXPECT_LT(strong.p_value, 1e-6);
    EXPECT_LT(kendall(x, y).p_value, kendall(x, y2).p_value);
}

TEST(CorrelationTable, IdentityAndNegation) {
    const std::vector<double> au{0.9, 0.4, 0.7, 0.1, 0.55};
    std::vector<double> neg;
    for (double v : au) neg.push_back(-v);
    const std::vector<std::string> names{"same", "negated"};
    const std::vector<std::vector<double>> cols{au, neg};
    const auto rows = correlation_table(names, cols, au);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].indicator, "same");
    for (const auto& c : {rows[0].pearson, rows[0].spearman, rows[0].kendall}) EXPECT_NEAR(c.coef, 1.0, 1e-12);
    for (const auto& c : {rows[1].pearson, rows[1].spearman, rows[1].kendall}) EXPECT_NEAR(c.coef, -1.0, 1e-12);
}

TEST(CorrelationTable, Errors) {
    const std::vector<double> two{0.1, 0.2};
    const std::vector<std::string> one{"x"};
    EXPECT_THROW(correlation_table(one, std::vector<std::vector<double>>{two}, two), DataError);
    const std::vector<double> au{0.1, 0.2, 0.3};
    EXPECT_THROW(correlation_table(one, std::vector<std::vector<double>>{}, au), DimensionError);
    try {
        correlation_table(one, std::vector<std::vector<double>>{{5, 5, 5}}, au);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("'x'"), std::string::npos);
    }
}
