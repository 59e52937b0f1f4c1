// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * Interpolated add-k n-gram language model.
 *
 *   p(y | ctx) = sum_o w_o (c_o(s_o, y) + k) / (c_o(s_o) + k |V|)
 *
 * where s_o is the longest suffix of ctx of length <= o - 1. Near the start
 * of a document the suffix is shorter than o - 1 and is counted as such, so
 * training and querying agree without padding. Every order contributes at
 * least k / (c + k|V|) to every token, giving full support.
 */

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "detectlab/errors.hpp"
#include "detectlab/provider.hpp"
#include "detectlab/tokenizer.hpp"

namespace detectlab {

// Documents framed as <bos> ... <eos> over one closed vocabulary.
struct TrainCorpus {
    Vocabulary vocab;
    std::vector<std::vector<TokenId>> documents;
};

inline TrainCorpus make_train_corpus(const Tokenizer& tok, std::span<const std::string> texts) {
    if (texts.empty()) throw DataError("training corpus is empty");
    TrainCorpus c{build_vocabulary(tok, texts), {}};
    c.documents.reserve(texts.size());
    for (const auto& t : texts) {
        std::vector<TokenId> doc{c.vocab.bos_id()};
        for (TokenId id : tok.encode(c.vocab, t)) doc.push_back(id);
        doc.push_back(c.vocab.eos_id());
        c.documents.push_back(std::move(doc));
    }
    return c;
}

struct NgramOptions {
    int order = 3;
    double add_k = 0.1;
    std::vector<double> weights;  // one per order, lowest first; empty = uniform
    Tokenizer tokenizer;
    std::string name = "ngram";
};

class NgramModel final : public NextTokenProvider {
public:
    struct CountTable {
        std::uint64_t total = 0;
        std::vector<std::pair<TokenId, std::uint64_t>> next;  // sorted by id

        friend bool operator==(const CountTable&, const CountTable&) = default;
    };
    using ContextKey = std::vector<TokenId>;

    static NgramModel train(const TrainCorpus& corpus, const NgramOptions& opts) {
        if (corpus.documents.empty()) throw DataError("training corpus is empty");
        NgramModel m;
        m.init(corpus.vocab, opts);

        std::vector<std::map<ContextKey, std::map<TokenId, std::uint64_t>>> raw(static_cast<std::size_t>(m.order_));
        for (const auto& doc : corpus.documents) {
            for (TokenId id : doc) {
                if (id >= m.vocab_.size()) throw DataError("training token id out of range");
            }
            for (std::size_t t = 1; t < doc.size(); ++t) {
                for (int o = 1; o <= m.order_; ++o) {
                    const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(o - 1), t);
                    ContextKey key(doc.begin() + static_cast<std::ptrdiff_t>(t - len), doc.begin() + static_cast<std::ptrdiff_t>(t));
                    ++raw[static_cast<std::size_t>(o - 1)][std::move(key)][doc[t]];
                }
            }
        }
        for (std::size_t o = 0; o < raw.size(); ++o) {
            for (auto& [key, nexts] : raw[o]) {
                CountTable tab;
                for (const auto& [id, c] : nexts) {
                    tab.total += c;
                    tab.next.emplace_back(id, c);
                }
                m.tables_[o].emplace(key, std::move(tab));
            }
        }
        return m;
    }

    VocabInfo vocab_info() const override {
        return {vocab_.size(), vocab_.bos_id(), vocab_.eos_id(), vocab_.fingerprint()};
    }

    TokenDistribution next_distribution(std::span<const TokenId> context) const override {
        const std::size_t v = vocab_.size();
        const double kv = add_k_ * static_cast<double>(v);
        std::vector<double> out(v, 0.0);
        double floor = 0.0;
        ContextKey key;
        for (int o = 1; o <= order_; ++o) {
            const double w = weights_[static_cast<std::size_t>(o - 1)];
            if (w == 0.0) continue;
            const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(o - 1), context.size());
            key.assign(context.end() - static_cast<std::ptrdiff_t>(len), context.end());
            const auto& tab = tables_[static_cast<std::size_t>(o - 1)];
            const auto it = tab.find(key);
            if (it == tab.end()) {
                floor += w / static_cast<double>(v);
                continue;
            }
            const double denom = static_cast<double>(it->second.total) + kv;
            floor += w * add_k_ / denom;
            for (const auto& [id, c] : it->second.next) out[id] += w * static_cast<double>(c) / denom;
        }
        for (double& p : out) p += floor;
        return TokenDistribution(std::move(out));
    }

    std::string name() const override { return name_; }

    std::vector<TokenId> encode(std::string_view text) const override { return tokenizer_.encode(vocab_, text); }
    std::string decode(std::span<const TokenId> ids) const override { return tokenizer_.decode(vocab_, ids); }

    // sum_t log p(doc[t] | doc[<t]) for a <bos> ... <eos> framed document.
    double sequence_log_prob(std::span<const TokenId> doc) const {
        if (doc.size() < 2 || doc.front() != vocab_.bos_id() || doc.back() != vocab_.eos_id()) {
            throw DataError("document must start with <bos> and end with <eos>");
        }
        double lp = 0.0;
        for (std::size_t t = 1; t < doc.size(); ++t) {
            if (doc[t] >= vocab_.size()) throw DataError("token id out of range");
            lp += std::log(next_distribution(doc.first(t))[doc[t]]);
        }
        return lp;
    }

    // exp(-sequence_log_prob / steps), steps = predicted tokens including <eos>.
    double perplexity(std::span<const TokenId> doc) const {
        return std::exp(-sequence_log_prob(doc) / static_cast<double>(doc.size() - 1));
    }

    int order() const noexcept { return order_; }
    double add_k() const noexcept { return add_k_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const Vocabulary& vocabulary() const noexcept { return vocab_; }
    const Tokenizer& tokenizer() const noexcept { return tokenizer_; }
    const std::map<ContextKey, CountTable>& table(int o) const { return tables_.at(static_cast<std::size_t>(o - 1)); }
    void set_name(std::string n) { name_ = std::move(n); }

    void save(std::ostream& os) const {
        os << "detectlab-ngram v1\n";
        os << "name " << name_ << '\n';
        os << "order " << order_ << '\n';
        os << "add_k " << fmt_double(add_k_) << '\n';
        os << "weights";
        for (double w : weights_) os << ' ' << fmt_double(w);
        os << '\n';
        os << "tokenizer " << (tokenizer_.mode == TokenizerMode::whitespace_word ? "whitespace_word" : "character") << ' '
           << (tokenizer_.case_folding ? 1 : 0) << '\n';
        os << "vocab " << vocab_.size() << ' ' << vocab_.bos_id() << ' ' << vocab_.eos_id() << ' ' << vocab_.unk_id() << '\n';
        for (const auto& t : vocab_.tokens()) os << t << '\n';
        for (int o = 1; o <= order_; ++o) {
            const auto& tab = tables_[static_cast<std::size_t>(o - 1)];
            os << "table " << o << ' ' << tab.size() << '\n';
            for (const auto& [key, ct] : tab) {
                os << key.size();
                for (TokenId id : key) os << ' ' << id;
                os << " | " << ct.total;
                for (const auto& [id, c] : ct.next) os << ' ' << id << ':' << c;
                os << '\n';
            }
        }
        os << "end\n";
    }

    static NgramModel load(std::istream& is) {
        auto fail = [](const std::string& why) -> NgramModel { throw DataError("bad model file: " + why); };
        std::string line;
        auto next_line = [&]() -> std::string& {
            if (!std::getline(is, line)) throw DataError("bad model file: unexpected end of file");
            return line;
        };
        if (next_line() != "detectlab-ngram v1") return fail("missing header");

        NgramOptions opts;
        if (next_line().rfind("name ", 0) != 0) return fail("expected name");
        opts.name = line.substr(5);
        {
            std::istringstream ss(next_line());
            std::string tag;
            if (!(ss >> tag >> opts.order) || tag != "order") return fail("expected order");
        }
        {
            std::istringstream ss(next_line());
            std::string tag;
            if (!(ss >> tag >> opts.add_k) || tag != "add_k") return fail("expected add_k");
        }
        {
            std::istringstream ss(next_line());
            std::string tag;
            ss >> tag;
            if (tag != "weights") return fail("expected weights");
            double w;
            while (ss >> w) opts.weights.push_back(w);
        }
        {
            std::istringstream ss(next_line());
            std::string tag, mode;
            int fold = 0;
            if (!(ss >> tag >> mode >> fold) || tag != "tokenizer") return fail("expected tokenizer");
            if (mode == "whitespace_word") opts.tokenizer.mode = TokenizerMode::whitespace_word;
            else if (mode == "character") opts.tokenizer.mode = TokenizerMode::character;
            else return fail("unknown tokenizer mode");
            opts.tokenizer.case_folding = fold != 0;
        }
        std::size_t n = 0;
        TokenId bos = 0, eos = 0, unk = 0;
        {
            std::istringstream ss(next_line());
            std::string tag;
            if (!(ss >> tag >> n >> bos >> eos >> unk) || tag != "vocab") return fail("expected vocab");
        }
        std::vector<std::string> tokens;
        tokens.reserve(n);
        for (std::size_t i = 0; i < n; ++i) tokens.push_back(next_line());

        NgramModel m;
        m.init(Vocabulary(std::move(tokens), bos, eos, unk), opts);
        for (int o = 1; o <= m.order_; ++o) {
            std::istringstream hs(next_line());
            std::string tag;
            int got_o = 0;
            std::size_t rows = 0;
            if (!(hs >> tag >> got_o >> rows) || tag != "table" || got_o != o) return fail("expected table header");
            auto& tab = m.tables_[static_cast<std::size_t>(o - 1)];
            for (std::size_t r = 0; r < rows; ++r) {
                std::istringstream ss(next_line());
                std::size_t len = 0;
                ss >> len;
                ContextKey key(len);
                for (auto& id : key) ss >> id;
                std::string bar;
                CountTable ct;
                if (!(ss >> bar >> ct.total) || bar != "|") return fail("bad table row");
                std::string entry;
                while (ss >> entry) {
                    const auto colon = entry.find(':');
                    if (colon == std::string::npos) return fail("bad count entry");
                    ct.next.emplace_back(static_cast<TokenId>(std::stoul(entry.substr(0, colon))),
                                         static_cast<std::uint64_t>(std::stoull(entry.substr(colon + 1))));
                }
                tab.emplace(std::move(key), std::move(ct));
            }
        }
        if (next_line() != "end") return fail("missing end marker");
        return m;
    }

    void save_file(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw DataError("cannot write model file: " + path);
        save(os);
        if (!os) throw DataError("failed writing model file: " + path);
    }

    static NgramModel load_file(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw DataError("cannot open model file: " + path);
        return load(is);
    }

    friend bool operator==(const NgramModel& a, const NgramModel& b) {
        return a.order_ == b.order_ && a.add_k_ == b.add_k_ && a.weights_ == b.weights_ && a.vocab_ == b.vocab_ &&
               a.tokenizer_ == b.tokenizer_ && a.tables_ == b.tables_;
    }

private:
    NgramModel() = default;

    void init(Vocabulary vocab, const NgramOptions& opts) {
        if (opts.order < 1) throw ParameterError("n-gram order must be >= 1");
        if (!(opts.add_k > 0.0)) throw ParameterError("add_k must be > 0");
        order_ = opts.order;
        add_k_ = opts.add_k;
        if (opts.weights.empty()) {
            weights_.assign(static_cast<std::size_t>(order_), 1.0 / order_);
        } else {
            if (opts.weights.size() != static_cast<std::size_t>(order_)) {
                throw ParameterError("need one interpolation weight per order");
            }
            double s = 0.0;
            for (double w : opts.weights) {
                if (!(w >= 0.0)) throw ParameterError("interpolation weights must be non-negative");
                s += w;
            }
            if (std::abs(s - 1.0) > 1e-9) throw ParameterError("interpolation weights must sum to 1");
            weights_ = opts.weights;
        }
        vocab_ = std::move(vocab);
        tokenizer_ = opts.tokenizer;
        name_ = opts.name;
        tables_.assign(static_cast<std::size_t>(order_), {});
    }

    static std::string fmt_double(double v) {
        std::ostringstream ss;
        ss << std::setprecision(17) << v;
        return ss.str();
    }

    int order_ = 1;
    double add_k_ = 0.1;
    std::vector<double> weights_;
    Vocabulary vocab_;
    Tokenizer tokenizer_;
    std::string name_ = "ngram";
    std::vector<std::map<ContextKey, CountTable>> tables_;
};

enum class PairMode { subsample, lower_order, identical };

/**
 * Main/auxiliary model pair over one shared vocabulary. `subsample` trains
 * the auxiliary model on every document except each tenth (indices 9, 19,
 * ...); `lower_order` drops one order; `identical` returns two equal models.
 */
inline std::pair<NgramModel, NgramModel> derive_pair(const TrainCorpus& corpus, const NgramOptions& opts,
                                                     PairMode mode = PairMode::subsample) {
    NgramModel q = NgramModel::train(corpus, opts);
    switch (mode) {
        case PairMode::identical: {
            NgramModel r = q;
            return {std::move(q), std::move(r)};
        }
        case PairMode::lower_order: {
            if (opts.order < 2) throw DataError("lower_order pair needs order >= 2");
            NgramOptions ro = opts;
            ro.order = opts.order - 1;
            ro.weights.clear();
            ro.name = opts.name + "-aux";
            return {std::move(q), NgramModel::train(corpus, ro)};
        }
        case PairMode::subsample: {
            if (corpus.documents.size() < 10) throw DataError("corpus too small to split (need >= 10 documents)");
            TrainCorpus sub{corpus.vocab, {}};
            for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
                if (i % 10 != 9) sub.documents.push_back(corpus.documents[i]);
            }
            NgramOptions ro = opts;
            ro.name = opts.name + "-aux";
            return {std::move(q), NgramModel::train(sub, ro)};
        }
    }
    throw ParameterError("unknown pair mode");
}

}  // namespace detectlab
