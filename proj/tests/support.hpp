// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "detectlab/detectlab.hpp"

namespace testing_support {

using namespace detectlab;

// Distributions served from a callback on the context; word codec over ids.
class TableProvider final : public NextTokenProvider {
public:
    using Fn = std::function<TokenDistribution(std::span<const TokenId>)>;

    TableProvider(std::size_t vocab, Fn fn, std::string fingerprint = "table", TokenId bos = 0, TokenId eos = 1)
        : vocab_(vocab), fn_(std::move(fn)), fp_(std::move(fingerprint)), bos_(bos), eos_(eos) {}

    static std::shared_ptr<TableProvider> constant(TokenDistribution d, std::string fp = "table") {
        const std::size_t n = d.size();
        return std::make_shared<TableProvider>(n, [d](std::span<const TokenId>) { return d; }, std::move(fp));
    }

    VocabInfo vocab_info() const override { return {vocab_, bos_, eos_, fp_}; }
    TokenDistribution next_distribution(std::span<const TokenId> ctx) const override { return fn_(ctx); }
    std::string name() const override { return "table"; }

    std::vector<TokenId> encode(std::string_view text) const override {
        std::vector<TokenId> out;
        std::string s(text);
        std::size_t pos = 0;
        while (pos < s.size()) {
            const auto sp = s.find(' ', pos);
            const auto w = s.substr(pos, sp == std::string::npos ? std::string::npos : sp - pos);
            if (!w.empty()) out.push_back(static_cast<TokenId>(std::stoul(w.substr(1))));
            if (sp == std::string::npos) break;
            pos = sp + 1;
        }
        return out;
    }

    std::string decode(std::span<const TokenId> ids) const override {
        std::string s;
        for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? " t" : "t") + std::to_string(ids[i]);
        return s;
    }

private:
    std::size_t vocab_;
    Fn fn_;
    std::string fp_;
    TokenId bos_, eos_;
};

// Integer weights in [0, max_w] with at least one positive entry.
inline std::vector<int> random_weights(std::mt19937_64& g, std::size_t n, int max_w, bool allow_zero = true) {
    std::uniform_int_distribution<int> u(allow_zero ? 0 : 1, max_w);
    std::vector<int> w(n);
    do {
        for (auto& x : w) x = u(g);
    } while (std::accumulate(w.begin(), w.end(), 0) == 0);
    return w;
}

inline TokenDistribution from_ints(const std::vector<int>& w) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    std::vector<double> p(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) p[i] = w[i] / total;
    return TokenDistribution(p);
}

inline TokenDistribution random_dist(std::mt19937_64& g, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> w(n);
    for (auto& x : w) x = u(g) + 1e-3;
    return TokenDistribution::from_weights(w);
}

inline std::vector<std::string> toy_texts() {
    return {"the cat sat on the mat", "the dog sat on the log", "a cat and a dog met on the road",
            "the bird sang in the tree", "a dog ran to the tree", "the cat ran to the road",
            "a bird sat on the dog", "the log lay on the road", "a mat lay in the tree",
            "the dog and the cat sang", "a tree stood by the road", "the bird met a cat"};
}

inline std::vector<std::string> toy_corpus() {
    std::ifstream is(std::string(DETECTLAB_DATA_DIR) + "/toy_corpus.txt");
    if (!is) throw std::runtime_error("toy corpus not found");
    std::vector<std::string> out;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

inline std::vector<std::string> words_of(std::string_view text) {
    return Tokenizer{TokenizerMode::whitespace_word, false}.pieces(text);
}

}  // namespace testing_support
