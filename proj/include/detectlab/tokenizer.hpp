// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detectlab/distribution.hpp"

namespace detectlab {

inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kUnkToken = "<unk>";

enum class TokenizerMode { whitespace_word, character };

/**
 * Desk-scale tokenizer shared by the n-gram model and the diversity metrics.
 *
 * Word mode splits on whitespace, optionally lower-cases ASCII, and strips
 * ASCII punctuation; pieces that become empty are dropped. The special
 * tokens `<bos>`, `<eos>`, `<unk>` pass through verbatim so decoded text
 * re-encodes to the same ids. Character mode emits one token per UTF-8
 * code point with whitespace runs collapsed to a single space.
 */
struct Tokenizer {
    TokenizerMode mode = TokenizerMode::whitespace_word;
    bool case_folding = true;

    std::vector<std::string> pieces(std::string_view text) const {
        return mode == TokenizerMode::whitespace_word ? word_pieces(text) : char_pieces(text);
    }

    std::vector<TokenId> encode(const Vocabulary& vocab, std::string_view text) const {
        std::vector<TokenId> ids;
        for (const auto& p : pieces(text)) ids.push_back(vocab.id_of(p));
        return ids;
    }

    std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids) const {
        std::string out;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (mode == TokenizerMode::whitespace_word && i > 0) out += ' ';
            out += vocab.token(ids[i]);
        }
        return out;
    }

    // The text decode(encode(text)) yields for an in-vocabulary text.
    std::string normalize(std::string_view text) const {
        const auto ps = pieces(text);
        std::string out;
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (mode == TokenizerMode::whitespace_word && i > 0) out += ' ';
            out += ps[i];
        }
        return out;
    }

    friend bool operator==(const Tokenizer&, const Tokenizer&) = default;

private:
    static bool is_special(std::string_view w) { return w == kBosToken || w == kEosToken || w == kUnkToken; }

    std::vector<std::string> word_pieces(std::string_view text) const {
        std::vector<std::string> out;
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
            std::size_t j = i;
            while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
            if (j > i) {
                std::string_view raw = text.substr(i, j - i);
                if (is_special(raw)) {
                    out.emplace_back(raw);
                } else {
                    std::string w;
                    w.reserve(raw.size());
                    for (char c : raw) {
                        const auto uc = static_cast<unsigned char>(c);
                        if (uc < 0x80 && std::ispunct(uc)) continue;
                        w += (case_folding && uc < 0x80) ? static_cast<char>(std::tolower(uc)) : c;
                    }
                    if (!w.empty()) out.push_back(std::move(w));
                }
            }
            i = j;
        }
        return out;
    }

    std::vector<std::string> char_pieces(std::string_view text) const {
        std::vector<std::string> out;
        std::size_t i = 0;
        bool pending_space = false;
        while (i < text.size()) {
            const auto c = static_cast<unsigned char>(text[i]);
            if (c < 0x80 && std::isspace(c)) {
                pending_space = !out.empty();
                ++i;
                continue;
            }
            if (pending_space) {
                out.emplace_back(" ");
                pending_space = false;
            }
            std::size_t len = 1;
            if (c >= 0xf0) len = 4;
            else if (c >= 0xe0) len = 3;
            else if (c >= 0xc0) len = 2;
            len = std::min(len, text.size() - i);
            std::string cp(text.substr(i, len));
            if (case_folding && len == 1) cp[0] = static_cast<char>(std::tolower(c));
            out.push_back(std::move(cp));
            i += len;
        }
        return out;
    }
};

/**
 * Closed vocabulary from training texts: `<bos>`, `<eos>`, `<unk>` at ids
 * 0, 1, 2, then every observed piece in lexicographic order.
 */
inline Vocabulary build_vocabulary(const Tokenizer& tok, std::span<const std::string> texts) {
    std::map<std::string, int> seen;
    for (const auto& t : texts) {
        for (auto& p : tok.pieces(t)) seen.emplace(std::move(p), 0);
    }
    std::vector<std::string> tokens{std::string(kBosToken), std::string(kEosToken), std::string(kUnkToken)};
    for (const auto& [w, _] : seen) {
        if (w != kBosToken && w != kEosToken && w != kUnkToken) tokens.push_back(w);
    }
    return Vocabulary(std::move(tokens), 0, 1, 2);
}

}  // namespace detectlab
