// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "detectlab/adapters.hpp"
#include "detectlab/distribution.hpp"

namespace detectlab {

// What two providers must agree on before their distributions can be compared.
struct VocabInfo {
    std::size_t size = 0;
    TokenId bos_id = 0;
    TokenId eos_id = 1;
    std::string fingerprint;

    friend bool operator==(const VocabInfo&, const VocabInfo&) = default;
};

/**
 * Source of next-token distributions p(. | context) over a fixed vocabulary,
 * plus the text codec that maps documents onto that vocabulary.
 */
class NextTokenProvider {
public:
    virtual ~NextTokenProvider() = default;

    virtual VocabInfo vocab_info() const = 0;
    virtual TokenDistribution next_distribution(std::span<const TokenId> context) const = 0;
    virtual std::string name() const = 0;

    virtual std::vector<TokenId> encode(std::string_view text) const = 0;
    virtual std::string decode(std::span<const TokenId> ids) const = 0;

    // False when queries must be serialized by the caller.
    virtual bool concurrent_queries() const { return true; }
};

using ProviderPtr = std::shared_ptr<const NextTokenProvider>;

inline bool same_vocabulary(const NextTokenProvider& a, const NextTokenProvider& b) {
    return a.vocab_info() == b.vocab_info();
}

// q~(y | ctx) = (1/N) sum_i adapter_i(q(. | ctx))(y).
class MixtureProvider final : public NextTokenProvider {
public:
    MixtureProvider(ProviderPtr base, MixtureSpec mix) : base_(std::move(base)), mix_(std::move(mix)) {
        if (!base_) throw ParameterError("mixture provider needs a base provider");
        if (mix_.members.empty()) throw ParameterError("mixture needs at least one member");
        for (const auto& m : mix_.members) m.validate();
    }

    VocabInfo vocab_info() const override { return base_->vocab_info(); }

    TokenDistribution next_distribution(std::span<const TokenId> context) const override {
        return apply_mixture(mix_, base_->next_distribution(context), context);
    }

    std::string name() const override {
        return base_->name() + "+mixture" + std::to_string(mix_.members.size());
    }

    std::vector<TokenId> encode(std::string_view text) const override { return base_->encode(text); }
    std::string decode(std::span<const TokenId> ids) const override { return base_->decode(ids); }
    bool concurrent_queries() const override { return base_->concurrent_queries(); }

    const MixtureSpec& mixture() const noexcept { return mix_; }

private:
    ProviderPtr base_;
    MixtureSpec mix_;
};

}  // namespace detectlab
