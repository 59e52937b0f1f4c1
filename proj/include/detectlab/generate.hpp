// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * Autoregressive generation under one sampling adapter, and the JSONL corpus
 * format shared by every command.
 *
 * One step: query the provider on the current context, adapt the
 * distribution, draw one token with the run's seeded Rng. Generation stops
 * at <eos> (not emitted) or after max_tokens tokens. The prompt conditions
 * the model but is stripped from the saved text.
 */

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "detectlab/adapters.hpp"
#include "detectlab/errors.hpp"
#include "detectlab/parallel.hpp"
#include "detectlab/provider.hpp"
#include "detectlab/rng.hpp"

namespace detectlab {

struct GenerationConfig {
    AdapterSpec adapter;
    std::size_t max_tokens = 512;
    std::uint64_t seed = 0;
    std::vector<TokenId> prompt;
};

enum class Source { human, machine };

struct GeneratedRecord {
    std::string id;
    Source source = Source::machine;
    std::optional<AdapterSpec> adapter;
    std::optional<std::uint64_t> seed;
    std::string prompt_text;
    std::string text;
    std::vector<TokenId> token_ids;
    std::string provider_name;

    friend bool operator==(const GeneratedRecord&, const GeneratedRecord&) = default;
};

inline GeneratedRecord generate(const NextTokenProvider& provider, const GenerationConfig& cfg) {
    cfg.adapter.validate();
    if (cfg.max_tokens < 1) throw ParameterError("max_tokens must be >= 1");
    const VocabInfo vi = provider.vocab_info();

    std::vector<TokenId> context;
    context.reserve(1 + cfg.prompt.size() + cfg.max_tokens);
    context.push_back(vi.bos_id);
    context.insert(context.end(), cfg.prompt.begin(), cfg.prompt.end());
    const std::size_t prompt_end = context.size();

    Rng rng(cfg.seed);
    for (std::size_t step = 0; step < cfg.max_tokens; ++step) {
        TokenDistribution adapted;
        try {
            adapted = apply(cfg.adapter, provider.next_distribution(context), context);
        } catch (const ProviderError& e) {
            throw ProviderError(e.what(), step);
        }
        const TokenId y = sample_token(adapted, rng);
        if (y == vi.eos_id) break;
        context.push_back(y);
    }

    GeneratedRecord rec;
    rec.source = Source::machine;
    rec.adapter = cfg.adapter;
    rec.seed = cfg.seed;
    rec.token_ids.assign(context.begin() + static_cast<std::ptrdiff_t>(prompt_end), context.end());
    rec.prompt_text = provider.decode(cfg.prompt);
    rec.text = provider.decode(rec.token_ids);
    rec.provider_name = provider.name();
    return rec;
}

inline std::string record_id_for(std::size_t prompt_index, const AdapterSpec& spec) {
    return "p" + std::to_string(prompt_index) + "/" + to_string(spec);
}

// Seed for one (prompt, spec) cell: base_seed ^ fnv1a64("<prompt index>|<spec string>").
inline std::uint64_t cell_seed(std::uint64_t base_seed, std::size_t prompt_index, const AdapterSpec& spec) {
    return derive_seed(base_seed, std::to_string(prompt_index) + "|" + to_string(spec));
}

/**
 * One record per (prompt, spec), ordered prompt-major then by grid position,
 * whatever the number of jobs. Prompts are raw texts encoded by the provider.
 */
inline std::vector<GeneratedRecord> generate_grid(const NextTokenProvider& provider, std::span<const std::string> prompts,
                                                  std::span<const AdapterSpec> grid, std::uint64_t base_seed,
                                                  std::size_t max_tokens = 512, unsigned jobs = 1) {
    if (prompts.empty()) throw ParameterError("generate_grid needs at least one prompt");
    if (grid.empty()) throw ParameterError("generate_grid needs at least one adapter spec");
    std::vector<std::vector<TokenId>> encoded;
    encoded.reserve(prompts.size());
    for (const auto& p : prompts) encoded.push_back(provider.encode(p));

    std::vector<GeneratedRecord> out(prompts.size() * grid.size());
    if (!provider.concurrent_queries()) jobs = 1;
    parallel_for(out.size(), jobs, [&](std::size_t cell) {
        const std::size_t pi = cell / grid.size();
        const AdapterSpec& spec = grid[cell % grid.size()];
        GenerationConfig cfg{spec, max_tokens, cell_seed(base_seed, pi, spec), encoded[pi]};
        GeneratedRecord rec;
        try {
            rec = generate(provider, cfg);
        } catch (const ProviderError& e) {
            throw ProviderError(std::string("cell (prompt ") + std::to_string(pi) + ", " + to_string(spec) + "): " + e.what());
        }
        rec.id = record_id_for(pi, spec);
        rec.prompt_text = prompts[pi];
        out[cell] = std::move(rec);
    });
    return out;
}

// ---------------------------------------------------------------------------
// JSONL corpus I/O
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const GeneratedRecord& r, bool with_token_ids = true) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["source"] = r.source == Source::human ? "human" : "machine";
    j["adapter"] = r.adapter ? nlohmann::ordered_json(to_string(*r.adapter)) : nlohmann::ordered_json(nullptr);
    j["seed"] = r.seed ? nlohmann::ordered_json(*r.seed) : nlohmann::ordered_json(nullptr);
    j["prompt_text"] = r.prompt_text;
    j["text"] = r.text;
    j["provider_name"] = r.provider_name;
    if (with_token_ids) j["token_ids"] = r.token_ids;
    return j;
}

inline GeneratedRecord record_from_json(const nlohmann::json& j) {
    GeneratedRecord r;
    r.id = j.at("id").get<std::string>();
    const auto src = j.at("source").get<std::string>();
    if (src == "human") r.source = Source::human;
    else if (src == "machine") r.source = Source::machine;
    else throw DataError("unknown source '" + src + "'");
    if (j.contains("adapter") && !j["adapter"].is_null()) r.adapter = parse_adapter_spec(j["adapter"].get<std::string>());
    if (j.contains("seed") && !j["seed"].is_null()) r.seed = j["seed"].get<std::uint64_t>();
    r.prompt_text = j.value("prompt_text", "");
    r.text = j.at("text").get<std::string>();
    r.provider_name = j.value("provider_name", "");
    if (j.contains("token_ids")) r.token_ids = j["token_ids"].get<std::vector<TokenId>>();
    if (r.source == Source::machine && (!r.adapter || !r.seed)) {
        throw DataError("machine record '" + r.id + "' must carry adapter and seed");
    }
    return r;
}

inline void write_records(std::ostream& os, std::span<const GeneratedRecord> records, bool with_token_ids = true) {
    for (const auto& r : records) os << to_json(r, with_token_ids).dump() << '\n';
}

inline void write_records_file(const std::string& path, std::span<const GeneratedRecord> records, bool with_token_ids = true) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path);
    write_records(os, records, with_token_ids);
}

// Errors name the 1-based line number.
inline std::vector<GeneratedRecord> read_records(std::istream& is, const std::string& origin = "<stream>") {
    std::vector<GeneratedRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw DataError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<GeneratedRecord> read_records_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path);
    return read_records(is, path);
}

}  // namespace detectlab
