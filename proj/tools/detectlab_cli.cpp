// SPDX-License-Identifier: Apache-2.0
//
// detectlab: train n-gram models, generate under sampling adapters, measure
// lexical diversity, score with zero-shot detectors and evaluate.
//
// Exit status: 0 success, 1 internal error, 2 usage or data error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "detectlab/detectlab.hpp"

namespace fs = std::filesystem;
using namespace detectlab;

namespace {

struct UsageError : Error {
    using Error::Error;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os << content;
    if (!os) throw DataError("write failed: " + path.string());
}

bool has_ext(const std::string& path, std::string_view ext) { return fs::path(path).extension() == ext; }

// One document per non-blank line, or the `text` field of each JSONL record.
std::vector<std::string> read_documents(const std::string& path) {
    std::vector<std::string> docs;
    if (has_ext(path, ".jsonl")) {
        for (auto& r : read_records_file(path)) docs.push_back(std::move(r.text));
        return docs;
    }
    std::istringstream is(read_file(path));
    std::string line;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) docs.push_back(line);
    }
    return docs;
}

struct Prompt {
    std::string prompt;
    std::optional<std::string> text;
};

// JSONL objects {"prompt": .., "text": ..?} or one prompt per line.
std::vector<Prompt> read_prompts(const std::string& path) {
    std::vector<Prompt> out;
    std::istringstream is(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    const bool jsonl = has_ext(path, ".jsonl");
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!jsonl) {
            out.push_back({line, std::nullopt});
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            Prompt p{j.at("prompt").get<std::string>(), std::nullopt};
            if (j.contains("text")) p.text = j["text"].get<std::string>();
            out.push_back(std::move(p));
        } catch (const std::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (out.empty()) throw DataError("no prompts in " + path);
    return out;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

// "ngram:PATH", "bridge:COMMAND ARGS..." or a bare model path.
ProviderPtr open_provider(const std::string& spec) {
    if (spec.rfind("bridge:", 0) == 0) {
        auto argv = split_ws(spec.substr(7));
        auto client = std::make_shared<bridge::Client>(std::make_unique<bridge::SubprocessTransport>(argv));
        bridge::ProviderOptions opts;
        opts.name = "bridge:" + (argv.empty() ? std::string() : fs::path(argv.front()).filename().string());
        return std::make_shared<bridge::BridgeProvider>(client, opts);
    }
    const std::string path = spec.rfind("ngram:", 0) == 0 ? spec.substr(6) : spec;
    return std::make_shared<NgramModel>(NgramModel::load_file(path));
}

std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag) {
    if (opt->count() > 0) return flag;
    if (const char* env = std::getenv("DETECTLAB_SEED")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used != std::string_view(env).size()) throw std::invalid_argument(env);
            return v;
        } catch (const std::exception&) {
            throw UsageError(std::string("DETECTLAB_SEED is not an unsigned integer: ") + env);
        }
    }
    return 0;
}

std::string file_key(const std::string& spec) {
    std::string out = spec;
    for (char& c : out) {
        if (c == ':' || c == '/') c = '_';
    }
    return out;
}

// File stem without the trailing ".scores" added by `score`.
std::string config_key(const std::string& path) {
    std::string stem = fs::path(path).stem().string();
    const std::string suffix = ".scores";
    if (stem.size() > suffix.size() && stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0) {
        stem.resize(stem.size() - suffix.size());
    }
    return stem;
}

std::vector<AdapterSpec> parse_grid(const std::vector<std::string>& specs) {
    if (specs.empty() || (specs.size() == 1 && specs[0] == "default")) return default_grid();
    std::vector<AdapterSpec> grid;
    for (const auto& s : specs) grid.push_back(parse_adapter_spec(s));
    return grid;
}

MixtureSpec parse_mixture(const std::string& arg) {
    if (arg == "default-grid") return MixtureSpec::default_grid();
    MixtureSpec m;
    std::stringstream ss(arg);
    std::string part;
    while (std::getline(ss, part, ',')) m.members.push_back(parse_adapter_spec(part));
    if (m.members.empty()) throw ParameterError("empty mixture");
    return m;
}

// <bos> followed by the encoded text; everything after <bos> is scored.
std::vector<TokenId> frame(const NextTokenProvider& p, const std::string& text) {
    std::vector<TokenId> doc{p.vocab_info().bos_id};
    for (TokenId id : p.encode(text)) doc.push_back(id);
    return doc;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string corpus, out, aux_out, aux_mode = "subsample", tokenizer = "word", name = "ngram";
    int order = 3;
    double add_k = 0.1;
    std::vector<double> weights;
    bool no_case_fold = false;
};

int cmd_train(const TrainArgs& a) {
    const auto texts = read_documents(a.corpus);
    if (texts.empty()) throw DataError("corpus " + a.corpus + " has no documents");
    NgramOptions opts;
    opts.order = a.order;
    opts.add_k = a.add_k;
    opts.weights = a.weights;
    opts.name = a.name;
    if (a.tokenizer == "word") opts.tokenizer.mode = TokenizerMode::whitespace_word;
    else if (a.tokenizer == "char") opts.tokenizer.mode = TokenizerMode::character;
    else throw UsageError("--tokenizer must be word or char");
    opts.tokenizer.case_folding = !a.no_case_fold;

    const TrainCorpus corpus = make_train_corpus(opts.tokenizer, texts);
    std::size_t tokens = 0;
    for (const auto& d : corpus.documents) tokens += d.size() - 2;

    if (a.aux_out.empty()) {
        NgramModel::train(corpus, opts).save_file(a.out);
    } else {
        PairMode mode;
        if (a.aux_mode == "subsample") mode = PairMode::subsample;
        else if (a.aux_mode == "lower_order") mode = PairMode::lower_order;
        else if (a.aux_mode == "identical") mode = PairMode::identical;
        else throw UsageError("--aux-mode must be subsample, lower_order or identical");
        auto [q, r] = derive_pair(corpus, opts, mode);
        q.save_file(a.out);
        r.save_file(a.aux_out);
    }
    std::cerr << "trained order-" << a.order << " model: |V| = " << corpus.vocab.size() << ", "
              << corpus.documents.size() << " documents, " << tokens << " tokens -> " << a.out << "\n";
    return 0;
}

struct PrepareArgs {
    std::string corpus, train_out, prompts_out;
    std::size_t every = 4;
    std::size_t prompt_words = 8;
    std::size_t max_words = 128;
};

// Every `every`-th document becomes a (prompt, human continuation) pair; the
// rest are training text.
int cmd_prepare(const PrepareArgs& a) {
    if (a.every < 2) throw UsageError("--holdout-every must be >= 2");
    const auto docs = read_documents(a.corpus);
    const Tokenizer tok;
    std::string train, prompts;
    std::size_t held = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i % a.every != a.every - 1) {
            train += docs[i] + "\n";
            continue;
        }
        const auto words = tok.pieces(docs[i]);
        if (words.size() <= a.prompt_words) continue;
        std::string prompt, text;
        for (std::size_t w = 0; w < words.size() && w < a.prompt_words + a.max_words; ++w) {
            std::string& dst = w < a.prompt_words ? prompt : text;
            if (!dst.empty()) dst += ' ';
            dst += words[w];
        }
        nlohmann::ordered_json j;
        j["prompt"] = prompt;
        j["text"] = text;
        prompts += j.dump() + "\n";
        ++held;
    }
    if (held == 0) throw DataError("no document long enough to hold out");
    write_file(a.train_out, train);
    write_file(a.prompts_out, prompts);
    std::cerr << "prepared " << docs.size() - held << " training documents, " << held << " prompts\n";
    return 0;
}

struct GenerateArgs {
    std::string provider, prompts, out_dir;
    std::vector<std::string> grid;
    std::uint64_t seed = 0;
    std::size_t max_tokens = 512;
    unsigned jobs = default_jobs();
};

int cmd_generate(const GenerateArgs& a, std::uint64_t seed) {
    const auto prompts = read_prompts(a.prompts);
    const auto grid = parse_grid(a.grid);
    const ProviderPtr provider = open_provider(a.provider);
    std::vector<std::string> texts;
    for (const auto& p : prompts) texts.push_back(p.prompt);

    const auto records = generate_grid(*provider, texts, grid, seed, a.max_tokens, a.jobs);
    fs::create_directories(a.out_dir);

    nlohmann::ordered_json manifest;
    manifest["base_seed"] = seed;
    manifest["provider"] = provider->name();
    manifest["max_tokens"] = a.max_tokens;
    manifest["prompts"] = a.prompts;
    manifest["n_prompts"] = prompts.size();
    auto entries = nlohmann::ordered_json::array();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::vector<GeneratedRecord> cell;
        auto seeds = nlohmann::ordered_json::array();
        for (std::size_t p = 0; p < prompts.size(); ++p) {
            cell.push_back(records[p * grid.size() + g]);
            seeds.push_back(*cell.back().seed);
        }
        const std::string spec = to_string(grid[g]);
        const std::string file = file_key(spec) + ".jsonl";
        std::ostringstream os;
        write_records(os, cell);
        write_file(fs::path(a.out_dir) / file, os.str());
        nlohmann::ordered_json e;
        e["adapter"] = spec;
        e["file"] = file;
        e["seeds"] = std::move(seeds);
        entries.push_back(std::move(e));
    }
    manifest["grid"] = std::move(entries);

    std::vector<GeneratedRecord> human;
    for (std::size_t p = 0; p < prompts.size(); ++p) {
        if (!prompts[p].text) continue;
        GeneratedRecord r;
        r.id = "p" + std::to_string(p) + "/human";
        r.source = Source::human;
        r.prompt_text = prompts[p].prompt;
        r.text = *prompts[p].text;
        r.provider_name = "human";
        human.push_back(std::move(r));
    }
    if (!human.empty()) {
        std::ostringstream os;
        write_records(os, human, false);
        write_file(fs::path(a.out_dir) / "human.jsonl", os.str());
        manifest["human"] = "human.jsonl";
    }
    write_file(fs::path(a.out_dir) / "manifest.json", manifest.dump(2) + "\n");
    std::cerr << "generated " << records.size() << " records (" << prompts.size() << " prompts x " << grid.size()
              << " settings) into " << a.out_dir << "\n";
    return 0;
}

struct DiversityArgs {
    std::vector<std::string> corpora;
    std::string out, per_text_out, q;
    double threshold = 0.72;
    bool completed_only = false;
};

int cmd_diversity(const DiversityArgs& a) {
    const MtldRule rule = a.completed_only ? MtldRule::completed_only : MtldRule::partial_factor;
    ProviderPtr q;
    if (!a.q.empty()) q = open_provider(a.q);
    std::ostringstream tsv;
    tsv << "parameter\tmtld\thapax\tsimpson\tzipf_alpha\theaps_beta\tavg_length_tokens\tperplexity\tmtld_rule\n";
    nlohmann::ordered_json per_text = nlohmann::ordered_json::array();
    for (const auto& path : a.corpora) {
        const auto records = read_records_file(path);
        if (records.empty()) throw DataError("corpus " + path + " is empty");
        const auto rep = corpus_report(records, diversity_tokenizer(), a.threshold, rule);
        std::string name = config_key(path);
        if (records.front().adapter) name = to_string(*records.front().adapter);
        std::string ppl = "NA";
        if (q) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& r : records) {
                const auto doc = frame(*q, r.text);
                if (doc.size() < 2) continue;
                sum += perplexity_score(*q, DocView{doc, 1});
                ++n;
            }
            if (n > 0) ppl = fmt(sum / static_cast<double>(n));
        }
        tsv << name << '\t' << fmt(rep.mtld) << '\t' << fmt(rep.hapax_ratio) << '\t' << fmt(rep.simpson) << '\t'
            << (rep.zipf_alpha ? fmt(*rep.zipf_alpha) : "NA") << '\t' << (rep.heaps_beta ? fmt(*rep.heaps_beta) : "NA")
            << '\t' << fmt(rep.avg_length_tokens) << '\t' << ppl << '\t'
            << (rule == MtldRule::partial_factor ? "partial_factor" : "completed_only") << '\n';
        for (const auto& t : rep.per_text) {
            nlohmann::ordered_json j;
            j["corpus"] = name;
            j["record_id"] = t.id;
            j["length"] = t.length;
            j["mtld"] = t.mtld;
            j["hapax_ratio"] = t.hapax_ratio;
            j["simpson"] = t.simpson;
            per_text.push_back(std::move(j));
        }
    }
    if (a.out.empty()) std::cout << tsv.str();
    else write_file(a.out, tsv.str());
    if (!a.per_text_out.empty()) {
        std::string lines;
        for (const auto& j : per_text) lines += j.dump() + "\n";
        write_file(a.per_text_out, lines);
    }
    return 0;
}

struct ScoreArgs {
    std::string detector = "binoculars", q, r, mixture, aggregation = "token_mean", out_dir, per_token_dir;
    std::vector<std::string> corpora;
    std::size_t mc_samples = 10000;
    unsigned jobs = default_jobs();
};

int cmd_score(const ScoreArgs& a, std::uint64_t seed) {
    DetectorConfig cfg;
    cfg.kind = parse_detector_kind(a.detector);
    cfg.mc_samples = a.mc_samples;
    cfg.seed = seed;
    if (a.aggregation == "token_mean") cfg.aggregation = FastAggregation::token_mean;
    else if (a.aggregation == "sequence") cfg.aggregation = FastAggregation::sequence;
    else throw UsageError("--aggregation must be token_mean or sequence");
    if (cfg.kind != DetectorKind::perplexity && a.r.empty()) {
        throw UsageError(a.detector + " needs an auxiliary model (--r)");
    }
    cfg.q = open_provider(a.q);
    if (!a.r.empty()) cfg.r = open_provider(a.r);
    cfg.validate();
    std::string detector = a.detector;
    if (!a.mixture.empty()) {
        cfg = with_mixture_main(cfg, parse_mixture(a.mixture));
        detector += "+mixture";
    }
    const unsigned jobs = (cfg.q->concurrent_queries() && (!cfg.r || cfg.r->concurrent_queries())) ? a.jobs : 1;

    fs::create_directories(a.out_dir);
    if (!a.per_token_dir.empty()) fs::create_directories(a.per_token_dir);
    for (const auto& path : a.corpora) {
        const auto records = read_records_file(path);
        std::vector<std::optional<DetectionScore>> scores(records.size());
        parallel_for(records.size(), jobs, [&](std::size_t i) {
            const auto doc = frame(*cfg.q, records[i].text);
            if (doc.size() < 2) return;
            scores[i] = score_document(cfg, DocView{doc, 1}, records[i].id);
        });
        std::string lines, sidecar;
        std::size_t empty = 0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (!scores[i]) {
                ++empty;
                continue;
            }
            nlohmann::ordered_json j;
            j["record_id"] = records[i].id;
            j["detector"] = detector;
            j["score"] = scores[i]->score;
            j["skipped_steps"] = scores[i]->skipped_steps;
            lines += j.dump() + "\n";
            if (!a.per_token_dir.empty()) {
                nlohmann::ordered_json t;
                t["record_id"] = records[i].id;
                auto steps = nlohmann::ordered_json::array();
                for (const auto& d : scores[i]->per_token) {
                    steps.push_back({d.token_id, d.surprisal, d.expected, d.sigma, d.skipped});
                }
                t["per_token"] = std::move(steps);
                sidecar += t.dump() + "\n";
            }
        }
        const std::string stem = config_key(path);
        write_file(fs::path(a.out_dir) / (stem + ".scores.jsonl"), lines);
        if (!a.per_token_dir.empty()) write_file(fs::path(a.per_token_dir) / (stem + ".tokens.jsonl"), sidecar);
        if (empty > 0) std::cerr << path << ": skipped " << empty << " empty texts\n";
    }
    return 0;
}

struct ScoreFile {
    std::string key;
    std::map<std::string, std::vector<double>> by_detector;
};

ScoreFile read_scores(const std::string& path) {
    ScoreFile f{config_key(path), {}};
    std::istringstream is(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            f.by_detector[j.at("detector").get<std::string>()].push_back(j.at("score").get<double>());
        } catch (const std::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return f;
}

// Orientation from the detector field, e.g. "binoculars+mixture".
Orientation orientation_for(const std::string& detector) {
    return orientation_of(parse_detector_kind(detector.substr(0, detector.find('+'))));
}

struct EvaluateArgs {
    std::vector<std::string> human, machine;
    std::string out, hist_out;
    std::optional<double> threshold;
};

int cmd_evaluate(const EvaluateArgs& a) {
    if (a.human.empty() || a.machine.empty()) throw UsageError("need at least one --human and one --machine file");
    std::map<std::string, std::vector<double>> human;
    for (const auto& p : a.human) {
        for (auto& [d, v] : read_scores(p).by_detector) human[d].insert(human[d].end(), v.begin(), v.end());
    }
    std::vector<ScoreFile> machine;
    for (const auto& p : a.machine) machine.push_back(read_scores(p));
    std::set<std::string> keys;
    for (const auto& m : machine) {
        if (!keys.insert(m.key).second) throw UsageError("duplicate configuration " + m.key);
    }

    std::ostringstream tsv;
    tsv << "detector";
    for (const auto& m : machine) tsv << '\t' << m.key;
    tsv << '\n';
    nlohmann::ordered_json hist;
    for (const auto& [det, hs] : human) {
        const Orientation o = orientation_for(det);
        std::vector<std::string> oriented, raw, acc;
        nlohmann::ordered_json dh;
        for (const auto& m : machine) {
            const auto it = m.by_detector.find(det);
            if (it == m.by_detector.end() || it->second.empty() || hs.empty()) {
                throw DataError("detector " + det + " needs both human and machine scores for " + m.key);
            }
            std::vector<LabeledScore> s;
            for (double x : hs) s.push_back({x, Label::human});
            for (double x : it->second) s.push_back({x, Label::machine});
            const EvalReport rep = evaluate(s, o, a.threshold);
            oriented.push_back(fmt(rep.auroc_oriented));
            raw.push_back(fmt(rep.auroc));
            if (rep.accuracy_at_threshold) acc.push_back(fmt(rep.accuracy_at_threshold->second));
            dh[m.key] = to_json(rep.histogram);
        }
        auto row = [&](const std::string& name, const std::vector<std::string>& vals) {
            tsv << name;
            for (const auto& v : vals) tsv << '\t' << v;
            tsv << '\n';
        };
        row(det, oriented);
        row(det + ":raw", raw);
        if (!acc.empty()) row(det + ":accuracy", acc);
        hist[det] = std::move(dh);
    }
    for (const auto& m : machine) {
        for (const auto& [det, _] : m.by_detector) {
            if (!human.contains(det)) throw DataError("detector " + det + " in " + m.key + " has no human scores");
        }
    }
    if (a.out.empty()) std::cout << tsv.str();
    else write_file(a.out, tsv.str());
    if (!a.hist_out.empty()) write_file(a.hist_out, hist.dump(1) + "\n");
    return 0;
}

struct IndicatorArgs {
    std::string q, r, out;
    std::vector<std::string> corpora;
    double epsilon = 1e-10;
};

int cmd_indicators(const IndicatorArgs& a) {
    const ProviderPtr q = open_provider(a.q);
    const ProviderPtr r = open_provider(a.r);
    std::ostringstream tsv;
    bool header = false;
    for (const auto& path : a.corpora) {
        const auto records = read_records_file(path);
        if (records.empty() || !records.front().adapter) throw DataError(path + " is not a generated corpus");
        const AdapterSpec spec = *records.front().adapter;
        std::vector<std::vector<TokenId>> docs;
        std::vector<DocView> views;
        for (const auto& rec : records) {
            auto doc = frame(*q, rec.prompt_text);
            const std::size_t first = doc.size();
            for (TokenId id : q->encode(rec.text)) doc.push_back(id);
            if (doc.size() > first) {
                docs.push_back(std::move(doc));
                views.push_back({});
                views.back().first_scored = first;
            }
        }
        for (std::size_t i = 0; i < docs.size(); ++i) views[i].tokens = docs[i];
        const IndicatorRow row = indicator_suite(spec, *q, *r, views, SmoothingConfig{a.epsilon});
        if (!header) {
            tsv << "config";
            for (const auto& [k, _] : row.values) tsv << '\t' << k;
            tsv << '\n';
            header = true;
        }
        tsv << config_key(path);
        for (const auto& [_, v] : row.values) tsv << '\t' << fmt(v);
        tsv << '\n';
    }
    if (a.out.empty()) std::cout << tsv.str();
    else write_file(a.out, tsv.str());
    return 0;
}

std::vector<std::vector<std::string>> read_tsv(const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(read_file(path));
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string c;
        while (std::getline(ls, c, '\t')) cells.push_back(c);
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw DataError(path + " is empty");
    return rows;
}

double parse_number(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError(where + ": '" + s + "' is not a number");
    }
}

struct CorrelateArgs {
    std::string indicators, aurocs, detector, out;
};

int cmd_correlate(const CorrelateArgs& a) {
    const auto ind = read_tsv(a.indicators);
    const auto grid = read_tsv(a.aurocs);
    const auto& configs = grid.front();
    const std::vector<std::string>* row = nullptr;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (a.detector.empty() ? grid[i][0].find(':') == std::string::npos : grid[i][0] == a.detector) {
            row = &grid[i];
            break;
        }
    }
    if (!row) throw DataError("no AUROC row" + (a.detector.empty() ? std::string() : " for " + a.detector) + " in " + a.aurocs);
    if (row->size() != configs.size()) throw DataError(a.aurocs + ": ragged row");
    std::map<std::string, double> auroc_of;
    for (std::size_t c = 1; c < configs.size(); ++c) auroc_of[configs[c]] = parse_number((*row)[c], a.aurocs);

    const auto& names_row = ind.front();
    std::set<std::string> seen;
    std::vector<std::string> missing;
    std::vector<double> aurocs;
    std::vector<std::vector<double>> cols(names_row.size() - 1);
    for (std::size_t i = 1; i < ind.size(); ++i) {
        const auto& r = ind[i];
        if (r.size() != names_row.size()) throw DataError(a.indicators + ": ragged row " + std::to_string(i + 1));
        seen.insert(r[0]);
        const auto it = auroc_of.find(r[0]);
        if (it == auroc_of.end()) {
            missing.push_back(r[0] + " (no AUROC)");
            continue;
        }
        aurocs.push_back(it->second);
        for (std::size_t c = 1; c < r.size(); ++c) cols[c - 1].push_back(parse_number(r[c], a.indicators));
    }
    for (const auto& [k, _] : auroc_of) {
        if (!seen.contains(k)) missing.push_back(k + " (no indicators)");
    }
    if (!missing.empty()) {
        std::string msg = "configuration keys do not match:";
        for (const auto& m : missing) msg += " " + m;
        throw DataError(msg);
    }
    const std::vector<std::string> names(names_row.begin() + 1, names_row.end());
    const auto table = correlation_table(names, cols, aurocs);
    std::ostringstream tsv;
    tsv << "indicator\tpearson\tpearson_p\tspearman\tspearman_p\tkendall\tkendall_p\n";
    for (const auto& r : table) {
        tsv << r.indicator << '\t' << fmt(r.pearson.coef) << '\t' << fmt(r.pearson.p_value) << '\t'
            << fmt(r.spearman.coef) << '\t' << fmt(r.spearman.p_value) << '\t' << fmt(r.kendall.coef) << '\t'
            << fmt(r.kendall.p_value) << '\n';
    }
    if (a.out.empty()) std::cout << tsv.str();
    else write_file(a.out, tsv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sampling-adapter sweeps and zero-shot machine-text detection"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML config file; [subcommand] sections, flags override it");
    std::uint64_t seed_flag = 0;
    unsigned jobs = default_jobs();

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train an n-gram model on a corpus (one document per line)");
    train->add_option("--corpus", ta.corpus, "Corpus file (.txt lines or .jsonl records)")->required();
    train->add_option("--out", ta.out, "Model output path")->required();
    train->add_option("--order", ta.order, "n-gram order")->check(CLI::Range(1, 10));
    train->add_option("--add-k", ta.add_k, "Additive smoothing constant")->check(CLI::PositiveNumber);
    train->add_option("--weights", ta.weights, "Interpolation weights, lowest order first");
    train->add_option("--tokenizer", ta.tokenizer, "word or char");
    train->add_flag("--no-case-fold", ta.no_case_fold, "Keep letter case");
    train->add_option("--name", ta.name, "Model name recorded in outputs");
    train->add_option("--aux-out", ta.aux_out, "Also write an auxiliary model");
    train->add_option("--aux-mode", ta.aux_mode, "subsample, lower_order or identical");

    PrepareArgs pa;
    auto* prepare = app.add_subcommand("prepare", "Split a raw corpus into training text and held-out prompts");
    prepare->add_option("--corpus", pa.corpus)->required();
    prepare->add_option("--train-out", pa.train_out)->required();
    prepare->add_option("--prompts-out", pa.prompts_out)->required();
    prepare->add_option("--holdout-every", pa.every, "Hold out every n-th document");
    prepare->add_option("--prompt-words", pa.prompt_words);
    prepare->add_option("--max-words", pa.max_words, "Length cap of the human continuation");

    GenerateArgs ga;
    auto* generate_cmd = app.add_subcommand("generate", "Generate one corpus per adapter setting");
    generate_cmd->add_option("--provider", ga.provider, "ngram:PATH, bridge:COMMAND or a model path")->required();
    generate_cmd->add_option("--prompts", ga.prompts, "Prompts (.jsonl with prompt/text, or one per line)")->required();
    generate_cmd->add_option("--out-dir", ga.out_dir)->required();
    generate_cmd->add_option("--grid", ga.grid, "Adapter specs, or 'default' for the 37-setting grid");
    auto* gen_seed = generate_cmd->add_option("--seed", seed_flag);
    generate_cmd->add_option("--max-tokens", ga.max_tokens)->check(CLI::PositiveNumber);
    generate_cmd->add_option("--jobs", jobs)->check(CLI::PositiveNumber);

    DiversityArgs da;
    auto* diversity = app.add_subcommand("diversity", "Lexical diversity table, one row per corpus");
    diversity->add_option("corpora", da.corpora)->required();
    diversity->add_option("--out", da.out, "TSV output (default stdout)");
    diversity->add_option("--per-text", da.per_text_out, "Per-text JSONL output");
    diversity->add_option("--q", da.q, "Model for the perplexity column");
    diversity->add_option("--threshold", da.threshold, "MTLD threshold");
    diversity->add_flag("--mtld-completed-only", da.completed_only, "Ignore the trailing partial MTLD factor");

    ScoreArgs sa;
    auto* score = app.add_subcommand("score", "Score corpora with a zero-shot detector");
    score->add_option("--detector", sa.detector, "perplexity, binoculars, fastdetect_mc or fastdetect_analytic");
    score->add_option("--q", sa.q, "Main model")->required();
    score->add_option("--r", sa.r, "Auxiliary model");
    score->add_option("--mixture", sa.mixture, "'default-grid' or comma-separated adapter specs");
    score->add_option("--mc-samples", sa.mc_samples);
    score->add_option("--aggregation", sa.aggregation, "token_mean or sequence");
    score->add_option("--out-dir", sa.out_dir)->required();
    score->add_option("--per-token-dir", sa.per_token_dir);
    auto* score_seed = score->add_option("--seed", seed_flag);
    score->add_option("--jobs", jobs)->check(CLI::PositiveNumber);
    score->add_option("corpora", sa.corpora)->required();

    EvaluateArgs ea;
    double threshold = 0.0;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "AUROC grid and histograms from score files");
    evaluate_cmd->add_option("--human", ea.human)->required();
    evaluate_cmd->add_option("--machine", ea.machine)->required();
    evaluate_cmd->add_option("--out", ea.out, "AUROC TSV (default stdout)");
    evaluate_cmd->add_option("--histograms", ea.hist_out, "Histogram JSON");
    auto* thr = evaluate_cmd->add_option("--threshold", threshold, "Also report accuracy at this threshold");

    IndicatorArgs ia;
    auto* indicators = app.add_subcommand("indicators", "Distribution indicators per generated corpus");
    indicators->add_option("--q", ia.q)->required();
    indicators->add_option("--r", ia.r)->required();
    indicators->add_option("--out", ia.out);
    indicators->add_option("--epsilon", ia.epsilon, "Smoothing constant");
    indicators->add_option("corpora", ia.corpora)->required();

    CorrelateArgs ca;
    auto* correlate = app.add_subcommand("correlate", "Correlate indicators with detector AUROC");
    correlate->add_option("--indicators", ca.indicators)->required();
    correlate->add_option("--aurocs", ca.aurocs)->required();
    correlate->add_option("--detector", ca.detector, "AUROC row (default: first oriented row)");
    correlate->add_option("--out", ca.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*train) return cmd_train(ta);
        if (*prepare) return cmd_prepare(pa);
        if (*generate_cmd) {
            ga.jobs = jobs;
            return cmd_generate(ga, resolve_seed(gen_seed, seed_flag));
        }
        if (*diversity) return cmd_diversity(da);
        if (*score) {
            sa.jobs = jobs;
            return cmd_score(sa, resolve_seed(score_seed, seed_flag));
        }
        if (*evaluate_cmd) {
            if (thr->count() > 0) ea.threshold = threshold;
            return cmd_evaluate(ea);
        }
        if (*indicators) return cmd_indicators(ia);
        if (*correlate) return cmd_correlate(ca);
    } catch (const ProviderError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const SupportError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
