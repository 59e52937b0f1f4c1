// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * Client side of the external model bridge: newline-delimited JSON over a
 * line transport (stdio of a child process by default).
 *
 *   -> {"type":"handshake"}
 *   <- {"vocab_size":V,"tokenizer_fingerprint":"..","bos_id":b,"eos_id":e}
 *   -> {"request_id":"7","context_token_ids":[..],"top_n":"full","return_space":"prob"}
 *   <- {"request_id":"7","entries":[[id,value],..],"tail_mass":0,"vocab_size":V,"tokenizer_fingerprint":".."}
 *   -> {"type":"tokenize","request_id":"8","text":".."}      <- {"request_id":"8","token_ids":[..]}
 *   -> {"type":"detokenize","request_id":"9","token_ids":[..]} <- {"request_id":"9","text":".."}
 *
 * Any response may instead carry {"request_id":..,"error":".."}.
 */

#include <fcntl.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "detectlab/distribution.hpp"
#include "detectlab/errors.hpp"
#include "detectlab/provider.hpp"

namespace detectlab::bridge {

inline constexpr double kMassTolerance = 1e-6;

enum class ReturnSpace { prob, logprob };

inline std::string_view space_name(ReturnSpace s) { return s == ReturnSpace::prob ? "prob" : "logprob"; }

struct Request {
    std::string request_id;
    std::optional<std::vector<TokenId>> context_token_ids;
    std::optional<std::string> context_text;
    std::optional<std::size_t> top_n;  // empty = "full"
    ReturnSpace return_space = ReturnSpace::logprob;

    friend bool operator==(const Request&, const Request&) = default;
};

struct Response {
    std::string request_id;
    std::vector<std::pair<TokenId, double>> entries;
    double tail_mass = 0.0;
    std::size_t vocab_size = 0;
    std::string tokenizer_fingerprint;

    friend bool operator==(const Response&, const Response&) = default;
};

struct Handshake {
    std::size_t vocab_size = 0;
    std::string tokenizer_fingerprint;
    TokenId bos_id = 0;
    TokenId eos_id = 0;

    friend bool operator==(const Handshake&, const Handshake&) = default;
};

inline void validate(const Request& r) {
    if (r.context_token_ids.has_value() == r.context_text.has_value()) {
        throw DataError("request must carry exactly one of context_token_ids and context_text");
    }
    if (r.top_n && *r.top_n < 1) throw DataError("top_n must be >= 1 or \"full\"");
}

inline nlohmann::ordered_json to_json(const Request& r) {
    validate(r);
    nlohmann::ordered_json j;
    j["request_id"] = r.request_id;
    if (r.context_token_ids) j["context_token_ids"] = *r.context_token_ids;
    if (r.context_text) j["context_text"] = *r.context_text;
    j["top_n"] = r.top_n ? nlohmann::ordered_json(*r.top_n) : nlohmann::ordered_json("full");
    j["return_space"] = space_name(r.return_space);
    return j;
}

inline Request request_from_json(const nlohmann::json& j) {
    Request r;
    r.request_id = j.at("request_id").get<std::string>();
    if (j.contains("context_token_ids")) r.context_token_ids = j["context_token_ids"].get<std::vector<TokenId>>();
    if (j.contains("context_text")) r.context_text = j["context_text"].get<std::string>();
    const auto& tn = j.at("top_n");
    if (tn.is_string()) {
        if (tn.get<std::string>() != "full") throw DataError("top_n must be an integer or \"full\"");
    } else {
        const auto n = tn.get<std::int64_t>();
        if (n < 1) throw DataError("top_n must be >= 1 or \"full\"");
        r.top_n = static_cast<std::size_t>(n);
    }
    const auto space = j.value("return_space", std::string("logprob"));
    if (space == "prob") r.return_space = ReturnSpace::prob;
    else if (space == "logprob") r.return_space = ReturnSpace::logprob;
    else throw DataError("unknown return_space '" + space + "'");
    validate(r);
    return r;
}

inline nlohmann::ordered_json to_json(const Response& r) {
    nlohmann::ordered_json j;
    j["request_id"] = r.request_id;
    auto entries = nlohmann::ordered_json::array();
    for (const auto& [id, v] : r.entries) entries.push_back({id, v});
    j["entries"] = std::move(entries);
    j["tail_mass"] = r.tail_mass;
    j["vocab_size"] = r.vocab_size;
    j["tokenizer_fingerprint"] = r.tokenizer_fingerprint;
    return j;
}

inline Response response_from_json(const nlohmann::json& j) {
    if (j.contains("error")) {
        throw ProviderError("bridge error for request " + j.value("request_id", std::string("?")) + ": " +
                            j["error"].get<std::string>());
    }
    Response r;
    r.request_id = j.at("request_id").get<std::string>();
    for (const auto& e : j.at("entries")) {
        if (!e.is_array() || e.size() != 2) throw DataError("bridge entry must be [token_id, value]");
        r.entries.emplace_back(e[0].get<TokenId>(), e[1].get<double>());
    }
    r.tail_mass = j.at("tail_mass").get<double>();
    r.vocab_size = j.at("vocab_size").get<std::size_t>();
    r.tokenizer_fingerprint = j.at("tokenizer_fingerprint").get<std::string>();
    return r;
}

inline nlohmann::ordered_json to_json(const Handshake& h) {
    nlohmann::ordered_json j;
    j["vocab_size"] = h.vocab_size;
    j["tokenizer_fingerprint"] = h.tokenizer_fingerprint;
    j["bos_id"] = h.bos_id;
    j["eos_id"] = h.eos_id;
    return j;
}

inline Handshake handshake_from_json(const nlohmann::json& j) {
    if (j.contains("error")) throw ProviderError("bridge handshake failed: " + j["error"].get<std::string>());
    Handshake h;
    h.vocab_size = j.at("vocab_size").get<std::size_t>();
    h.tokenizer_fingerprint = j.at("tokenizer_fingerprint").get<std::string>();
    h.bos_id = j.at("bos_id").get<TokenId>();
    h.eos_id = j.at("eos_id").get<TokenId>();
    if (h.vocab_size == 0) throw DataError("bridge reports an empty vocabulary");
    if (h.bos_id >= h.vocab_size || h.eos_id >= h.vocab_size) throw DataError("bridge special ids out of range");
    return h;
}

/**
 * Response -> full distribution. Entries are converted to probabilities, the
 * tail mass is spread uniformly over tokens not returned, and the total must
 * be 1 within kMassTolerance. The result is renormalized only when the total
 * misses 1 by more than the distribution tolerance.
 */
inline TokenDistribution to_distribution(const Response& r, ReturnSpace space, std::size_t expected_vocab) {
    if (r.vocab_size != expected_vocab) {
        throw DimensionError("bridge response vocab_size " + std::to_string(r.vocab_size) + " != " +
                             std::to_string(expected_vocab));
    }
    std::vector<double> p(expected_vocab, 0.0);
    std::vector<bool> seen(expected_vocab, false);
    double mass = 0.0;
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
        const auto [id, v] = r.entries[i];
        if (id >= expected_vocab) throw DimensionError("bridge entry token id out of range");
        if (seen[id]) throw DataError("bridge response repeats token " + std::to_string(id));
        if (i > 0 && v > r.entries[i - 1].second) throw DataError("bridge entries must be sorted descending");
        seen[id] = true;
        p[id] = space == ReturnSpace::prob ? v : std::exp(v);
        if (!(p[id] >= 0.0) || !std::isfinite(p[id])) throw DataError("bridge entry value is not a probability");
        mass += p[id];
    }
    if (!(r.tail_mass >= 0.0)) throw DataError("bridge tail_mass must be non-negative");
    if (std::abs(mass + r.tail_mass - 1.0) > kMassTolerance) {
        throw DataError("bridge response mass " + std::to_string(mass + r.tail_mass) + " is not 1");
    }
    const std::size_t missing = expected_vocab - r.entries.size();
    if (r.tail_mass > 0.0) {
        if (missing == 0) throw DataError("bridge reports tail mass but returned every token");
        const double each = r.tail_mass / static_cast<double>(missing);
        for (std::size_t i = 0; i < expected_vocab; ++i) {
            if (!seen[i]) p[i] = each;
        }
    }
    double total = 0.0;
    for (double x : p) total += x;
    if (std::abs(total - 1.0) > kNormTolerance) {
        for (double& x : p) x /= total;
    }
    return TokenDistribution(std::move(p));
}

// Inverse of to_distribution for the serving side: top_n largest entries, ties by id.
inline Response make_response(const std::string& request_id, const TokenDistribution& d, std::optional<std::size_t> top_n,
                              ReturnSpace space, const std::string& fingerprint) {
    Response r;
    r.request_id = request_id;
    r.vocab_size = d.size();
    r.tokenizer_fingerprint = fingerprint;
    std::vector<TokenId> order(d.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<TokenId>(i);
    std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) { return d[a] > d[b]; });
    const std::size_t n = top_n ? std::min(*top_n, order.size()) : order.size();
    double kept = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const TokenId id = order[i];
        kept += d[id];
        r.entries.emplace_back(id, space == ReturnSpace::prob ? d[id] : std::log(d[id]));
    }
    r.tail_mass = n == order.size() ? 0.0 : std::max(0.0, 1.0 - kept);
    return r;
}

// ---------------------------------------------------------------------------
// Transports
// ---------------------------------------------------------------------------

class LineTransport {
public:
    virtual ~LineTransport() = default;
    // Sends one line (without newline) and returns the next line received.
    virtual std::string exchange(const std::string& line) = 0;
};

// Child process speaking the protocol on its stdin/stdout.
class SubprocessTransport final : public LineTransport {
public:
    explicit SubprocessTransport(std::vector<std::string> argv) {
        if (argv.empty()) throw ParameterError("bridge command is empty");
        int to_child[2];
        int from_child[2];
        if (pipe(to_child) != 0) throw ProviderError(std::string("pipe: ") + std::strerror(errno));
        if (pipe(from_child) != 0) {
            close(to_child[0]);
            close(to_child[1]);
            throw ProviderError(std::string("pipe: ") + std::strerror(errno));
        }
        std::vector<char*> args;
        for (auto& a : argv) args.push_back(a.data());
        args.push_back(nullptr);
        pid_ = fork();
        if (pid_ < 0) throw ProviderError(std::string("fork: ") + std::strerror(errno));
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execvp(args[0], args.data());
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
        fcntl(write_fd_, F_SETFD, FD_CLOEXEC);
        fcntl(read_fd_, F_SETFD, FD_CLOEXEC);
        command_ = argv.front();
    }

    SubprocessTransport(const SubprocessTransport&) = delete;
    SubprocessTransport& operator=(const SubprocessTransport&) = delete;

    ~SubprocessTransport() override {
        if (write_fd_ >= 0) close(write_fd_);
        if (read_fd_ >= 0) close(read_fd_);
        if (pid_ > 0) {
            int status = 0;
            waitpid(pid_, &status, 0);
        }
    }

    std::string exchange(const std::string& line) override {
        std::string out = line + "\n";
        const struct sigaction ignore{};
        struct sigaction old{};
        struct sigaction ign = ignore;
        ign.sa_handler = SIG_IGN;
        sigaction(SIGPIPE, &ign, &old);
        std::size_t off = 0;
        while (off < out.size()) {
            const ssize_t n = write(write_fd_, out.data() + off, out.size() - off);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                sigaction(SIGPIPE, &old, nullptr);
                throw ProviderError("bridge '" + command_ + "' closed its input");
            }
            off += static_cast<std::size_t>(n);
        }
        sigaction(SIGPIPE, &old, nullptr);
        return read_line();
    }

private:
    std::string read_line() {
        for (;;) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            char chunk[65536];
            const ssize_t n = read(read_fd_, chunk, sizeof(chunk));
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) throw ProviderError("bridge '" + command_ + "' closed its output");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
    std::string buffer_;
    std::string command_;
};

// ---------------------------------------------------------------------------
// Client and provider
// ---------------------------------------------------------------------------

class Client {
public:
    explicit Client(std::unique_ptr<LineTransport> transport) : transport_(std::move(transport)) {
        if (!transport_) throw ParameterError("bridge client needs a transport");
        handshake_ = handshake_from_json(call(nlohmann::json{{"type", "handshake"}}));
    }

    const Handshake& handshake() const noexcept { return handshake_; }

    Response next(const Request& req) {
        const nlohmann::json j = call(to_json(req));
        Response r = response_from_json(j);
        if (r.request_id != req.request_id) {
            throw ProviderError("bridge answered request " + r.request_id + " to request " + req.request_id);
        }
        if (r.tokenizer_fingerprint != handshake_.tokenizer_fingerprint) {
            throw ProviderError("bridge tokenizer fingerprint changed after handshake");
        }
        return r;
    }

    std::vector<TokenId> tokenize(const std::string& text) {
        const std::string id = fresh_id();
        const nlohmann::json j = call(nlohmann::json{{"type", "tokenize"}, {"request_id", id}, {"text", text}});
        check_reply(j, id);
        return j.at("token_ids").get<std::vector<TokenId>>();
    }

    std::string detokenize(std::span<const TokenId> ids) {
        const std::string id = fresh_id();
        nlohmann::ordered_json req;
        req["type"] = "detokenize";
        req["request_id"] = id;
        req["token_ids"] = std::vector<TokenId>(ids.begin(), ids.end());
        const nlohmann::json j = call(req);
        check_reply(j, id);
        return j.at("text").get<std::string>();
    }

    std::string fresh_id() {
        std::lock_guard lock(mu_);
        return std::to_string(++counter_);
    }

private:
    template <class J>
    nlohmann::json call(const J& req) {
        std::string reply;
        {
            std::lock_guard lock(mu_);
            reply = transport_->exchange(req.dump());
        }
        try {
            return nlohmann::json::parse(reply);
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("malformed bridge reply: ") + e.what());
        }
    }

    static void check_reply(const nlohmann::json& j, const std::string& id) {
        if (j.contains("error")) throw ProviderError("bridge error: " + j["error"].get<std::string>());
        if (j.value("request_id", std::string()) != id) throw ProviderError("bridge reply out of order");
    }

    std::unique_ptr<LineTransport> transport_;
    Handshake handshake_;
    std::mutex mu_;
    std::uint64_t counter_ = 0;
};

struct ProviderOptions {
    std::optional<std::size_t> top_n;  // empty = full distribution
    ReturnSpace return_space = ReturnSpace::logprob;
    std::string name = "bridge";
};

/**
 * NextTokenProvider backed by a bridge. With top_n set, unreturned tokens share
 * the tail mass uniformly and the provider name is suffixed "~approx".
 */
class BridgeProvider final : public NextTokenProvider {
public:
    BridgeProvider(std::shared_ptr<Client> client, ProviderOptions opts = {})
        : client_(std::move(client)), opts_(std::move(opts)) {
        if (!client_) throw ParameterError("bridge provider needs a client");
        if (opts_.top_n && *opts_.top_n < 1) throw ParameterError("top_n must be >= 1");
    }

    VocabInfo vocab_info() const override {
        const auto& h = client_->handshake();
        return {h.vocab_size, h.bos_id, h.eos_id, h.tokenizer_fingerprint};
    }

    TokenDistribution next_distribution(std::span<const TokenId> context) const override {
        Request req;
        req.request_id = client_->fresh_id();
        req.context_token_ids = std::vector<TokenId>(context.begin(), context.end());
        req.top_n = opts_.top_n;
        req.return_space = opts_.return_space;
        return to_distribution(client_->next(req), opts_.return_space, client_->handshake().vocab_size);
    }

    std::string name() const override { return opts_.top_n ? opts_.name + "~approx" : opts_.name; }

    std::vector<TokenId> encode(std::string_view text) const override { return client_->tokenize(std::string(text)); }
    std::string decode(std::span<const TokenId> ids) const override { return client_->detokenize(ids); }

    bool concurrent_queries() const override { return false; }

private:
    std::shared_ptr<Client> client_;
    ProviderOptions opts_;
};

// Refuses a (q, r) pair that does not share one vocabulary and tokenizer.
inline void require_compatible(const Handshake& q, const Handshake& r) {
    if (q.tokenizer_fingerprint != r.tokenizer_fingerprint || q.vocab_size != r.vocab_size) {
        throw SupportError("main and auxiliary models must share one vocabulary and tokenizer (fingerprints " +
                           q.tokenizer_fingerprint + " vs " + r.tokenizer_fingerprint + ")");
    }
}

}  // namespace detectlab::bridge
