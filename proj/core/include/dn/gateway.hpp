#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dn/error.hpp"

namespace dn::gateway {

enum class MessageRole { system, user, assistant };
const char* to_string(MessageRole role);

struct Message {
    MessageRole role = MessageRole::user;
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<Message> messages;
    double temperature = 0.7;
    int max_tokens = 2048;
    /// Stage/role label such as "reflection.generate". Not part of the
    /// request digest, so replay matching survives tag renames.
    std::string tag;
};

/// Throws ValidationError when the request breaks its invariants.
void validate_request(const ChatRequest& request);

enum class FinishReason { stop, length, error };
const char* to_string(FinishReason reason);
FinishReason finish_reason_from(const std::string& name);

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct ChatResponse {
    std::string content;
    FinishReason finish_reason = FinishReason::stop;
    Usage usage;
};

/// Canonical JSON of (model, messages, temperature, max_tokens), compact form.
std::string canonical_request_json(const ChatRequest& request);
/// FNV-1a 64 digest of canonical_request_json, 16 hex chars.
std::string request_digest(const ChatRequest& request);

struct TranscriptEntry {
    std::string digest;
    std::string tag;
    ChatResponse response;
};

/// Append-only record of completed calls; serialized as JSON-lines with one
/// record per call and stable field order.
class Transcript {
public:
    void append(TranscriptEntry entry);
    const std::vector<TranscriptEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    size_t size() const { return entries_.size(); }

    std::string to_jsonl() const;
    static Transcript from_jsonl(const std::string& text);
    static Transcript load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::vector<TranscriptEntry> entries_;
};

class GatewayError : public dn::Error {
public:
    enum class Kind {
        transport,    // network failure / timeout
        backend,      // HTTP status >= 400
        replay_miss,  // no recorded response for the request
    };

    GatewayError(Kind kind, const std::string& what, int status = 0)
        : dn::Error(what), kind_(kind), status_(status) {}

    Kind kind() const { return kind_; }
    int status() const { return status_; }
    /// Transient failures are worth retrying: timeouts, 429, 5xx.
    bool transient() const {
        return kind_ == Kind::transport ||
               (kind_ == Kind::backend && (status_ == 429 || status_ >= 500));
    }

private:
    Kind kind_;
    int status_;
};

/// One chat-completion backend. Implementations must be safe for concurrent
/// send() calls.
class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatResponse send(const ChatRequest& request) = 0;
};

/// Injectable time source so retry/rate-limit behavior is testable without
/// real sleeping.
class Clock {
public:
    virtual ~Clock() = default;
    virtual int64_t now_ms() = 0;
    virtual void sleep_ms(int64_t ms) = 0;
};

class SystemClock : public Clock {
public:
    int64_t now_ms() override;
    void sleep_ms(int64_t ms) override;
};

struct RetryPolicy {
    int max_attempts = 3;
    int base_delay_ms = 200;
    double multiplier = 2.0;
    double jitter = 0.2;  // +-20%
    uint64_t jitter_seed = 12345;
};

/// Sliding-window limiter: no 1-second window sees more than `per_sec`
/// issued requests. Shared across concurrent callers.
class RateLimiter {
public:
    explicit RateLimiter(double per_sec) : per_sec_(per_sec) {}
    void acquire(Clock& clock);

private:
    double per_sec_;
    std::mutex mutex_;
    std::deque<int64_t> issued_;
};

struct CallMeta {
    int attempts = 0;
    double latency_ms = 0;
    std::vector<int64_t> retry_delays_ms;  // one entry per backoff sleep
};

struct HttpOptions {
    std::string base_url;  // e.g. "http://127.0.0.1:8080/v1"
    std::string api_key;
    std::string path = "/chat/completions";
    int timeout_ms = 30000;

    /// Reads DN_API_BASE and DN_API_KEY.
    static HttpOptions from_env();
};

/// Live chat-completion backend: POST {base_url}{path} with a bearer token
/// and a JSON body carrying model/messages/temperature/max_tokens.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpOptions options);
    ChatResponse send(const ChatRequest& request) override;

private:
    HttpOptions options_;
};

/// Deterministic backend that serves recorded responses. Strict matching is
/// by request digest; lenient matching falls back to (tag, sequence index).
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(Transcript transcript, bool lenient = false);
    ChatResponse send(const ChatRequest& request) override;

private:
    Transcript transcript_;
    bool lenient_;
    std::mutex mutex_;
    std::map<std::string, std::deque<size_t>> by_digest_;
    std::map<std::string, std::deque<size_t>> by_tag_;
};

/// Wraps another backend and appends every successful call to a transcript,
/// optionally flushing to a JSON-lines file after each append.
class RecordingBackend : public Backend {
public:
    explicit RecordingBackend(std::shared_ptr<Backend> inner,
                              std::optional<std::filesystem::path> sink = std::nullopt);
    ChatResponse send(const ChatRequest& request) override;
    Transcript recorded() const;

private:
    std::shared_ptr<Backend> inner_;
    std::optional<std::filesystem::path> sink_;
    mutable std::mutex mutex_;
    Transcript transcript_;
};

/// Test/demo backend that replies from a scripted queue or a responder
/// function, recording every request it sees.
class ScriptedBackend : public Backend {
public:
    using Responder = std::function<ChatResponse(const ChatRequest&)>;

    void push_response(ChatResponse response);
    void push_response(const std::string& content);
    void push_error(GatewayError error);
    void set_responder(Responder responder);

    ChatResponse send(const ChatRequest& request) override;

    std::vector<ChatRequest> requests() const;

private:
    mutable std::mutex mutex_;
    std::deque<std::function<ChatResponse(const ChatRequest&)>> queue_;
    Responder responder_;
    std::vector<ChatRequest> requests_;
};

/// Front door for all completion traffic: applies rate limiting and the retry
/// policy around a backend. Copyable; copies share the backend, limiter and
/// clock, which keeps the limiter global across concurrent callers.
class Gateway {
public:
    explicit Gateway(std::shared_ptr<Backend> backend,
                     RetryPolicy policy = {},
                     std::shared_ptr<Clock> clock = nullptr);

    /// Blocking completion. Transient failures are retried with exponential
    /// backoff and +-20% jitter; non-transient failures propagate at once.
    /// Fills `meta` (attempts, latency, backoff delays) when given.
    ChatResponse complete(const ChatRequest& request, CallMeta* meta = nullptr);

    Gateway with_retry(RetryPolicy policy) const;
    Gateway with_rate_limit(double per_sec) const;

    const RetryPolicy& policy() const { return policy_; }
    Backend& backend() { return *backend_; }

private:
    std::shared_ptr<Backend> backend_;
    RetryPolicy policy_;
    std::shared_ptr<Clock> clock_;
    std::shared_ptr<RateLimiter> limiter_;
    std::shared_ptr<std::mt19937_64> rng_;
    std::shared_ptr<std::mutex> rng_mutex_;
};

}  // namespace dn::gateway
