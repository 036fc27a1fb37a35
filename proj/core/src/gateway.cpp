#include "dn/gateway.hpp"

#include <chrono>
#include <thread>

#include <json.hpp>

#include "dn/io.hpp"
#include "dn/strings.hpp"

namespace dn::gateway {

using ordered_json = nlohmann::ordered_json;

const char* to_string(MessageRole role) {
    switch (role) {
        case MessageRole::system: return "system";
        case MessageRole::user: return "user";
        case MessageRole::assistant: return "assistant";
    }
    return "user";
}

void validate_request(const ChatRequest& request) {
    if (request.messages.empty())
        throw ValidationError("chat request must contain at least one message");
    const MessageRole first = request.messages.front().role;
    if (first != MessageRole::system && first != MessageRole::user)
        throw ValidationError("first message role must be system or user");
    if (request.temperature < 0.0 || request.temperature > 2.0)
        throw ValidationError("temperature must be in [0, 2]");
    if (request.max_tokens <= 0) throw ValidationError("max_tokens must be positive");
}

const char* to_string(FinishReason reason) {
    switch (reason) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::error: return "error";
    }
    return "stop";
}

FinishReason finish_reason_from(const std::string& name) {
    if (name == "length") return FinishReason::length;
    if (name == "error") return FinishReason::error;
    return FinishReason::stop;
}

std::string canonical_request_json(const ChatRequest& request) {
    ordered_json j;
    j["model"] = request.model;
    j["messages"] = ordered_json::array();
    for (const auto& m : request.messages) {
        ordered_json jm;
        jm["role"] = to_string(m.role);
        jm["content"] = m.content;
        j["messages"].push_back(std::move(jm));
    }
    j["temperature"] = request.temperature;
    j["max_tokens"] = request.max_tokens;
    return j.dump();
}

std::string request_digest(const ChatRequest& request) {
    return fnv1a_hex(canonical_request_json(request));
}

namespace {

ordered_json response_to_json(const ChatResponse& response) {
    ordered_json j;
    j["content"] = response.content;
    j["finish_reason"] = to_string(response.finish_reason);
    j["usage"] = {{"prompt_tokens", response.usage.prompt_tokens},
                  {"completion_tokens", response.usage.completion_tokens}};
    return j;
}

ChatResponse response_from_json(const ordered_json& j) {
    ChatResponse response;
    response.content = j.at("content").get<std::string>();
    response.finish_reason = finish_reason_from(j.at("finish_reason").get<std::string>());
    if (j.contains("usage")) {
        response.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        response.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    return response;
}

}  // namespace

void Transcript::append(TranscriptEntry entry) { entries_.push_back(std::move(entry)); }

std::string Transcript::to_jsonl() const {
    std::string out;
    for (const auto& entry : entries_) {
        ordered_json j;
        j["digest"] = entry.digest;
        j["tag"] = entry.tag;
        j["response"] = response_to_json(entry.response);
        out += j.dump();
        out += '\n';
    }
    return out;
}

Transcript Transcript::from_jsonl(const std::string& text) {
    Transcript transcript;
    int line_no = 0;
    for (const auto& line : split_lines(text)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const ordered_json j = ordered_json::parse(line);
            TranscriptEntry entry;
            entry.digest = j.value("digest", "");
            entry.tag = j.value("tag", "");
            entry.response = response_from_json(j.at("response"));
            transcript.append(std::move(entry));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("transcript line " + std::to_string(line_no) + ": " + e.what(),
                             line_no, 0);
        }
    }
    return transcript;
}

Transcript Transcript::load(const std::filesystem::path& path) {
    return from_jsonl(io::read_file(path));
}

void Transcript::save(const std::filesystem::path& path) const {
    io::write_file_atomic(path, to_jsonl());
}

int64_t SystemClock::now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void SystemClock::sleep_ms(int64_t ms) {
    if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

void RateLimiter::acquire(Clock& clock) {
    while (true) {
        int64_t wait = 0;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            const int64_t now = clock.now_ms();
            while (!issued_.empty() && issued_.front() <= now - 1000) issued_.pop_front();
            if (static_cast<double>(issued_.size()) < per_sec_) {
                issued_.push_back(now);
                return;
            }
            wait = issued_.front() + 1000 - now;
        }
        clock.sleep_ms(wait > 0 ? wait : 1);
    }
}

ReplayBackend::ReplayBackend(Transcript transcript, bool lenient)
    : transcript_(std::move(transcript)), lenient_(lenient) {
    for (size_t i = 0; i < transcript_.entries().size(); ++i) {
        const auto& entry = transcript_.entries()[i];
        if (!entry.digest.empty()) by_digest_[entry.digest].push_back(i);
        if (!entry.tag.empty()) by_tag_[entry.tag].push_back(i);
    }
}

ChatResponse ReplayBackend::send(const ChatRequest& request) {
    const std::string digest = request_digest(request);
    std::lock_guard<std::mutex> lock(mutex_);
    auto take = [&](std::map<std::string, std::deque<size_t>>& index,
                    const std::string& key) -> std::optional<size_t> {
        auto it = index.find(key);
        if (it == index.end() || it->second.empty()) return std::nullopt;
        size_t pos = it->second.front();
        it->second.pop_front();
        return pos;
    };
    std::optional<size_t> pos = take(by_digest_, digest);
    if (!pos && lenient_) {
        pos = take(by_tag_, request.tag);
        if (pos) {
            // keep the digest index from re-serving the consumed entry
            auto& dq = by_digest_[transcript_.entries()[*pos].digest];
            for (auto it = dq.begin(); it != dq.end(); ++it)
                if (*it == *pos) {
                    dq.erase(it);
                    break;
                }
        }
    }
    if (!pos)
        throw GatewayError(GatewayError::Kind::replay_miss,
                           "no recorded response for request digest " + digest + " (tag '" +
                               request.tag + "')");
    return transcript_.entries()[*pos].response;
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner,
                                   std::optional<std::filesystem::path> sink)
    : inner_(std::move(inner)), sink_(std::move(sink)) {}

ChatResponse RecordingBackend::send(const ChatRequest& request) {
    ChatResponse response = inner_->send(request);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        transcript_.append({request_digest(request), request.tag, response});
        if (sink_) transcript_.save(*sink_);
    }
    return response;
}

Transcript RecordingBackend::recorded() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return transcript_;
}

void ScriptedBackend::push_response(ChatResponse response) {
    std::lock_guard<std::mutex> lock(mutex_);
    queue_.push_back([response = std::move(response)](const ChatRequest&) { return response; });
}

void ScriptedBackend::push_response(const std::string& content) {
    ChatResponse response;
    response.content = content;
    response.finish_reason = FinishReason::stop;
    push_response(std::move(response));
}

void ScriptedBackend::push_error(GatewayError error) {
    std::lock_guard<std::mutex> lock(mutex_);
    queue_.push_back([error](const ChatRequest&) -> ChatResponse { throw error; });
}

void ScriptedBackend::set_responder(Responder responder) {
    std::lock_guard<std::mutex> lock(mutex_);
    responder_ = std::move(responder);
}

ChatResponse ScriptedBackend::send(const ChatRequest& request) {
    std::function<ChatResponse(const ChatRequest&)> action;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        requests_.push_back(request);
        if (!queue_.empty()) {
            action = std::move(queue_.front());
            queue_.pop_front();
        } else if (responder_) {
            action = responder_;
        }
    }
    if (!action)
        throw GatewayError(GatewayError::Kind::replay_miss,
                           "scripted backend has no response for tag '" + request.tag + "'");
    return action(request);
}

std::vector<ChatRequest> ScriptedBackend::requests() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return requests_;
}

Gateway::Gateway(std::shared_ptr<Backend> backend, RetryPolicy policy,
                 std::shared_ptr<Clock> clock)
    : backend_(std::move(backend)),
      policy_(policy),
      clock_(clock ? std::move(clock) : std::make_shared<SystemClock>()),
      rng_(std::make_shared<std::mt19937_64>(policy.jitter_seed)),
      rng_mutex_(std::make_shared<std::mutex>()) {
    if (policy_.max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
}

Gateway Gateway::with_retry(RetryPolicy policy) const {
    Gateway copy = *this;
    if (policy.max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
    copy.policy_ = policy;
    copy.rng_ = std::make_shared<std::mt19937_64>(policy.jitter_seed);
    copy.rng_mutex_ = std::make_shared<std::mutex>();
    return copy;
}

Gateway Gateway::with_rate_limit(double per_sec) const {
    Gateway copy = *this;
    copy.limiter_ = std::make_shared<RateLimiter>(per_sec);
    return copy;
}

ChatResponse Gateway::complete(const ChatRequest& request, CallMeta* meta) {
    validate_request(request);
    CallMeta local;
    CallMeta& m = meta ? *meta : local;
    m = {};
    const int64_t start = clock_->now_ms();
    for (int attempt = 1;; ++attempt) {
        if (limiter_) limiter_->acquire(*clock_);
        m.attempts = attempt;
        try {
            ChatResponse response = backend_->send(request);
            m.latency_ms = static_cast<double>(clock_->now_ms() - start);
            return response;
        } catch (const GatewayError& e) {
            if (!e.transient() || attempt >= policy_.max_attempts) {
                m.latency_ms = static_cast<double>(clock_->now_ms() - start);
                throw;
            }
            double delay = static_cast<double>(policy_.base_delay_ms);
            for (int k = 1; k < attempt; ++k) delay *= policy_.multiplier;
            double factor = 1.0;
            {
                std::lock_guard<std::mutex> lock(*rng_mutex_);
                std::uniform_real_distribution<double> dist(1.0 - policy_.jitter,
                                                            1.0 + policy_.jitter);
                factor = dist(*rng_);
            }
            const auto sleep_ms = static_cast<int64_t>(delay * factor);
            m.retry_delays_ms.push_back(sleep_ms);
            clock_->sleep_ms(sleep_ms);
        }
    }
}

}  // namespace dn::gateway
