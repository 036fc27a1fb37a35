#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "dn/gateway.hpp"

namespace dn::gateway {

using ordered_json = nlohmann::ordered_json;

namespace {

// "http://host:port/v1" -> ("http://host:port", "/v1")
void split_base_url(const std::string& base, std::string& host, std::string& prefix) {
    const size_t scheme = base.find("://");
    const size_t path_start =
        scheme == std::string::npos ? base.find('/') : base.find('/', scheme + 3);
    if (path_start == std::string::npos) {
        host = base;
        prefix.clear();
    } else {
        host = base.substr(0, path_start);
        prefix = base.substr(path_start);
        while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }
}

std::string body_excerpt(const std::string& body) {
    constexpr size_t kMax = 200;
    if (body.size() <= kMax) return body;
    return body.substr(0, kMax) + "...";
}

}  // namespace

HttpOptions HttpOptions::from_env() {
    HttpOptions options;
    if (const char* base = std::getenv("DN_API_BASE")) options.base_url = base;
    if (const char* key = std::getenv("DN_API_KEY")) options.api_key = key;
    return options;
}

HttpBackend::HttpBackend(HttpOptions options) : options_(std::move(options)) {
    if (options_.base_url.empty())
        throw ValidationError("http backend needs a base URL (DN_API_BASE)");
}

ChatResponse HttpBackend::send(const ChatRequest& request) {
    std::string host, prefix;
    split_base_url(options_.base_url, host, prefix);

    httplib::Client client(host);
    client.set_connection_timeout(options_.timeout_ms / 1000,
                                  (options_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(options_.timeout_ms / 1000, (options_.timeout_ms % 1000) * 1000);

    httplib::Headers headers;
    if (!options_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + options_.api_key);

    const std::string body = canonical_request_json(request);
    auto result = client.Post(prefix + options_.path, headers, body, "application/json");
    if (!result)
        throw GatewayError(GatewayError::Kind::transport,
                           "http transport failure: " + httplib::to_string(result.error()));
    if (result->status >= 400)
        throw GatewayError(GatewayError::Kind::backend,
                           "backend returned status " + std::to_string(result->status) + ": " +
                               body_excerpt(result->body),
                           result->status);

    try {
        const ordered_json j = ordered_json::parse(result->body);
        ChatResponse response;
        const auto& choice = j.at("choices").at(0);
        if (choice.contains("message"))
            response.content = choice["message"].value("content", "");
        else
            response.content = choice.value("text", "");
        response.finish_reason = finish_reason_from(choice.value("finish_reason", "stop"));
        if (j.contains("usage")) {
            response.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            response.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
        }
        return response;
    } catch (const nlohmann::json::exception& e) {
        throw GatewayError(GatewayError::Kind::backend,
                           std::string("unparseable backend response: ") + e.what() + " body: " +
                               body_excerpt(result->body));
    }
}

}  // namespace dn::gateway
