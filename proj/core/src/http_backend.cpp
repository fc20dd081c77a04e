#include <atomic>
#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sqlagents/backend.hpp"
#include "sqlagents/errors.hpp"

namespace sqlagents {

namespace {

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path_prefix;
};

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl p;
    p.scheme_host_port = url.substr(0, path_start);
    p.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!p.path_prefix.empty() && p.path_prefix.back() == '/') p.path_prefix.pop_back();
    return p;
}

bool mentions(const std::string& haystack, std::initializer_list<std::string_view> needles) {
    for (auto n : needles) {
        if (haystack.find(n) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

HttpBackendOptions HttpBackendOptions::from_env() {
    HttpBackendOptions o;
    if (const char* url = std::getenv("OPENAI_BASE_URL")) o.base_url = url;
    if (const char* key = std::getenv("OPENAI_API_KEY")) o.api_key = key;
    return o;
}

struct HttpBackend::Impl {
    HttpBackendOptions options;
    ParsedUrl url;
    std::atomic<bool> drop_top_k{false};
    std::atomic<bool> drop_repetition_penalty{false};
};

HttpBackend::HttpBackend(HttpBackendOptions options) : impl_(std::make_unique<Impl>()) {
    if (options.base_url.empty()) throw ConfigError("HTTP backend needs a base URL (OPENAI_BASE_URL)");
    impl_->url = parse_url(options.base_url);
    impl_->options = std::move(options);
}

HttpBackend::~HttpBackend() = default;

nlohmann::json HttpBackend::build_body(const ChatRequest& req, const ModelProfile& profile) const {
    nlohmann::json body;
    body["model"] = profile.model_id;
    auto& msgs = body["messages"] = nlohmann::json::array();
    for (const auto& m : req.messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.text}});
    body["max_tokens"] = req.max_new_tokens;
    body["seed"] = req.decode.seed;
    if (req.decode.mode == DecodeMode::greedy) {
        body["temperature"] = 0.0;
    } else {
        body["temperature"] = req.decode.temperature;
        body["top_p"] = req.decode.top_p;
        if (req.decode.top_k > 0 && !impl_->drop_top_k) body["top_k"] = req.decode.top_k;
    }
    if (!impl_->drop_repetition_penalty) body["repetition_penalty"] = req.decode.repetition_penalty;
    return body;
}

Completion HttpBackend::send(const ChatRequest& req, const ModelProfile& profile) {
    for (int pass = 0; pass < 3; ++pass) {
        httplib::Client cli(impl_->url.scheme_host_port);
        cli.set_connection_timeout(std::chrono::seconds(10));
        cli.set_read_timeout(impl_->options.read_timeout);
        httplib::Headers headers;
        if (!impl_->options.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + impl_->options.api_key);
        }
        const auto body = build_body(req, profile);
        auto res = cli.Post(impl_->url.path_prefix + "/chat/completions", headers, body.dump(),
                            "application/json");
        if (!res) {
            throw TransportError("POST " + impl_->options.base_url + ": " + httplib::to_string(res.error()));
        }
        if (res->status == 429 || res->status >= 500) {
            throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        if (res->status >= 400) {
            const auto& msg = res->body;
            if (mentions(msg, {"context length", "context_length", "maximum context", "too long",
                               "max_model_len"})) {
                throw OverflowError("'" + req.tag + "': " + msg);
            }
            const bool top_k = body.contains("top_k") && mentions(msg, {"top_k"});
            const bool rep = body.contains("repetition_penalty") && mentions(msg, {"repetition_penalty"});
            if ((top_k || rep) && impl_->options.unsupported_fields == UnsupportedFieldPolicy::drop) {
                if (top_k && !impl_->drop_top_k.exchange(true)) {
                    spdlog::warn("server rejected top_k; dropping it from further requests");
                }
                if (rep && !impl_->drop_repetition_penalty.exchange(true)) {
                    spdlog::warn("server rejected repetition_penalty; dropping it from further requests");
                }
                continue;
            }
            throw BackendError("HTTP " + std::to_string(res->status) + ": " + msg);
        }

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw BackendError(std::string("malformed completion response: ") + e.what());
        }
        if (!j.contains("choices") || j["choices"].empty()) {
            throw BackendError("completion response has no choices");
        }
        const auto& message = j["choices"][0].value("message", nlohmann::json::object());
        Completion c;
        if (message.contains("content") && message["content"].is_string()) {
            c.text = message["content"].get<std::string>();
        }
        // reasoning servers split the think block out of content
        if (message.contains("reasoning_content") && message["reasoning_content"].is_string()) {
            const auto reasoning = message["reasoning_content"].get<std::string>();
            if (!reasoning.empty()) c.text = "<think>\n" + reasoning + "\n</think>\n\n" + c.text;
        }
        if (j.contains("usage") && j["usage"].is_object()) {
            c.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            c.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
        }
        return c;
    }
    throw BackendError("server kept rejecting request fields");
}

}  // namespace sqlagents
