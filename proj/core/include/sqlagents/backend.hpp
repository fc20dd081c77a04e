#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sqlagents {

enum class Role { system, user, assistant };
std::string_view to_string(Role r);

struct ChatMessage {
    Role role = Role::user;
    std::string text;
};

enum class DecodeMode { greedy, sampled };

struct DecodeParams {
    DecodeMode mode = DecodeMode::greedy;
    double temperature = 0.0;
    double top_p = 1.0;
    int top_k = -1;  // -1: not sent
    double repetition_penalty = 1.0;
    std::int64_t seed = 42;

    // Greedy decoding at repetition_penalty 1.05.
    static DecodeParams greedy_default();
    // temperature 0.6, top_p 0.95, top_k 30, repetition_penalty 1.0.
    static DecodeParams thinking_default();
    void validate() const;
};

// Token budget buckets.
enum class AgentRole { baseline, discussion, planner, coder, aggregator };
std::string_view to_string(AgentRole r);

struct ModelProfile {
    std::string model_id;
    bool thinking = false;
    DecodeParams decode;
    std::map<AgentRole, int> budgets;

    // Defaults: baseline 1024 (8192 thinking), discussion 4096, planner 8192,
    // coder 1024, aggregator 8192; decode greedy or thinking defaults.
    static ModelProfile make(std::string model_id, bool thinking);
    int budget(AgentRole role) const;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    DecodeParams decode;
    int max_new_tokens = 1024;
    AgentRole role = AgentRole::baseline;
    std::string tag;

    void validate() const;
};

// Request built from a single rendered prompt, sized to the profile budget.
ChatRequest make_request(std::string prompt, const ModelProfile& profile, AgentRole role,
                         std::string tag);

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct Completion {
    std::string text;
    Usage usage;
    std::chrono::milliseconds latency{0};
};

// Stable hex digest of the request content the model would see.
std::string request_hash(const ChatRequest& req, const ModelProfile& profile);

// Transport. Implementations must be safe for concurrent send().
class Backend {
public:
    virtual ~Backend() = default;
    virtual Completion send(const ChatRequest& req, const ModelProfile& profile) = 0;
    virtual std::string_view kind() const = 0;
};

// Fixture lines: {"tag": ..., "response": ...} or {"hash": ..., "response": ...}.
// Tag matches win over hash matches.
class ReplayBackend final : public Backend {
public:
    explicit ReplayBackend(const std::filesystem::path& fixtures_jsonl);
    ReplayBackend() = default;

    void add_by_tag(std::string tag, std::string response);
    void add_by_hash(std::string hash, std::string response);
    std::size_t size() const;

    Completion send(const ChatRequest& req, const ModelProfile& profile) override;
    std::string_view kind() const override { return "replay"; }

private:
    mutable std::mutex mu_;
    std::unordered_map<std::string, std::string> by_tag_;
    std::unordered_map<std::string, std::string> by_hash_;
};

// Returns script entries round-robin in call order; a responder function can
// be supplied instead to compute the reply from the request.
class ScriptedBackend final : public Backend {
public:
    using Responder = std::function<std::string(const ChatRequest&, const ModelProfile&)>;

    explicit ScriptedBackend(std::vector<std::string> script);
    explicit ScriptedBackend(Responder responder);

    Completion send(const ChatRequest& req, const ModelProfile& profile) override;
    std::string_view kind() const override { return "scripted"; }

    std::size_t calls() const noexcept { return calls_.load(); }
    // Requests in arrival order.
    std::vector<ChatRequest> received() const;

private:
    std::vector<std::string> script_;
    Responder responder_;
    std::atomic<std::size_t> calls_{0};
    mutable std::mutex mu_;
    std::vector<ChatRequest> received_;
};

enum class UnsupportedFieldPolicy { drop, fail };

struct HttpBackendOptions {
    std::string base_url;  // e.g. http://localhost:8000/v1
    std::string api_key;
    UnsupportedFieldPolicy unsupported_fields = UnsupportedFieldPolicy::drop;
    std::chrono::seconds read_timeout{600};

    // OPENAI_BASE_URL / OPENAI_API_KEY.
    static HttpBackendOptions from_env();
};

// OpenAI-compatible /chat/completions client.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpBackendOptions options);
    ~HttpBackend() override;

    Completion send(const ChatRequest& req, const ModelProfile& profile) override;
    std::string_view kind() const override { return "http"; }

    nlohmann::json build_body(const ChatRequest& req, const ModelProfile& profile) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct TraceEntry {
    std::string tag;
    std::string model_id;
    std::string request_hash;
    int max_new_tokens = 0;
    std::string prompt;
    std::string response;
    Usage usage;
    std::chrono::milliseconds latency{0};
    int attempts = 0;
    std::string error;
};

// Thread-safe record of every issued request. Optionally mirrored to JSONL.
class TraceLog {
public:
    TraceLog() = default;
    explicit TraceLog(const std::filesystem::path& jsonl_sink);

    void record(TraceEntry entry);
    std::vector<TraceEntry> entries() const;
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::vector<TraceEntry> entries_;
    std::ofstream sink_;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

struct BatchSlot {
    std::optional<Completion> completion;
    std::exception_ptr error;

    bool ok() const noexcept { return completion.has_value(); }
};

struct BatchJob {
    ChatRequest request;
    const ModelProfile* profile = nullptr;
};

// Validation, budget enforcement, retries, tracing and a global in-flight cap
// in front of a Backend.
class ChatClient {
public:
    ChatClient(std::shared_ptr<Backend> backend, std::shared_ptr<TraceLog> trace,
               RetryPolicy retry = {}, int max_in_flight = 64);

    Completion complete(const ChatRequest& req, const ModelProfile& profile);

    // Results are positionally aligned with `reqs`; failures stay in their slot.
    std::vector<BatchSlot> batch(std::span<const ChatRequest> reqs, const ModelProfile& profile,
                                 int max_in_flight);
    std::vector<BatchSlot> batch(std::span<const BatchJob> jobs, int max_in_flight);

    Backend& backend() noexcept { return *backend_; }
    TraceLog& trace() noexcept { return *trace_; }

private:
    std::shared_ptr<Backend> backend_;
    std::shared_ptr<TraceLog> trace_;
    RetryPolicy retry_;
    std::counting_semaphore<> in_flight_;
};

}  // namespace sqlagents
