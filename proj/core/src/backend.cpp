#include "sqlagents/backend.hpp"

#include <algorithm>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sqlagents/errors.hpp"
#include "sqlagents/jsonl.hpp"

namespace sqlagents {

std::string_view to_string(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

std::string_view to_string(AgentRole r) {
    switch (r) {
        case AgentRole::baseline: return "baseline";
        case AgentRole::discussion: return "discussion";
        case AgentRole::planner: return "planner";
        case AgentRole::coder: return "coder";
        case AgentRole::aggregator: return "aggregator";
    }
    return "baseline";
}

DecodeParams DecodeParams::greedy_default() {
    DecodeParams d;
    d.mode = DecodeMode::greedy;
    d.temperature = 0.0;
    d.top_p = 1.0;
    d.top_k = -1;
    d.repetition_penalty = 1.05;
    return d;
}

DecodeParams DecodeParams::thinking_default() {
    DecodeParams d;
    d.mode = DecodeMode::sampled;
    d.temperature = 0.6;
    d.top_p = 0.95;
    d.top_k = 30;
    d.repetition_penalty = 1.0;
    return d;
}

void DecodeParams::validate() const {
    if (mode == DecodeMode::sampled && !(temperature > 0.0)) {
        throw ContractError("sampled decoding requires temperature > 0");
    }
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ContractError("top_p must be in (0, 1]");
    if (!(repetition_penalty > 0.0)) throw ContractError("repetition_penalty must be positive");
}

ModelProfile ModelProfile::make(std::string model_id, bool thinking) {
    ModelProfile p;
    p.model_id = std::move(model_id);
    p.thinking = thinking;
    p.decode = thinking ? DecodeParams::thinking_default() : DecodeParams::greedy_default();
    p.budgets = {
        {AgentRole::baseline, thinking ? 8192 : 1024},
        {AgentRole::discussion, 4096},
        {AgentRole::planner, 8192},
        {AgentRole::coder, 1024},
        {AgentRole::aggregator, 8192},
    };
    return p;
}

int ModelProfile::budget(AgentRole role) const {
    auto it = budgets.find(role);
    if (it == budgets.end()) {
        throw ContractError("model " + model_id + " has no token budget for role " +
                            std::string(to_string(role)));
    }
    return it->second;
}

void ChatRequest::validate() const {
    if (messages.empty()) throw ContractError("chat request has no messages");
    if (messages.front().role == Role::assistant) {
        throw ContractError("chat request must start with a system or user message");
    }
    if (max_new_tokens <= 0) throw ContractError("max_new_tokens must be positive");
    decode.validate();
}

ChatRequest make_request(std::string prompt, const ModelProfile& profile, AgentRole role,
                         std::string tag) {
    ChatRequest r;
    r.messages.push_back({Role::user, std::move(prompt)});
    r.decode = profile.decode;
    r.max_new_tokens = profile.budget(role);
    r.role = role;
    r.tag = std::move(tag);
    return r;
}

std::string request_hash(const ChatRequest& req, const ModelProfile& profile) {
    // Seed and sampling knobs are left out so fixtures replay across seeds.
    nlohmann::json j;
    j["model"] = profile.model_id;
    j["max_tokens"] = req.max_new_tokens;
    auto& msgs = j["messages"] = nlohmann::json::array();
    for (const auto& m : req.messages) {
        msgs.push_back({{"role", to_string(m.role)}, {"content", m.text}});
    }
    return hex64(fnv1a64(j.dump()));
}

namespace {

int rough_tokens(std::string_view text) {
    int n = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

std::string prompt_text(const ChatRequest& req) {
    std::string out;
    for (const auto& m : req.messages) {
        if (!out.empty()) out += "\n";
        out += m.text;
    }
    return out;
}

}  // namespace

ReplayBackend::ReplayBackend(const std::filesystem::path& fixtures_jsonl) {
    const auto records = read_jsonl(fixtures_jsonl);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!r.is_object() || !r.contains("response") || !r["response"].is_string()) {
            throw ParseError(i, fixtures_jsonl.string() + ": fixture needs a string 'response'");
        }
        auto response = r["response"].get<std::string>();
        if (r.contains("tag")) {
            auto tag = r["tag"].get<std::string>();
            if (!by_tag_.emplace(tag, std::move(response)).second) {
                throw IntegrityError(fixtures_jsonl.string() + ": duplicate fixture tag '" + tag + "'");
            }
        } else if (r.contains("hash")) {
            by_hash_[r["hash"].get<std::string>()] = std::move(response);
        } else {
            throw ParseError(i, fixtures_jsonl.string() + ": fixture needs 'tag' or 'hash'");
        }
    }
}

void ReplayBackend::add_by_tag(std::string tag, std::string response) {
    std::lock_guard lock(mu_);
    by_tag_[std::move(tag)] = std::move(response);
}

void ReplayBackend::add_by_hash(std::string hash, std::string response) {
    std::lock_guard lock(mu_);
    by_hash_[std::move(hash)] = std::move(response);
}

std::size_t ReplayBackend::size() const {
    std::lock_guard lock(mu_);
    return by_tag_.size() + by_hash_.size();
}

Completion ReplayBackend::send(const ChatRequest& req, const ModelProfile& profile) {
    std::string text;
    {
        std::lock_guard lock(mu_);
        if (auto it = by_tag_.find(req.tag); it != by_tag_.end()) {
            text = it->second;
        } else if (auto h = by_hash_.find(request_hash(req, profile)); h != by_hash_.end()) {
            text = h->second;
        } else {
            throw BackendError("no replay fixture for tag '" + req.tag + "'");
        }
    }
    Completion c;
    c.usage.prompt_tokens = rough_tokens(prompt_text(req));
    c.usage.completion_tokens = rough_tokens(text);
    c.text = std::move(text);
    return c;
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> script) : script_(std::move(script)) {
    if (script_.empty()) throw ContractError("scripted backend needs at least one entry");
}

ScriptedBackend::ScriptedBackend(Responder responder) : responder_(std::move(responder)) {}

Completion ScriptedBackend::send(const ChatRequest& req, const ModelProfile& profile) {
    const auto i = calls_.fetch_add(1);
    {
        std::lock_guard lock(mu_);
        received_.push_back(req);
    }
    Completion c;
    c.text = responder_ ? responder_(req, profile) : script_[i % script_.size()];
    c.usage.prompt_tokens = rough_tokens(prompt_text(req));
    c.usage.completion_tokens = rough_tokens(c.text);
    return c;
}

std::vector<ChatRequest> ScriptedBackend::received() const {
    std::lock_guard lock(mu_);
    return received_;
}

TraceLog::TraceLog(const std::filesystem::path& jsonl_sink) {
    if (jsonl_sink.has_parent_path()) std::filesystem::create_directories(jsonl_sink.parent_path());
    sink_.open(jsonl_sink, std::ios::app | std::ios::binary);
    if (!sink_) throw StorageError("cannot open trace log " + jsonl_sink.string());
}

void TraceLog::record(TraceEntry e) {
    std::lock_guard lock(mu_);
    if (sink_.is_open()) {
        nlohmann::json j = {
            {"tag", e.tag},
            {"model", e.model_id},
            {"request_hash", e.request_hash},
            {"max_new_tokens", e.max_new_tokens},
            {"prompt", e.prompt},
            {"response", e.response},
            {"prompt_tokens", e.usage.prompt_tokens},
            {"completion_tokens", e.usage.completion_tokens},
            {"latency_ms", e.latency.count()},
            {"attempts", e.attempts},
        };
        if (!e.error.empty()) j["error"] = e.error;
        sink_ << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
        sink_.flush();
    }
    entries_.push_back(std::move(e));
}

std::vector<TraceEntry> TraceLog::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

std::size_t TraceLog::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

ChatClient::ChatClient(std::shared_ptr<Backend> backend, std::shared_ptr<TraceLog> trace,
                       RetryPolicy retry, int max_in_flight)
    : backend_(std::move(backend)),
      trace_(trace ? std::move(trace) : std::make_shared<TraceLog>()),
      retry_(std::move(retry)),
      in_flight_(std::max(1, max_in_flight)) {
    if (!backend_) throw ContractError("ChatClient needs a backend");
    if (retry_.attempts < 1) retry_.attempts = 1;
    if (!retry_.sleep) {
        retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

Completion ChatClient::complete(const ChatRequest& req, const ModelProfile& profile) {
    req.validate();
    const int budget = profile.budget(req.role);
    if (req.max_new_tokens > budget) {
        throw ContractError("request '" + req.tag + "' asks for " +
                            std::to_string(req.max_new_tokens) + " tokens; " +
                            std::string(to_string(req.role)) + " budget for " + profile.model_id +
                            " is " + std::to_string(budget));
    }

    TraceEntry entry;
    entry.tag = req.tag;
    entry.model_id = profile.model_id;
    entry.request_hash = request_hash(req, profile);
    entry.max_new_tokens = req.max_new_tokens;
    entry.prompt = prompt_text(req);

    auto backoff = retry_.initial_backoff;
    const auto started = std::chrono::steady_clock::now();
    for (int attempt = 1;; ++attempt) {
        entry.attempts = attempt;
        try {
            in_flight_.acquire();
            Completion c;
            try {
                c = backend_->send(req, profile);
            } catch (...) {
                in_flight_.release();
                throw;
            }
            in_flight_.release();
            c.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - started);
            entry.response = c.text;
            entry.usage = c.usage;
            entry.latency = c.latency;
            trace_->record(std::move(entry));
            return c;
        } catch (const TransportError& e) {
            if (attempt >= retry_.attempts) {
                entry.error = e.what();
                trace_->record(std::move(entry));
                throw BackendError("'" + req.tag + "' failed after " + std::to_string(attempt) +
                                   " attempts: " + e.what());
            }
            spdlog::warn("{}: transport error (attempt {}/{}): {}", req.tag, attempt,
                         retry_.attempts, e.what());
            retry_.sleep(backoff);
            backoff *= 2;
        } catch (const std::exception& e) {
            entry.error = e.what();
            trace_->record(std::move(entry));
            throw;
        }
    }
}

std::vector<BatchSlot> ChatClient::batch(std::span<const ChatRequest> reqs,
                                         const ModelProfile& profile, int max_in_flight) {
    std::vector<BatchJob> jobs;
    jobs.reserve(reqs.size());
    for (const auto& r : reqs) jobs.push_back({r, &profile});
    return batch(std::span<const BatchJob>(jobs), max_in_flight);
}

std::vector<BatchSlot> ChatClient::batch(std::span<const BatchJob> jobs, int max_in_flight) {
    if (max_in_flight < 1) throw ContractError("batch: max_in_flight must be >= 1");
    std::vector<BatchSlot> slots(jobs.size());
    auto run_one = [&](std::size_t i) {
        try {
            if (!jobs[i].profile) throw ContractError("batch job without a model profile");
            slots[i].completion = complete(jobs[i].request, *jobs[i].profile);
        } catch (...) {
            slots[i].error = std::current_exception();
        }
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(max_in_flight), jobs.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) run_one(i);
        return slots;
    }
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (auto i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) run_one(i);
            });
        }
    }
    return slots;
}

}  // namespace sqlagents
