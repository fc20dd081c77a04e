#include "sqlagents/config.hpp"

#include <cstdlib>
#include <set>

#include "sqlagents/errors.hpp"
#include "sqlagents/jsonl.hpp"

namespace sqlagents {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::map<std::string, AgentRole>& role_names() {
    static const std::map<std::string, AgentRole> names = {
        {"baseline", AgentRole::baseline},   {"discussion", AgentRole::discussion},
        {"planner", AgentRole::planner},     {"coder", AgentRole::coder},
        {"aggregator", AgentRole::aggregator},
    };
    return names;
}

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (auto a : allowed) known = known || a == key;
        if (!known) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, std::string_view where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(where) + "." + key + " has the wrong type");
    }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p.lexically_normal();
    return (base / p).lexically_normal();
}

json field_map_json(const FieldMap& m) {
    return {{"example_id", m.example_id}, {"db_id", m.db_id},           {"question", m.question},
            {"gold_sql", m.gold_sql},     {"evidence", m.evidence},     {"difficulty", m.difficulty}};
}

json decode_json(const DecodeParams& d) {
    return {{"mode", d.mode == DecodeMode::greedy ? "greedy" : "sampled"},
            {"temperature", d.temperature},
            {"top_p", d.top_p},
            {"top_k", d.top_k},
            {"repetition_penalty", d.repetition_penalty}};
}

DecodeParams decode_from(const json& j, DecodeParams d) {
    check_keys(j, "decode", {"mode", "temperature", "top_p", "top_k", "repetition_penalty"});
    if (j.contains("mode")) {
        const auto mode = j.at("mode").get<std::string>();
        if (mode == "greedy") d.mode = DecodeMode::greedy;
        else if (mode == "sampled") d.mode = DecodeMode::sampled;
        else throw ConfigError("decode.mode must be greedy or sampled");
    }
    d.temperature = get_or(j, "temperature", d.temperature, "decode");
    d.top_p = get_or(j, "top_p", d.top_p, "decode");
    d.top_k = get_or(j, "top_k", d.top_k, "decode");
    d.repetition_penalty = get_or(j, "repetition_penalty", d.repetition_penalty, "decode");
    return d;
}

ModelProfile model_from(const json& j) {
    check_keys(j, "models[]", {"id", "thinking", "decode", "budgets"});
    if (!j.contains("id")) throw ConfigError("models[] entry without id");
    auto m = ModelProfile::make(j.at("id").get<std::string>(), get_or(j, "thinking", false, "models[]"));
    if (j.contains("decode")) m.decode = decode_from(j.at("decode"), m.decode);
    if (j.contains("budgets")) {
        for (const auto& [name, value] : j.at("budgets").items()) {
            auto it = role_names().find(name);
            if (it == role_names().end()) throw ConfigError("unknown budget role '" + name + "'");
            m.budgets[it->second] = value.get<int>();
        }
    }
    return m;
}

PipelineSpec pipeline_from(const json& j) {
    check_keys(j, "pipelines[]",
               {"key", "id", "model", "judge", "rounds", "planners", "coder", "coders", "coder_tier",
                "aggregator"});
    PipelineSpec p;
    const auto id = get_or<std::string>(j, "id", "", "pipelines[]");
    auto parsed = parse_pipeline_id(id);
    if (!parsed) throw ConfigError("unknown pipeline id '" + id + "'");
    p.id = *parsed;
    p.key = get_or<std::string>(j, "key", id, "pipelines[]");
    p.model = get_or<std::string>(j, "model", "", "pipelines[]");
    p.judge = get_or<std::string>(j, "judge", p.model, "pipelines[]");
    p.rounds = get_or(j, "rounds", 3, "pipelines[]");
    p.planners = get_or<std::vector<std::string>>(j, "planners", {}, "pipelines[]");
    p.coder = get_or<std::string>(j, "coder", "", "pipelines[]");
    p.coders = get_or<std::vector<std::string>>(j, "coders", {}, "pipelines[]");
    p.coder_tier = get_or<std::string>(j, "coder_tier", "", "pipelines[]");
    p.aggregator = get_or<std::string>(j, "aggregator", "", "pipelines[]");
    return p;
}

json pipeline_json(const PipelineSpec& p) {
    json j = {{"key", p.key}, {"id", to_string(p.id)}};
    switch (p.id) {
        case PipelineId::baseline: j["model"] = p.model; break;
        case PipelineId::mad:
            j["model"] = p.model;
            j["judge"] = p.judge;
            j["rounds"] = p.rounds;
            break;
        case PipelineId::planner_coder:
            j["planners"] = p.planners;
            j["coder"] = p.coder;
            break;
        case PipelineId::coder_aggregator:
            if (!p.coder_tier.empty()) j["coder_tier"] = p.coder_tier;
            else j["coders"] = p.coders;
            j["aggregator"] = p.aggregator;
            break;
    }
    return j;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

std::string PipelineSpec::label() const {
    switch (id) {
        case PipelineId::baseline: return model;
        case PipelineId::mad: return judge == model ? model : model + " (judge " + judge + ")";
        case PipelineId::planner_coder: return join(planners, " + ") + " / " + coder;
        case PipelineId::coder_aggregator:
            return (coder_tier.empty() ? join(coders, " + ") : coder_tier) + " / " + aggregator;
    }
    return key;
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
    check_keys(j, "config",
               {"dataset", "pipelines", "pipeline", "models", "coder_tiers", "seeds", "exec",
                "output_dir", "max_in_flight", "backend", "prompts"});
    ExperimentConfig c;
    try {
        if (!j.contains("dataset")) throw ConfigError("missing dataset section");
        const auto& d = j.at("dataset");
        check_keys(d, "dataset", {"root", "split", "field_map", "limit"});
        c.dataset.root = resolve(get_or<std::string>(d, "root", "", "dataset"), base_dir);
        c.dataset.split = get_or<std::string>(d, "split", "dev", "dataset");
        if (d.contains("field_map")) c.dataset.field_map = FieldMap::from_json(d.at("field_map"));
        if (d.contains("limit") && !d.at("limit").is_null()) {
            c.dataset.limit = d.at("limit").get<std::size_t>();
        }

        if (j.contains("models")) {
            for (const auto& m : j.at("models")) {
                auto profile = model_from(m);
                const auto id = profile.model_id;
                if (!c.models.emplace(id, std::move(profile)).second) {
                    throw ConfigError("duplicate model '" + id + "'");
                }
            }
        }
        if (j.contains("coder_tiers")) {
            c.coder_tiers = j.at("coder_tiers").get<std::map<std::string, std::vector<std::string>>>();
        }
        if (j.contains("pipeline")) c.pipelines.push_back(pipeline_from(j.at("pipeline")));
        if (j.contains("pipelines")) {
            for (const auto& p : j.at("pipelines")) c.pipelines.push_back(pipeline_from(p));
        }
        if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::int64_t>>();

        if (j.contains("exec")) {
            const auto& e = j.at("exec");
            check_keys(e, "exec", {"timeout_s", "rves_runs", "trim_policy"});
            const double timeout_s = get_or(e, "timeout_s", 30.0, "exec");
            if (!(timeout_s > 0)) throw ConfigError("exec.timeout_s must be positive");
            c.exec.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(timeout_s * 1000.0 + 0.5));
            c.exec.rves_runs = get_or(e, "rves_runs", 100, "exec");
            const auto trim = get_or<std::string>(e, "trim_policy", "iqr", "exec");
            auto policy = parse_trim_policy(trim);
            if (!policy) throw ConfigError("unknown exec.trim_policy '" + trim + "'");
            c.exec.trim = *policy;
        }

        c.output_dir = resolve(get_or<std::string>(j, "output_dir", "runs/latest", "config"), base_dir);
        c.max_in_flight = get_or(j, "max_in_flight", 4, "config");

        if (j.contains("backend")) {
            const auto& b = j.at("backend");
            check_keys(b, "backend", {"kind", "fixtures", "script", "base_url", "unsupported_fields"});
            const auto kind = get_or<std::string>(b, "kind", "replay", "backend");
            if (kind == "http") c.backend.kind = BackendKind::http;
            else if (kind == "replay") c.backend.kind = BackendKind::replay;
            else if (kind == "scripted") c.backend.kind = BackendKind::scripted;
            else throw ConfigError("unknown backend.kind '" + kind + "'");
            c.backend.fixtures = resolve(get_or<std::string>(b, "fixtures", "", "backend"), base_dir);
            c.backend.script = get_or<std::vector<std::string>>(b, "script", {}, "backend");
            c.backend.base_url = get_or<std::string>(b, "base_url", "", "backend");
            const auto policy = get_or<std::string>(b, "unsupported_fields", "drop", "backend");
            if (policy == "drop") c.backend.unsupported_fields = UnsupportedFieldPolicy::drop;
            else if (policy == "fail") c.backend.unsupported_fields = UnsupportedFieldPolicy::fail;
            else throw ConfigError("backend.unsupported_fields must be drop or fail");
        }

        if (j.contains("prompts")) {
            const auto& p = j.at("prompts");
            check_keys(p, "prompts", {"persona", "template_dir"});
            if (p.contains("persona")) c.personas = PersonaSet::from_json(p.at("persona"));
            if (p.contains("template_dir") && !p.at("template_dir").is_null()) {
                c.template_dir = resolve(p.at("template_dir").get<std::string>(), base_dir);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& file) {
    json j;
    try {
        j = json::parse(read_file(file));
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    } catch (const LoadError& e) {
        throw ConfigError(e.what());
    }
    return from_json(j, fs::absolute(file).parent_path());
}

json ExperimentConfig::to_json() const {
    json models_j = json::array();
    for (const auto& [id, m] : models) {
        json budgets = json::object();
        for (const auto& [name, role] : role_names()) budgets[name] = m.budget(role);
        models_j.push_back({{"id", id}, {"thinking", m.thinking}, {"decode", decode_json(m.decode)},
                            {"budgets", budgets}});
    }
    json pipelines_j = json::array();
    for (const auto& p : pipelines) pipelines_j.push_back(pipeline_json(p));

    json dataset_j = {{"root", dataset.root.string()},
                      {"split", dataset.split},
                      {"field_map", field_map_json(dataset.field_map)},
                      {"limit", dataset.limit ? json(*dataset.limit) : json(nullptr)}};
    json backend_j = {{"kind", backend.kind == BackendKind::http       ? "http"
                               : backend.kind == BackendKind::replay ? "replay"
                                                                     : "scripted"},
                      {"unsupported_fields",
                       backend.unsupported_fields == UnsupportedFieldPolicy::drop ? "drop" : "fail"}};
    if (!backend.fixtures.empty()) backend_j["fixtures"] = backend.fixtures.string();
    if (!backend.script.empty()) backend_j["script"] = backend.script;
    if (!backend.base_url.empty()) backend_j["base_url"] = backend.base_url;

    json persona_j = json::object();
    for (const auto& p : personas.personas) persona_j[std::string(to_string(p.id))] = p.text;
    json prompts_j = {{"persona", persona_j}};
    if (template_dir) prompts_j["template_dir"] = template_dir->string();

    return {
        {"dataset", dataset_j},
        {"models", models_j},
        {"coder_tiers", coder_tiers},
        {"pipelines", pipelines_j},
        {"seeds", seeds},
        {"exec",
         {{"timeout_s", static_cast<double>(exec.timeout.count()) / 1000.0},
          {"rves_runs", exec.rves_runs},
          {"trim_policy", to_string(exec.trim)}}},
        {"output_dir", output_dir.string()},
        {"max_in_flight", max_in_flight},
        {"backend", backend_j},
        {"prompts", prompts_j},
    };
}

void ExperimentConfig::validate() const {
    if (dataset.root.empty()) throw ConfigError("dataset.root is required");
    if (dataset.split.empty()) throw ConfigError("dataset.split is required");
    if (seeds.empty()) throw ConfigError("seeds must be nonempty");
    if (std::set<std::int64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw ConfigError("seeds must be distinct");
    }
    if (pipelines.empty()) throw ConfigError("no pipelines configured");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (exec.rves_runs != 0 && exec.rves_runs < 3) throw ConfigError("exec.rves_runs must be 0 or >= 3");
    if (output_dir.empty()) throw ConfigError("output_dir is required");

    for (const auto& [id, m] : models) {
        try {
            m.decode.validate();
        } catch (const Error& e) {
            throw ConfigError("model '" + id + "': " + e.what());
        }
        for (const auto& [role, budget] : m.budgets) {
            if (budget < 1) throw ConfigError("model '" + id + "': budgets must be positive");
        }
    }
    for (const auto& [tier, members] : coder_tiers) {
        if (members.empty()) throw ConfigError("coder tier '" + tier + "' is empty");
        for (const auto& m : members) {
            if (!models.count(m)) throw ConfigError("coder tier '" + tier + "' references unknown model '" + m + "'");
        }
    }

    std::set<std::string> keys;
    for (const auto& p : pipelines) {
        if (p.key.empty()) throw ConfigError("pipeline key must be nonempty");
        if (p.key.find_first_of("/\\") != std::string::npos) {
            throw ConfigError("pipeline key '" + p.key + "' must not contain path separators");
        }
        if (!keys.insert(p.key).second) throw ConfigError("duplicate pipeline key '" + p.key + "'");
        auto need = [&](const std::string& model, std::string_view field) {
            if (model.empty()) throw ConfigError("pipeline '" + p.key + "': " + std::string(field) + " is required");
            if (!models.count(model)) {
                throw ConfigError("pipeline '" + p.key + "': unknown model '" + model + "'");
            }
        };
        switch (p.id) {
            case PipelineId::baseline: need(p.model, "model"); break;
            case PipelineId::mad:
                need(p.model, "model");
                need(p.judge, "judge");
                if (p.rounds < 1) throw ConfigError("pipeline '" + p.key + "': rounds must be >= 1");
                break;
            case PipelineId::planner_coder:
                if (p.planners.empty()) throw ConfigError("pipeline '" + p.key + "': planners is required");
                for (const auto& m : p.planners) need(m, "planners");
                need(p.coder, "coder");
                break;
            case PipelineId::coder_aggregator: {
                if (!p.coder_tier.empty() && !p.coders.empty()) {
                    throw ConfigError("pipeline '" + p.key + "': give coders or coder_tier, not both");
                }
                if (!p.coder_tier.empty() && !coder_tiers.count(p.coder_tier)) {
                    throw ConfigError("pipeline '" + p.key + "': unknown coder tier '" + p.coder_tier + "'");
                }
                const auto list = coders_for(p);
                if (list.empty()) throw ConfigError("pipeline '" + p.key + "': coders is required");
                for (const auto& m : list) need(m, "coders");
                need(p.aggregator, "aggregator");
                break;
            }
        }
    }

    switch (backend.kind) {
        case BackendKind::replay:
            if (backend.fixtures.empty()) throw ConfigError("backend.fixtures is required for replay");
            break;
        case BackendKind::scripted:
            if (backend.script.empty()) throw ConfigError("backend.script is required for scripted");
            break;
        case BackendKind::http: break;
    }
    personas.validate();
}

const ModelProfile& ExperimentConfig::model(const std::string& id) const {
    auto it = models.find(id);
    if (it == models.end()) throw ConfigError("unknown model '" + id + "'");
    return it->second;
}

std::vector<std::string> ExperimentConfig::coders_for(const PipelineSpec& spec) const {
    if (spec.coder_tier.empty()) return spec.coders;
    auto it = coder_tiers.find(spec.coder_tier);
    if (it == coder_tiers.end()) throw ConfigError("unknown coder tier '" + spec.coder_tier + "'");
    return it->second;
}

std::string ExperimentConfig::canonical_text() const { return to_json().dump(2) + "\n"; }

std::string config_hash(std::string_view canonical_text) { return hex64(fnv1a64(canonical_text)); }

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
    switch (cfg.kind) {
        case BackendKind::replay: return std::make_unique<ReplayBackend>(cfg.fixtures);
        case BackendKind::scripted: return std::make_unique<ScriptedBackend>(cfg.script);
        case BackendKind::http: {
            auto opts = HttpBackendOptions::from_env();
            if (!cfg.base_url.empty()) opts.base_url = cfg.base_url;
            if (opts.base_url.empty()) throw ConfigError("http backend needs backend.base_url or OPENAI_BASE_URL");
            opts.unsupported_fields = cfg.unsupported_fields;
            return std::make_unique<HttpBackend>(std::move(opts));
        }
    }
    throw ConfigError("unknown backend kind");
}

}  // namespace sqlagents
