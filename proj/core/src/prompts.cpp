#include "sqlagents/prompts.hpp"

#include <cctype>

#include <nlohmann/json.hpp>

#include "sqlagents/backend.hpp"
#include "sqlagents/errors.hpp"
#include "sqlagents/jsonl.hpp"

namespace sqlagents {

namespace detail {
extern const std::pair<std::string_view, std::string_view> kEmbeddedTemplates[];
extern const int kEmbeddedTemplateCount;
}  // namespace detail

namespace {

bool slot_char(char c, bool first) {
    const auto u = static_cast<unsigned char>(c);
    return std::islower(u) || c == '_' || (!first && std::isdigit(u));
}

// Length of a "{name}" marker at pos, or 0.
std::size_t slot_at(std::string_view body, std::size_t pos, std::string* name) {
    if (body[pos] != '{') return 0;
    std::size_t i = pos + 1;
    while (i < body.size() && slot_char(body[i], i == pos + 1)) ++i;
    if (i == pos + 1 || i >= body.size() || body[i] != '}') return 0;
    if (name) *name = std::string(body.substr(pos + 1, i - pos - 1));
    return i - pos + 1;
}

std::set<std::string> expected_slots(TemplateId id) {
    switch (id) {
        case TemplateId::baseline: return {"schema", "question"};
        case TemplateId::mad_starter: return {"persona", "schema", "question"};
        case TemplateId::mad_discuss: return {"schema", "question", "agent_responses"};
        case TemplateId::mad_judge: return {"schema", "question", "agent_responses"};
        case TemplateId::pc_planner: return {"schema", "question"};
        case TemplateId::pc_coder: return {"schema", "question", "plan"};
        case TemplateId::ca_aggregator: return {"schema", "question", "hint", "coder_outputs"};
    }
    return {};
}

std::string strip_final_newline(std::string_view text) {
    if (!text.empty() && text.back() == '\n') text.remove_suffix(1);
    if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
    return std::string(text);
}

// Substitutes slots in `text`; reports whether any substituted value was non-empty.
std::string substitute(std::string_view text, const std::map<std::string, std::string>& values,
                       bool* any_nonempty) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        std::string name;
        if (auto n = slot_at(text, i, &name); n > 0) {
            const auto& v = values.at(name);
            if (any_nonempty && !v.empty()) *any_nonempty = true;
            out += v;
            i += n;
        } else {
            out += text[i++];
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(TemplateId id) {
    switch (id) {
        case TemplateId::baseline: return "baseline";
        case TemplateId::mad_starter: return "mad_starter";
        case TemplateId::mad_discuss: return "mad_discuss";
        case TemplateId::mad_judge: return "mad_judge";
        case TemplateId::pc_planner: return "pc_planner";
        case TemplateId::pc_coder: return "pc_coder";
        case TemplateId::ca_aggregator: return "ca_aggregator";
    }
    return "baseline";
}

std::optional<TemplateId> parse_template_id(std::string_view name) {
    for (auto id : kAllTemplates) {
        if (to_string(id) == name) return id;
    }
    return std::nullopt;
}

std::string_view to_string(PersonaId id) {
    switch (id) {
        case PersonaId::simple: return "simple";
        case PersonaId::technical: return "technical";
        case PersonaId::thinker: return "thinker";
    }
    return "simple";
}

PromptTemplate::PromptTemplate(TemplateId id, std::string body) : id_(id), body_(std::move(body)) {
    for (std::size_t i = 0; i < body_.size(); ++i) {
        std::string name;
        if (auto n = slot_at(body_, i, &name); n > 0) {
            slots_.insert(name);
            i += n - 1;
        }
    }
    if (auto want = expected_slots(id_); slots_ != want) {
        std::string got;
        for (const auto& s : slots_) got += (got.empty() ? "" : ", ") + s;
        throw RenderError("template " + std::string(to_string(id_)) + " has slots {" + got +
                          "}, which differ from the required set");
    }
}

bool PromptTemplate::cot_suffix_applicable() const noexcept {
    return id_ != TemplateId::pc_planner && id_ != TemplateId::ca_aggregator;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values,
                                   bool thinking) const {
    for (const auto& s : slots_) {
        if (!values.contains(s)) {
            throw RenderError("template " + std::string(to_string(id_)) + ": missing slot '" + s + "'");
        }
    }
    for (const auto& [k, _] : values) {
        if (!slots_.contains(k)) {
            throw RenderError("template " + std::string(to_string(id_)) + ": unexpected slot '" + k + "'");
        }
    }

    std::string out;
    std::string_view body = body_;
    for (std::size_t i = 0; i < body.size();) {
        const auto open = body.find("[[", i);
        if (open == std::string_view::npos) {
            out += substitute(body.substr(i), values, nullptr);
            break;
        }
        const auto close = body.find("]]", open + 2);
        if (close == std::string_view::npos) {
            throw RenderError("template " + std::string(to_string(id_)) + ": unterminated [[");
        }
        out += substitute(body.substr(i, open - i), values, nullptr);
        bool any = false;
        auto inner = substitute(body.substr(open + 2, close - open - 2), values, &any);
        if (any) out += inner;
        i = close + 2;
    }
    if (cot_suffix_applicable() && !thinking) {
        out += '\n';
        out += kCotSuffix;
    }
    return out;
}

PersonaSet PersonaSet::from_json(const nlohmann::json& j) {
    PersonaSet set;
    if (j.is_null()) return set;
    if (!j.is_object()) throw ConfigError("prompts.persona must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!value.is_string()) throw ConfigError("prompts.persona." + key + " must be a string");
        bool found = false;
        for (auto& p : set.personas) {
            if (to_string(p.id) == key) {
                p.text = value.get<std::string>();
                found = true;
            }
        }
        if (!found) throw ConfigError("unknown persona '" + key + "'");
    }
    set.validate();
    return set;
}

void PersonaSet::validate() const {
    for (std::size_t i = 0; i < personas.size(); ++i) {
        if (personas[i].text.empty()) {
            throw ConfigError("persona " + std::string(to_string(personas[i].id)) + " is empty");
        }
        for (std::size_t k = i + 1; k < personas.size(); ++k) {
            if (personas[i].text == personas[k].text) throw ConfigError("persona texts must differ");
        }
    }
}

PromptLibrary PromptLibrary::defaults() {
    PromptLibrary lib;
    for (auto id : kAllTemplates) {
        bool found = false;
        for (int i = 0; i < detail::kEmbeddedTemplateCount; ++i) {
            if (detail::kEmbeddedTemplates[i].first == to_string(id)) {
                lib.templates_.emplace_back(id, strip_final_newline(detail::kEmbeddedTemplates[i].second));
                found = true;
            }
        }
        if (!found) throw RenderError("no built-in template " + std::string(to_string(id)));
    }
    return lib;
}

PromptLibrary PromptLibrary::from_directory(const std::filesystem::path& dir) {
    PromptLibrary lib = defaults();
    for (auto& t : lib.templates_) {
        const auto file = dir / (std::string(to_string(t.id())) + ".txt");
        if (std::filesystem::exists(file)) t = PromptTemplate(t.id(), strip_final_newline(read_file(file)));
    }
    return lib;
}

const PromptTemplate& PromptLibrary::get(TemplateId id) const {
    for (const auto& t : templates_) {
        if (t.id() == id) return t;
    }
    throw RenderError("unknown template " + std::string(to_string(id)));
}

std::string PromptLibrary::render(TemplateId id, const std::map<std::string, std::string>& slots,
                                  const ModelProfile& model) const {
    return get(id).render(slots, model.thinking);
}

std::string format_agent_responses(std::span<const std::pair<int, std::string>> responses) {
    std::string out;
    for (const auto& [agent, text] : responses) {
        if (!out.empty()) out += '\n';
        out += "###### Agent " + std::to_string(agent) + "\n" + text;
    }
    return out;
}

std::string format_candidates(std::span<const CandidateBlock> candidates) {
    std::string out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        if (!out.empty()) out += "\n\n";
        out += "###### Candidate " + std::to_string(i + 1) + " (" + c.model_id + ")\n";
        if (c.failure) {
            out += "[no candidate: " + *c.failure + "]";
            continue;
        }
        out += c.reasoning;
        if (!c.reasoning.empty() && c.sql) out += "\n";
        if (c.sql) out += "```sql\n" + *c.sql + "\n```";
    }
    return out;
}

std::string plan_header(std::string_view planner_id) {
    return "--- PLAN FROM " + std::string(planner_id) + " ---";
}

std::string render_joint_plans(std::span<const PlanEntry> plans) {
    if (plans.empty()) throw RenderError("render_joint_plans: no plans");
    if (plans.size() == 1) return plans.front().text;
    std::string out;
    for (const auto& p : plans) {
        if (!out.empty()) out += "\n\n";
        out += plan_header(p.planner_id) + "\n" + p.text;
    }
    return out;
}

}  // namespace sqlagents
