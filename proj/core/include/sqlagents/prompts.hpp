#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sqlagents {

struct ModelProfile;

enum class TemplateId {
    baseline,
    mad_starter,
    mad_discuss,
    mad_judge,
    pc_planner,
    pc_coder,
    ca_aggregator,
};

inline constexpr std::array<TemplateId, 7> kAllTemplates = {
    TemplateId::baseline,   TemplateId::mad_starter, TemplateId::mad_discuss,
    TemplateId::mad_judge,  TemplateId::pc_planner,  TemplateId::pc_coder,
    TemplateId::ca_aggregator,
};

std::string_view to_string(TemplateId id);
std::optional<TemplateId> parse_template_id(std::string_view name);

inline constexpr std::string_view kCotSuffix = "Let's think step by step";

// Body syntax: {name} is a slot; [[ ... ]] is an optional fragment dropped
// when every slot inside it renders empty.
class PromptTemplate {
public:
    PromptTemplate(TemplateId id, std::string body);

    TemplateId id() const noexcept { return id_; }
    const std::string& body() const noexcept { return body_; }
    const std::set<std::string>& slots() const noexcept { return slots_; }
    bool cot_suffix_applicable() const noexcept;

    // Throws RenderError on a missing or unexpected slot.
    std::string render(const std::map<std::string, std::string>& values, bool thinking) const;

private:
    TemplateId id_;
    std::string body_;
    std::set<std::string> slots_;
};

enum class PersonaId { simple, technical, thinker };

struct Persona {
    PersonaId id;
    std::string text;
};

std::string_view to_string(PersonaId id);

struct PersonaSet {
    std::array<Persona, 3> personas{{
        {PersonaId::simple, "prefers short and concise solutions"},
        {PersonaId::technical, "gives detailed, technically thorough answers"},
        {PersonaId::thinker, "explores multiple alternatives before deciding"},
    }};

    // Keys simple / technical / thinker; unknown keys are an error.
    static PersonaSet from_json(const nlohmann::json& j);
    const Persona& at(std::size_t agent_index) const { return personas.at(agent_index); }
    void validate() const;
};

class PromptLibrary {
public:
    // Templates compiled into the library.
    static PromptLibrary defaults();
    // Reads <dir>/<template_id>.txt; ids with no file keep the default body.
    static PromptLibrary from_directory(const std::filesystem::path& dir);

    const PromptTemplate& get(TemplateId id) const;
    std::string render(TemplateId id, const std::map<std::string, std::string>& slots,
                       const ModelProfile& model) const;

    PersonaSet personas;

private:
    std::vector<PromptTemplate> templates_;
};

// "###### Agent <n>\n<text>" blocks joined by newlines, in the given order.
std::string format_agent_responses(std::span<const std::pair<int, std::string>> responses);

struct CandidateBlock {
    std::string model_id;
    std::string reasoning;
    std::optional<std::string> sql;
    std::optional<std::string> failure;  // set when the coder produced nothing usable
};

// "###### Candidate <i> (<model>)\n<reasoning>\n```sql\n<sql>\n```" blocks,
// 1-based ordinals, separated by a blank line.
std::string format_candidates(std::span<const CandidateBlock> candidates);

struct PlanEntry {
    std::string planner_id;
    std::string text;
};

std::string plan_header(std::string_view planner_id);

// One plan passes through untouched; several are each headed by
// "--- PLAN FROM <id> ---" and separated by a blank line.
std::string render_joint_plans(std::span<const PlanEntry> plans);

}  // namespace sqlagents
