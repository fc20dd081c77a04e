#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sqlagents/backend.hpp"
#include "sqlagents/dataset.hpp"
#include "sqlagents/prompts.hpp"

namespace sqlagents {

struct Extraction {
    std::optional<std::string> sql;
    std::string error;  // set when sql is absent

    bool ok() const noexcept { return sql.has_value(); }
};

// Pulls the final query out of a free-text completion. Never throws.
//  1. <think>...</think> spans are ignored when anything follows them;
//  2. the last ```sql (or ```sqlite, or unlabeled block starting with
//     SELECT/WITH) fenced block wins;
//  3. otherwise the last SELECT/WITH statement in prose, ending at ';',
//     a blank line or end of text.
// Trailing semicolons are removed; internal newlines are kept.
Extraction extract_sql(std::string_view raw_text);

enum class PipelineId { baseline, mad, planner_coder, coder_aggregator };

std::string_view to_string(PipelineId id);
std::optional<PipelineId> parse_pipeline_id(std::string_view name);

struct AgentTurn {
    std::string agent_id;  // agent1..3, judge, planner:<m>, coder:<m>, aggregator
    int round = 0;
    std::string model_id;
    std::string tag;
    std::string prompt;
    std::string raw_text;
    std::optional<std::string> extracted_sql;
    std::string error;  // backend failure for this turn, if any
};

struct Transcript {
    std::string example_id;
    PipelineId pipeline = PipelineId::baseline;
    std::vector<AgentTurn> turns;
    std::optional<std::string> final_sql;
    std::optional<std::string> failure;
    std::vector<std::string> warnings;

    // MAD: judge extraction per round (index 0 is round 1).
    std::vector<std::optional<std::string>> judge_sql_by_round() const;
};

// One object per turn followed by a summary object.
std::vector<nlohmann::json> transcript_to_jsonl(const Transcript& t);

struct PipelineContext {
    ChatClient* client = nullptr;
    const PromptLibrary* prompts = nullptr;
    // Concurrent turns within a round (MAD agents, planners, coders).
    int max_in_flight = 3;
    // Tags read "<example_id>/<prefix>.<turn>"; empty means the pipeline id.
    std::string tag_prefix;
};

// "<example_id>/<prefix>.<local>", e.g. "17/mad.agent2.round1".
std::string turn_tag(std::string_view example_id, std::string_view prefix, std::string_view local);

Transcript run_baseline(const PipelineContext& ctx, const Example& example,
                        const SchemaCatalog& schema, const ModelProfile& model);

// `agents` holds one profile shared by all three agents, or three profiles.
Transcript run_mad(const PipelineContext& ctx, const Example& example, const SchemaCatalog& schema,
                   std::span<const ModelProfile> agents, const ModelProfile& judge, int rounds = 3);
Transcript run_mad(const PipelineContext& ctx, const Example& example, const SchemaCatalog& schema,
                   const ModelProfile& model, int rounds = 3);

Transcript run_planner_coder(const PipelineContext& ctx, const Example& example,
                             const SchemaCatalog& schema, std::span<const ModelProfile> planners,
                             const ModelProfile& coder);

Transcript run_coder_aggregator(const PipelineContext& ctx, const Example& example,
                                const SchemaCatalog& schema, std::span<const ModelProfile> coders,
                                const ModelProfile& aggregator);

}  // namespace sqlagents
