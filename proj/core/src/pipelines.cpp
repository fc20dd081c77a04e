#include "sqlagents/pipelines.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sqlagents/errors.hpp"

namespace sqlagents {

std::string_view to_string(PipelineId id) {
    switch (id) {
        case PipelineId::baseline: return "baseline";
        case PipelineId::mad: return "mad";
        case PipelineId::planner_coder: return "planner_coder";
        case PipelineId::coder_aggregator: return "coder_aggregator";
    }
    return "baseline";
}

std::optional<PipelineId> parse_pipeline_id(std::string_view name) {
    for (auto id : {PipelineId::baseline, PipelineId::mad, PipelineId::planner_coder,
                    PipelineId::coder_aggregator}) {
        if (to_string(id) == name) return id;
    }
    return std::nullopt;
}

std::string turn_tag(std::string_view example_id, std::string_view prefix, std::string_view local) {
    std::string tag(example_id);
    tag += '/';
    tag += prefix;
    tag += '.';
    tag += local;
    return tag;
}

std::vector<std::optional<std::string>> Transcript::judge_sql_by_round() const {
    std::vector<std::optional<std::string>> out;
    for (const auto& t : turns) {
        if (t.agent_id != "judge") continue;
        if (static_cast<int>(out.size()) < t.round) out.resize(static_cast<std::size_t>(t.round));
        out[static_cast<std::size_t>(t.round - 1)] = t.extracted_sql;
    }
    return out;
}

std::vector<nlohmann::json> transcript_to_jsonl(const Transcript& t) {
    std::vector<nlohmann::json> out;
    out.reserve(t.turns.size() + 1);
    auto opt = [](const std::optional<std::string>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    for (const auto& turn : t.turns) {
        nlohmann::json j = {
            {"type", "turn"},
            {"example_id", t.example_id},
            {"pipeline", to_string(t.pipeline)},
            {"agent_id", turn.agent_id},
            {"round", turn.round},
            {"model", turn.model_id},
            {"tag", turn.tag},
            {"prompt", turn.prompt},
            {"raw_text", turn.raw_text},
            {"extracted_sql", opt(turn.extracted_sql)},
        };
        if (!turn.error.empty()) j["error"] = turn.error;
        out.push_back(std::move(j));
    }
    out.push_back({
        {"type", "summary"},
        {"example_id", t.example_id},
        {"pipeline", to_string(t.pipeline)},
        {"turns", t.turns.size()},
        {"final_sql", opt(t.final_sql)},
        {"failure", opt(t.failure)},
        {"warnings", t.warnings},
    });
    return out;
}

namespace {

std::string prefix_of(const PipelineContext& ctx, PipelineId id) {
    return ctx.tag_prefix.empty() ? std::string(to_string(id)) : ctx.tag_prefix;
}

void check_context(const PipelineContext& ctx) {
    if (!ctx.client || !ctx.prompts) throw ContractError("pipeline context needs a client and prompts");
}

std::string error_message(const std::exception_ptr& err) {
    try {
        std::rethrow_exception(err);
    } catch (const OverflowError& e) {
        return std::string("overflow: ") + e.what();
    } catch (const std::exception& e) {
        return std::string("backend: ") + e.what();
    } catch (...) {
        return "backend: unknown error";
    }
}

AgentTurn make_turn(std::string agent_id, int round, const ModelProfile& model, const ChatRequest& req) {
    AgentTurn t;
    t.agent_id = std::move(agent_id);
    t.round = round;
    t.model_id = model.model_id;
    t.tag = req.tag;
    t.prompt = req.messages.front().text;
    return t;
}

// Fills raw text (and extraction when wanted) from a batch slot; false on error.
bool settle(AgentTurn& turn, const BatchSlot& slot, bool extract) {
    if (!slot.ok()) {
        turn.error = error_message(slot.error);
        return false;
    }
    turn.raw_text = slot.completion->text;
    if (extract) turn.extracted_sql = extract_sql(turn.raw_text).sql;
    return true;
}

void finish_from(Transcript& t, const AgentTurn& turn) {
    const auto ex = extract_sql(turn.raw_text);
    if (ex.ok()) {
        t.final_sql = ex.sql;
    } else {
        t.failure = "extraction: " + ex.error;
    }
}

// Text after the last </think> when a reasoning model produced one.
std::string answer_part(const std::string& raw) {
    const auto close = raw.rfind("</think>");
    if (close == std::string::npos) return raw;
    auto rest = raw.substr(close + 8);
    const auto start = rest.find_first_not_of(" \t\r\n");
    return start == std::string::npos ? raw : rest.substr(start);
}

// Coder text with its final query (and that query's fence) cut out.
std::string reasoning_of(const std::string& raw, const std::optional<std::string>& sql) {
    if (!sql) return raw;
    const auto at = raw.rfind(*sql);
    if (at == std::string::npos) return raw;
    auto begin = at;
    auto end = at + sql->size();
    const auto open = raw.rfind("```", begin);
    if (open != std::string::npos && raw.find_first_not_of(" \t\r\n", raw.find('\n', open)) == begin) {
        const auto close = raw.find("```", end);
        begin = open;
        end = close == std::string::npos ? raw.size() : close + 3;
    } else {
        while (end < raw.size() && (raw[end] == ';' || raw[end] == '.')) ++end;
    }
    auto text = raw.substr(0, begin) + raw.substr(end);
    const auto last = text.find_last_not_of(" \t\r\n");
    text.erase(last == std::string::npos ? 0 : last + 1);
    return text;
}

}  // namespace

Transcript run_baseline(const PipelineContext& ctx, const Example& example, const SchemaCatalog& schema,
                        const ModelProfile& model) {
    check_context(ctx);
    Transcript t;
    t.example_id = example.example_id;
    t.pipeline = PipelineId::baseline;

    const auto prompt = ctx.prompts->render(
        TemplateId::baseline, {{"schema", schema.ddl_text}, {"question", example.question}}, model);
    auto req = make_request(prompt, model, AgentRole::baseline,
                            turn_tag(example.example_id, prefix_of(ctx, t.pipeline), "coder"));
    auto turn = make_turn("coder:" + model.model_id, 0, model, req);
    try {
        turn.raw_text = ctx.client->complete(req, model).text;
    } catch (...) {
        turn.error = error_message(std::current_exception());
        t.failure = turn.error;
        t.turns.push_back(std::move(turn));
        return t;
    }
    turn.extracted_sql = extract_sql(turn.raw_text).sql;
    t.turns.push_back(std::move(turn));
    finish_from(t, t.turns.back());
    return t;
}

Transcript run_mad(const PipelineContext& ctx, const Example& example, const SchemaCatalog& schema,
                   const ModelProfile& model, int rounds) {
    const std::array<ModelProfile, 1> agents{model};
    return run_mad(ctx, example, schema, agents, model, rounds);
}

Transcript run_mad(const PipelineContext& ctx, const Example& example, const SchemaCatalog& schema,
                   std::span<const ModelProfile> agents, const ModelProfile& judge, int rounds) {
    check_context(ctx);
    if (rounds < 1) throw ContractError("run_mad: rounds must be >= 1");
    if (agents.size() != 1 && agents.size() != 3) {
        throw ContractError("run_mad: expected one shared agent profile or three");
    }
    constexpr int kAgents = 3;
    auto agent_model = [&](int i) -> const ModelProfile& {
        return agents.size() == 1 ? agents[0] : agents[static_cast<std::size_t>(i)];
    };

    Transcript t;
    t.example_id = example.example_id;
    t.pipeline = PipelineId::mad;
    const auto prefix = prefix_of(ctx, t.pipeline);
    const auto& eid = example.example_id;

    // Runs one round of agent turns; false when any agent failed.
    auto run_agents = [&](int round, const std::vector<std::string>& prompts,
                          std::vector<std::string>& outputs) {
        std::vector<BatchJob> jobs;
        for (int i = 0; i < kAgents; ++i) {
            const auto& m = agent_model(i);
            jobs.push_back({make_request(prompts[static_cast<std::size_t>(i)], m, AgentRole::discussion,
                                         turn_tag(eid, prefix,
                                                  "agent" + std::to_string(i + 1) + ".round" +
                                                      std::to_string(round))),
                            &m});
        }
        auto slots = ctx.client->batch(std::span<const BatchJob>(jobs), ctx.max_in_flight);
        bool ok = true;
        outputs.assign(kAgents, {});
        for (int i = 0; i < kAgents; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            auto turn = make_turn("agent" + std::to_string(i + 1), round, agent_model(i), jobs[idx].request);
            if (!settle(turn, slots[idx], true)) {
                if (ok) t.failure = turn.error;
                ok = false;
            }
            outputs[idx] = turn.raw_text;
            t.turns.push_back(std::move(turn));
        }
        return ok;
    };

    std::vector<std::string> prompts(kAgents);
    for (int i = 0; i < kAgents; ++i) {
        prompts[static_cast<std::size_t>(i)] = ctx.prompts->render(
            TemplateId::mad_starter,
            {{"persona", ctx.prompts->personas.at(static_cast<std::size_t>(i)).text},
             {"schema", schema.ddl_text},
             {"question", example.question}},
            agent_model(i));
    }
    std::vector<std::string> previous;
    if (!run_agents(0, prompts, previous)) return t;

    for (int round = 1; round <= rounds; ++round) {
        for (int i = 0; i < kAgents; ++i) {
            std::vector<std::pair<int, std::string>> others;
            for (int j = 0; j < kAgents; ++j) {
                if (j != i) others.emplace_back(j + 1, previous[static_cast<std::size_t>(j)]);
            }
            prompts[static_cast<std::size_t>(i)] = ctx.prompts->render(
                TemplateId::mad_discuss,
                {{"schema", schema.ddl_text},
                 {"question", example.question},
                 {"agent_responses", format_agent_responses(others)}},
                agent_model(i));
        }
        std::vector<std::string> current;
        if (!run_agents(round, prompts, current)) return t;

        std::vector<std::pair<int, std::string>> all;
        for (int j = 0; j < kAgents; ++j) all.emplace_back(j + 1, current[static_cast<std::size_t>(j)]);
        const auto judge_prompt = ctx.prompts->render(
            TemplateId::mad_judge,
            {{"schema", schema.ddl_text},
             {"question", example.question},
             {"agent_responses", format_agent_responses(all)}},
            judge);
        auto req = make_request(judge_prompt, judge, AgentRole::discussion,
                                turn_tag(eid, prefix, "judge.round" + std::to_string(round)));
        auto turn = make_turn("judge", round, judge, req);
        try {
            turn.raw_text = ctx.client->complete(req, judge).text;
        } catch (...) {
            turn.error = error_message(std::current_exception());
            t.failure = turn.error;
            t.turns.push_back(std::move(turn));
            return t;
        }
        turn.extracted_sql = extract_sql(turn.raw_text).sql;
        t.turns.push_back(std::move(turn));
        previous = std::move(current);
    }

    finish_from(t, t.turns.back());
    return t;
}

Transcript run_planner_coder(const PipelineContext& ctx, const Example& example,
                             const SchemaCatalog& schema, std::span<const ModelProfile> planners,
                             const ModelProfile& coder) {
    check_context(ctx);
    if (planners.empty()) throw ContractError("run_planner_coder: no planners");
    Transcript t;
    t.example_id = example.example_id;
    t.pipeline = PipelineId::planner_coder;
    const auto prefix = prefix_of(ctx, t.pipeline);

    std::vector<BatchJob> jobs;
    for (std::size_t k = 0; k < planners.size(); ++k) {
        const auto& p = planners[k];
        const auto prompt = ctx.prompts->render(
            TemplateId::pc_planner, {{"schema", schema.ddl_text}, {"question", example.question}}, p);
        jobs.push_back({make_request(prompt, p, AgentRole::planner,
                                     turn_tag(example.example_id, prefix, "planner" + std::to_string(k + 1))),
                        &p});
    }
    auto slots = ctx.client->batch(std::span<const BatchJob>(jobs), ctx.max_in_flight);

    std::vector<PlanEntry> plans;
    for (std::size_t k = 0; k < planners.size(); ++k) {
        auto turn = make_turn("planner:" + planners[k].model_id, 0, planners[k], jobs[k].request);
        if (settle(turn, slots[k], false)) {
            auto plan = answer_part(turn.raw_text);
            if (plan.find_first_not_of(" \t\r\n") == std::string::npos) {
                t.warnings.push_back("planner " + planners[k].model_id + " returned an empty plan");
                spdlog::warn("{}: {}", turn.tag, t.warnings.back());
            }
            plans.push_back({planners[k].model_id, std::move(plan)});
        } else {
            t.warnings.push_back("planner " + planners[k].model_id + " failed: " + turn.error);
            spdlog::warn("{}: {}", turn.tag, t.warnings.back());
        }
        t.turns.push_back(std::move(turn));
    }
    if (plans.empty()) {
        t.failure = "all planners failed";
        return t;
    }

    const auto prompt = ctx.prompts->render(TemplateId::pc_coder,
                                            {{"schema", schema.ddl_text},
                                             {"question", example.question},
                                             {"plan", render_joint_plans(plans)}},
                                            coder);
    auto req = make_request(prompt, coder, AgentRole::coder, turn_tag(example.example_id, prefix, "coder"));
    auto turn = make_turn("coder:" + coder.model_id, 0, coder, req);
    try {
        turn.raw_text = ctx.client->complete(req, coder).text;
    } catch (...) {
        turn.error = error_message(std::current_exception());
        t.failure = turn.error;
        t.turns.push_back(std::move(turn));
        return t;
    }
    turn.extracted_sql = extract_sql(turn.raw_text).sql;
    t.turns.push_back(std::move(turn));
    finish_from(t, t.turns.back());
    return t;
}

Transcript run_coder_aggregator(const PipelineContext& ctx, const Example& example,
                                const SchemaCatalog& schema, std::span<const ModelProfile> coders,
                                const ModelProfile& aggregator) {
    check_context(ctx);
    if (coders.empty()) throw ContractError("run_coder_aggregator: no coders");
    Transcript t;
    t.example_id = example.example_id;
    t.pipeline = PipelineId::coder_aggregator;
    const auto prefix = prefix_of(ctx, t.pipeline);

    std::vector<BatchJob> jobs;
    for (std::size_t i = 0; i < coders.size(); ++i) {
        const auto& c = coders[i];
        const auto prompt = ctx.prompts->render(
            TemplateId::baseline, {{"schema", schema.ddl_text}, {"question", example.question}}, c);
        jobs.push_back({make_request(prompt, c, AgentRole::baseline,
                                     turn_tag(example.example_id, prefix, "coder" + std::to_string(i + 1))),
                        &c});
    }
    auto slots = ctx.client->batch(std::span<const BatchJob>(jobs), ctx.max_in_flight);

    std::vector<CandidateBlock> candidates;
    std::size_t succeeded = 0;
    for (std::size_t i = 0; i < coders.size(); ++i) {
        auto turn = make_turn("coder:" + coders[i].model_id, 0, coders[i], jobs[i].request);
        CandidateBlock block;
        block.model_id = coders[i].model_id;
        if (settle(turn, slots[i], true)) {
            ++succeeded;
            block.reasoning = reasoning_of(turn.raw_text, turn.extracted_sql);
            block.sql = turn.extracted_sql;
        } else {
            block.failure = "coder request failed";
            t.warnings.push_back("coder " + coders[i].model_id + " failed: " + turn.error);
            spdlog::warn("{}: {}", turn.tag, t.warnings.back());
        }
        candidates.push_back(std::move(block));
        t.turns.push_back(std::move(turn));
    }
    if (succeeded == 0) {
        t.failure = "all coders failed";
        return t;
    }

    const auto prompt = ctx.prompts->render(TemplateId::ca_aggregator,
                                            {{"schema", schema.ddl_text},
                                             {"question", example.question},
                                             {"hint", example.evidence.value_or("")},
                                             {"coder_outputs", format_candidates(candidates)}},
                                            aggregator);
    auto req = make_request(prompt, aggregator, AgentRole::aggregator,
                            turn_tag(example.example_id, prefix, "aggregator"));
    auto turn = make_turn("aggregator", 0, aggregator, req);
    try {
        turn.raw_text = ctx.client->complete(req, aggregator).text;
    } catch (...) {
        turn.error = error_message(std::current_exception());
        t.failure = turn.error;
        t.turns.push_back(std::move(turn));
        return t;
    }
    turn.extracted_sql = extract_sql(turn.raw_text).sql;
    t.turns.push_back(std::move(turn));
    finish_from(t, t.turns.back());
    return t;
}

}  // namespace sqlagents
