#include "sqlagents/runner.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "sqlagents/errors.hpp"
#include "sqlagents/jsonl.hpp"
#include "sqlagents/report.hpp"

namespace sqlagents {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json opt_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> opt_string(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

json soft_json(const SoftF1& s) {
    return {{"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn}, {"f1", s.f1}};
}

SoftF1 soft_from(const json& j) {
    SoftF1 s;
    s.tp = j.at("tp").get<std::size_t>();
    s.fp = j.at("fp").get<std::size_t>();
    s.fn = j.at("fn").get<std::size_t>();
    const auto tp = static_cast<double>(s.tp);
    if (s.tp + s.fp > 0) s.precision = tp / static_cast<double>(s.tp + s.fp);
    if (s.tp + s.fn > 0) s.recall = tp / static_cast<double>(s.tp + s.fn);
    s.f1 = j.at("f1").get<double>();
    return s;
}

std::string now_utc() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct PredScore {
    std::string status = "not_executed";
    std::string error;
    int ex = 0;
    SoftF1 soft;
};

PredScore score_sql(const SchemaCatalog& schema, const ExecOutcome& gold, const std::optional<std::string>& sql,
                    std::chrono::milliseconds timeout) {
    PredScore s;
    if (!sql) return s;
    if (gold.status != ExecStatus::ok) {
        s.status = "gold_error";
        s.error = gold.error_text;
        return s;
    }
    const auto out = execute(schema, *sql, timeout);
    s.status = std::string(to_string(out.status));
    if (out.status != ExecStatus::ok) {
        s.error = out.error_text;
        return s;
    }
    s.ex = exec_match(*gold.table, *out.table);
    s.soft = soft_f1(*gold.table, *out.table);
    return s;
}

std::string unit_name(std::size_t example_index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06zu", example_index);
    return buf;
}

// Everything a run needs besides the config.
struct Workspace {
    std::vector<Example> examples;
    std::map<std::string, std::shared_ptr<const SchemaCatalog>> schemas;
    std::map<std::string, std::string> schema_errors;
    std::vector<ExecOutcome> gold;
    std::vector<std::once_flag> gold_once;

    explicit Workspace(const ExperimentConfig& cfg)
        : examples(load_split(cfg.dataset.root, cfg.dataset.split, cfg.dataset.field_map)) {
        if (cfg.dataset.limit && examples.size() > *cfg.dataset.limit) examples.resize(*cfg.dataset.limit);
        gold.resize(examples.size());
        gold_once = std::vector<std::once_flag>(examples.size());
        for (const auto& ex : examples) {
            if (schemas.count(ex.db_id) || schema_errors.count(ex.db_id)) continue;
            try {
                schemas[ex.db_id] = std::make_shared<SchemaCatalog>(load_schema(cfg.dataset.root, ex.db_id));
            } catch (const Error& e) {
                spdlog::error("schema {}: {}", ex.db_id, e.what());
                schema_errors[ex.db_id] = e.what();
            }
        }
    }

    const ExecOutcome& gold_for(std::size_t i, const SchemaCatalog& schema, std::chrono::milliseconds timeout) {
        std::call_once(gold_once[i], [&] { gold[i] = execute(schema, examples[i].gold_sql, timeout); });
        return gold[i];
    }
};

Transcript run_pipeline(const PipelineContext& ctx, const ExperimentConfig& cfg,
                        const std::map<std::string, ModelProfile>& profiles, const PipelineSpec& spec,
                        const Example& ex, const SchemaCatalog& schema) {
    auto pick = [&](const std::string& id) -> const ModelProfile& { return profiles.at(id); };
    switch (spec.id) {
        case PipelineId::baseline: return run_baseline(ctx, ex, schema, pick(spec.model));
        case PipelineId::mad: return run_mad(ctx, ex, schema, pick(spec.model), spec.rounds);
        case PipelineId::planner_coder: {
            std::vector<ModelProfile> planners;
            for (const auto& p : spec.planners) planners.push_back(pick(p));
            return run_planner_coder(ctx, ex, schema, planners, pick(spec.coder));
        }
        case PipelineId::coder_aggregator: {
            std::vector<ModelProfile> coders;
            for (const auto& c : cfg.coders_for(spec)) coders.push_back(pick(c));
            return run_coder_aggregator(ctx, ex, schema, coders, pick(spec.aggregator));
        }
    }
    throw ContractError("unknown pipeline");
}

Transcript failed_transcript(const Example& ex, PipelineId id, std::string why) {
    Transcript t;
    t.example_id = ex.example_id;
    t.pipeline = id;
    t.failure = std::move(why);
    return t;
}

fs::path checkpoint_path(const fs::path& sdir, const std::string& key, std::size_t index,
                         std::string_view suffix) {
    return sdir / "checkpoints" / key / (unit_name(index) + std::string(suffix));
}

void write_manifest(const fs::path& run_dir, const RunManifest& m) {
    write_file_atomic(run_dir / "manifest.json", m.to_json().dump(2) + "\n");
}

std::vector<TimingRecord> time_unit(const ExperimentConfig& cfg, const SchemaCatalog& schema,
                                    const Example& ex, const ScoreRecord& rec) {
    std::vector<std::pair<int, std::string>> targets;
    if (rec.rounds.empty()) {
        if (rec.ex == 1 && rec.final_sql) targets.emplace_back(0, *rec.final_sql);
    } else {
        for (const auto& r : rec.rounds) {
            if (r.ex == 1 && r.sql) targets.emplace_back(r.round, *r.sql);
        }
    }
    std::vector<TimingRecord> out;
    TimingOptions opts;
    opts.runs = cfg.exec.rves_runs;
    opts.trim = cfg.exec.trim;
    opts.timeout = cfg.exec.timeout;
    for (const auto& [round, sql] : targets) {
        TimingRecord t;
        t.example_id = rec.example_id;
        t.pipeline_key = rec.pipeline_key;
        t.round = round;
        for (int attempt = 0; attempt < 2; ++attempt) {
            try {
                const auto sample = time_pair(schema, ex.gold_sql, sql, opts);
                if (!sample.tau) throw TimingError("non-positive timing");
                t.tau = sample.tau;
                t.gt_mean = trimmed_mean(sample.gt_times, opts.trim);
                t.pred_mean = trimmed_mean(sample.pred_times, opts.trim);
                t.r_ves = r_ves(true, t.tau);
                t.error.clear();
                break;
            } catch (const Error& e) {
                t.error = e.what();
                t.r_ves = 0.0;
            }
        }
        if (!t.error.empty()) spdlog::warn("timing {} {}: {}", rec.pipeline_key, rec.example_id, t.error);
        out.push_back(std::move(t));
    }
    return out;
}

SeedProgress run_seed(const fs::path& run_dir, const ExperimentConfig& cfg, Workspace& ws, std::int64_t seed,
                      const std::shared_ptr<Backend>& backend, const RunHooks& hooks, std::size_t& checkpointed,
                      std::mutex& writer) {
    const auto sdir = seed_dir(run_dir, seed);
    for (const auto& p : cfg.pipelines) fs::create_directories(sdir / "checkpoints" / p.key);

    auto trace = std::make_shared<TraceLog>(sdir / "trace.jsonl");
    ChatClient client(backend, trace, RetryPolicy{}, cfg.max_in_flight);
    auto prompts = cfg.template_dir ? PromptLibrary::from_directory(*cfg.template_dir) : PromptLibrary::defaults();
    prompts.personas = cfg.personas;

    std::map<std::string, ModelProfile> profiles = cfg.models;
    for (auto& [_, m] : profiles) m.decode.seed = seed;

    struct Unit {
        std::size_t pipeline;
        std::size_t example;
    };
    std::vector<Unit> pending;
    SeedProgress progress;
    progress.seed = seed;
    for (std::size_t p = 0; p < cfg.pipelines.size(); ++p) {
        for (std::size_t e = 0; e < ws.examples.size(); ++e) {
            ++progress.total;
            if (!fs::exists(checkpoint_path(sdir, cfg.pipelines[p].key, e, ".json"))) pending.push_back({p, e});
        }
    }

    auto process = [&](const Unit& u) {
        const auto& spec = cfg.pipelines[u.pipeline];
        const auto& ex = ws.examples[u.example];
        Transcript t;
        ScoreRecord rec;
        auto schema_it = ws.schemas.find(ex.db_id);
        if (schema_it == ws.schemas.end()) {
            t = failed_transcript(ex, spec.id, "schema: " + ws.schema_errors[ex.db_id]);
            rec = score_transcript(ex, SchemaCatalog{}, ExecOutcome{ExecStatus::sql_error, std::nullopt, "schema unavailable"},
                                   t, spec, cfg.exec.timeout);
        } else {
            const auto& schema = *schema_it->second;
            PipelineContext ctx{&client, &prompts, 3, spec.key};
            try {
                t = run_pipeline(ctx, cfg, profiles, spec, ex, schema);
            } catch (const std::exception& e) {
                t = failed_transcript(ex, spec.id, std::string("error: ") + e.what());
            }
            const auto& gold = ws.gold_for(u.example, schema, cfg.exec.timeout);
            rec = score_transcript(ex, schema, gold, t, spec, cfg.exec.timeout);
        }
        auto lines = transcript_to_jsonl(t);
        for (auto& l : lines) l["pipeline_key"] = spec.key;
        const json unit = {{"transcript", lines}, {"score", rec.to_json()}};

        std::lock_guard lock(writer);
        write_file_atomic(checkpoint_path(sdir, spec.key, u.example, ".json"), unit.dump() + "\n");
        ++checkpointed;
        if (hooks.on_checkpoint) hooks.on_checkpoint(checkpointed);
    };

    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.max_in_flight), pending.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < pending.size(); i = next++) process(pending[i]);
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }

    // Assemble in config order, then time correct predictions serially.
    std::string transcripts, scores, timings;
    for (std::size_t p = 0; p < cfg.pipelines.size(); ++p) {
        const auto& key = cfg.pipelines[p].key;
        for (std::size_t e = 0; e < ws.examples.size(); ++e) {
            const auto unit = json::parse(read_file(checkpoint_path(sdir, key, e, ".json")));
            for (const auto& line : unit.at("transcript")) transcripts += line.dump() + "\n";
            scores += unit.at("score").dump() + "\n";
            const auto rec = ScoreRecord::from_json(unit.at("score"));
            ++progress.completed;
            if (rec.failure) ++progress.failed;

            if (cfg.exec.rves_runs <= 0) continue;
            const auto tpath = checkpoint_path(sdir, key, e, ".timing.json");
            json tj;
            if (fs::exists(tpath)) {
                tj = json::parse(read_file(tpath));
            } else {
                tj = json::array();
                auto it = ws.schemas.find(ws.examples[e].db_id);
                if (it != ws.schemas.end()) {
                    for (const auto& t : time_unit(cfg, *it->second, ws.examples[e], rec)) tj.push_back(t.to_json());
                }
                write_file_atomic(tpath, tj.dump() + "\n");
            }
            for (const auto& t : tj) {
                timings += t.dump() + "\n";
                ++progress.timed;
            }
        }
    }
    write_file_atomic(sdir / "transcripts.jsonl", transcripts);
    write_file_atomic(sdir / "scores.jsonl", scores);
    write_file_atomic(sdir / "timing.jsonl", timings);
    progress.finished = true;
    return progress;
}

RunManifest execute_run(const fs::path& run_dir, const ExperimentConfig& cfg, RunManifest manifest,
                        const RunHooks& hooks) {
    Workspace ws(cfg);
    std::shared_ptr<Backend> backend = hooks.backend;
    if (!backend) backend = make_backend(cfg.backend);

    std::size_t checkpointed = 0;
    std::mutex writer;
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        if (manifest.seeds.size() <= i) manifest.seeds.push_back({cfg.seeds[i]});
        if (manifest.seeds[i].finished) continue;
        spdlog::info("seed {}: {} pipelines x {} examples", cfg.seeds[i], cfg.pipelines.size(), ws.examples.size());
        manifest.seeds[i] = run_seed(run_dir, cfg, ws, cfg.seeds[i], backend, hooks, checkpointed, writer);
        manifest.updated_at = now_utc();
        write_manifest(run_dir, manifest);
    }
    write_run_reports(run_dir);
    manifest.status = "complete";
    manifest.updated_at = now_utc();
    write_manifest(run_dir, manifest);
    return manifest;
}

ExperimentConfig load_stored_config(const fs::path& run_dir, const std::string& text) {
    auto cfg = ExperimentConfig::from_json(json::parse(text), run_dir);
    cfg.output_dir = run_dir;
    return cfg;
}

std::vector<ScoreRecord> read_scores(const fs::path& file) {
    std::vector<ScoreRecord> out;
    for (const auto& j : read_jsonl(file)) out.push_back(ScoreRecord::from_json(j));
    return out;
}

std::vector<TimingRecord> read_timings(const fs::path& file) {
    std::vector<TimingRecord> out;
    if (!fs::exists(file)) return out;
    for (const auto& j : read_jsonl(file)) out.push_back(TimingRecord::from_json(j));
    return out;
}

}  // namespace

json ScoreRecord::to_json() const {
    json r = json::array();
    for (const auto& s : rounds) {
        r.push_back({{"round", s.round},
                     {"sql", opt_json(s.sql)},
                     {"exec_status", s.exec_status},
                     {"ex", s.ex},
                     {"soft_f1", soft_json(s.soft)}});
    }
    return {
        {"example_id", example_id},
        {"db_id", db_id},
        {"difficulty", to_string(difficulty)},
        {"pipeline_key", pipeline_key},
        {"pipeline", to_string(pipeline)},
        {"label", label},
        {"final_sql", opt_json(final_sql)},
        {"failure", opt_json(failure)},
        {"exec_status", exec_status},
        {"exec_error", exec_error},
        {"ex", ex},
        {"soft_f1", soft_json(soft)},
        {"rounds", r},
    };
}

ScoreRecord ScoreRecord::from_json(const json& j) {
    ScoreRecord s;
    try {
        s.example_id = j.at("example_id").get<std::string>();
        s.db_id = j.at("db_id").get<std::string>();
        s.difficulty = parse_difficulty(j.at("difficulty").get<std::string>()).value_or(Difficulty::unlabeled);
        s.pipeline_key = j.at("pipeline_key").get<std::string>();
        auto id = parse_pipeline_id(j.at("pipeline").get<std::string>());
        if (!id) throw ParseError(0, "unknown pipeline");
        s.pipeline = *id;
        s.label = j.value("label", "");
        s.final_sql = opt_string(j, "final_sql");
        s.failure = opt_string(j, "failure");
        s.exec_status = j.at("exec_status").get<std::string>();
        s.exec_error = j.value("exec_error", "");
        s.ex = j.at("ex").get<int>();
        s.soft = soft_from(j.at("soft_f1"));
        for (const auto& r : j.value("rounds", json::array())) {
            RoundScore rs;
            rs.round = r.at("round").get<int>();
            rs.sql = opt_string(r, "sql");
            rs.exec_status = r.at("exec_status").get<std::string>();
            rs.ex = r.at("ex").get<int>();
            rs.soft = soft_from(r.at("soft_f1"));
            s.rounds.push_back(std::move(rs));
        }
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("score record: ") + e.what());
    }
    return s;
}

json TimingRecord::to_json() const {
    json j = {{"example_id", example_id},
              {"pipeline_key", pipeline_key},
              {"round", round},
              {"tau", tau ? json(*tau) : json(nullptr)},
              {"gt_mean_s", gt_mean},
              {"pred_mean_s", pred_mean},
              {"r_ves", r_ves}};
    if (!error.empty()) j["error"] = error;
    return j;
}

TimingRecord TimingRecord::from_json(const json& j) {
    TimingRecord t;
    try {
        t.example_id = j.at("example_id").get<std::string>();
        t.pipeline_key = j.at("pipeline_key").get<std::string>();
        t.round = j.at("round").get<int>();
        if (!j.at("tau").is_null()) t.tau = j.at("tau").get<double>();
        t.gt_mean = j.value("gt_mean_s", 0.0);
        t.pred_mean = j.value("pred_mean_s", 0.0);
        t.r_ves = j.at("r_ves").get<double>();
        t.error = j.value("error", "");
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("timing record: ") + e.what());
    }
    return t;
}

ScoreRecord score_transcript(const Example& example, const SchemaCatalog& schema, const ExecOutcome& gold,
                             const Transcript& transcript, const PipelineSpec& spec,
                             std::chrono::milliseconds timeout) {
    ScoreRecord r;
    r.example_id = example.example_id;
    r.db_id = example.db_id;
    r.difficulty = example.difficulty;
    r.pipeline_key = spec.key;
    r.pipeline = spec.id;
    r.label = spec.label();
    r.final_sql = transcript.final_sql;
    r.failure = transcript.failure;

    if (spec.id == PipelineId::mad) {
        auto verdicts = transcript.judge_sql_by_round();
        verdicts.resize(static_cast<std::size_t>(spec.rounds));
        for (std::size_t i = 0; i < verdicts.size(); ++i) {
            const auto s = score_sql(schema, gold, verdicts[i], timeout);
            r.rounds.push_back({static_cast<int>(i + 1), verdicts[i], s.status, s.ex, s.soft});
        }
    }
    if (!r.rounds.empty() && r.rounds.back().sql == r.final_sql) {
        const auto& last = r.rounds.back();
        r.exec_status = last.exec_status;
        r.ex = last.ex;
        r.soft = last.soft;
        if (r.exec_status != "ok" && r.exec_status != "not_executed") {
            r.exec_error = score_sql(schema, gold, r.final_sql, timeout).error;
        }
    } else {
        const auto s = score_sql(schema, gold, r.final_sql, timeout);
        r.exec_status = s.status;
        r.exec_error = s.error;
        r.ex = s.ex;
        r.soft = s.soft;
    }
    return r;
}

json RunManifest::to_json() const {
    json s = json::array();
    for (const auto& p : seeds) {
        s.push_back({{"seed", p.seed},
                     {"total", p.total},
                     {"completed", p.completed},
                     {"failed", p.failed},
                     {"timed", p.timed},
                     {"finished", p.finished}});
    }
    return {{"config_hash", config_hash},
            {"created_at", created_at},
            {"updated_at", updated_at},
            {"status", status},
            {"seeds", s}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    try {
        m.config_hash = j.at("config_hash").get<std::string>();
        m.created_at = j.value("created_at", "");
        m.updated_at = j.value("updated_at", "");
        m.status = j.at("status").get<std::string>();
        for (const auto& s : j.at("seeds")) {
            SeedProgress p;
            p.seed = s.at("seed").get<std::int64_t>();
            p.total = s.value("total", std::size_t{0});
            p.completed = s.value("completed", std::size_t{0});
            p.failed = s.value("failed", std::size_t{0});
            p.timed = s.value("timed", std::size_t{0});
            p.finished = s.value("finished", false);
            m.seeds.push_back(p);
        }
    } catch (const json::exception& e) {
        throw ResumeError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

RunManifest RunManifest::load(const fs::path& run_dir) {
    const auto file = run_dir / "manifest.json";
    if (!fs::exists(file)) throw ResumeError("no manifest in " + run_dir.string());
    try {
        return from_json(json::parse(read_file(file)));
    } catch (const json::parse_error& e) {
        throw ResumeError(std::string("malformed manifest: ") + e.what());
    }
}

fs::path seed_dir(const fs::path& run_dir, std::int64_t seed) {
    return run_dir / ("seed-" + std::to_string(seed));
}

RunManifest run_experiment(const ExperimentConfig& cfg, const RunHooks& hooks) {
    cfg.validate();
    const auto run_dir = fs::absolute(cfg.output_dir);
    if (fs::exists(run_dir / "manifest.json")) {
        throw ResumeError(run_dir.string() + " already holds a run; resume it or pick a new output_dir");
    }
    fs::create_directories(run_dir);

    ExperimentConfig stored = cfg;
    stored.output_dir = run_dir;
    const auto text = stored.canonical_text();
    write_file_atomic(run_dir / "config.json", text);

    RunManifest m;
    m.config_hash = config_hash(text);
    m.created_at = now_utc();
    m.updated_at = m.created_at;
    m.status = "running";
    for (auto s : cfg.seeds) m.seeds.push_back({s});
    write_manifest(run_dir, m);
    return execute_run(run_dir, stored, std::move(m), hooks);
}

RunManifest resume(const fs::path& run_dir_in, const RunHooks& hooks) {
    const auto run_dir = fs::absolute(run_dir_in);
    auto m = RunManifest::load(run_dir);
    const auto text = read_file(run_dir / "config.json");
    if (config_hash(text) != m.config_hash) {
        throw ResumeError("config hash mismatch in " + run_dir.string() + ": stored config was modified");
    }
    if (m.status == "complete") return m;
    ExperimentConfig cfg;
    try {
        cfg = load_stored_config(run_dir, text);
    } catch (const json::parse_error& e) {
        throw ResumeError(std::string("stored config is not valid JSON: ") + e.what());
    }
    if (m.seeds.size() > cfg.seeds.size()) throw ResumeError("manifest lists more seeds than the config");
    for (std::size_t i = 0; i < m.seeds.size(); ++i) {
        if (m.seeds[i].seed != cfg.seeds[i]) throw ResumeError("manifest seeds disagree with the config");
    }
    return execute_run(run_dir, cfg, std::move(m), hooks);
}

std::vector<MetricScores> merge_metrics(const std::vector<ScoreRecord>& scores,
                                        const std::vector<TimingRecord>& timings, int round) {
    std::map<std::tuple<std::string, std::string, int>, double> rves;
    for (const auto& t : timings) rves[{t.pipeline_key, t.example_id, t.round}] = t.r_ves;
    std::vector<MetricScores> out;
    out.reserve(scores.size());
    for (const auto& s : scores) {
        MetricScores m;
        m.difficulty = s.difficulty;
        int timing_round = round;
        if (round == 0) {
            m.ex = s.ex;
            m.soft = s.soft;
            if (!s.rounds.empty()) timing_round = static_cast<int>(s.rounds.size());
        } else if (round <= static_cast<int>(s.rounds.size())) {
            m.ex = s.rounds[static_cast<std::size_t>(round - 1)].ex;
            m.soft = s.rounds[static_cast<std::size_t>(round - 1)].soft;
        }
        if (m.ex == 1) {
            auto it = rves.find({s.pipeline_key, s.example_id, timing_round});
            if (it != rves.end()) m.r_ves = it->second;
        }
        out.push_back(m);
    }
    return out;
}

namespace {

bool any_labeled(const std::vector<ScoreRecord>& scores) {
    return std::any_of(scores.begin(), scores.end(),
                       [](const ScoreRecord& s) { return s.difficulty != Difficulty::unlabeled; });
}

struct SeedTables {
    std::vector<SummaryRow> rows;
    std::vector<DeltaEntry> deltas;
    std::map<std::string, double> final_ex;  // pipeline key -> overall EX
};

SeedTables seed_tables(const ExperimentConfig& cfg, const std::vector<ScoreRecord>& scores,
                       const std::vector<TimingRecord>& timings) {
    SeedTables out;
    const bool with_rves = cfg.exec.rves_runs > 0;
    const bool stratify = any_labeled(scores);
    std::map<std::string, double> baseline_ex, judge_ex;
    for (const auto& spec : cfg.pipelines) {
        std::vector<ScoreRecord> mine;
        for (const auto& s : scores) {
            if (s.pipeline_key == spec.key) mine.push_back(s);
        }
        if (mine.empty()) continue;
        const auto final = aggregate(merge_metrics(mine, timings, 0), stratify);
        out.final_ex[spec.key] = final.overall.ex;
        if (spec.id == PipelineId::mad) {
            for (int r = 1; r <= spec.rounds; ++r) {
                const auto summary = aggregate(merge_metrics(mine, timings, r), stratify);
                out.rows.push_back(make_summary_row(spec.label(), spec.key, "round " + std::to_string(r),
                                                    summary, with_rves));
            }
            judge_ex[spec.model] = round_half_up(final.overall.ex * 100.0, 1);
        } else {
            out.rows.push_back(make_summary_row(spec.label(), spec.key, "final", final, with_rves));
            if (spec.id == PipelineId::baseline) baseline_ex[spec.model] = round_half_up(final.overall.ex * 100.0, 1);
        }
    }
    std::map<std::string, double> b, j;
    for (const auto& [model, ex] : judge_ex) {
        if (baseline_ex.count(model)) {
            b[model] = baseline_ex[model];
            j[model] = ex;
        }
    }
    if (!b.empty()) out.deltas = make_delta_report(b, j);
    return out;
}

void write_tables(const fs::path& dir, const SeedTables& t) {
    write_file_atomic(dir / "summary.csv", summary_to_csv(t.rows));
    write_file_atomic(dir / "summary.md", summary_to_markdown(t.rows));
    if (!t.deltas.empty()) {
        write_file_atomic(dir / "delta.csv", delta_to_csv(t.deltas));
        write_file_atomic(dir / "delta.tsv", delta_plot_data(t.deltas));
    }
}

}  // namespace

void write_run_reports(const fs::path& run_dir) {
    ExperimentConfig cfg;
    try {
        cfg = load_stored_config(run_dir, read_file(run_dir / "config.json"));
    } catch (const LoadError& e) {
        throw ReportError(e.what());
    }
    std::vector<SummaryRow> all_rows;
    std::map<std::string, std::pair<double, std::int64_t>> best;  // key -> (EX, seed)
    std::map<std::int64_t, SeedTables> per_seed;
    for (auto seed : cfg.seeds) {
        const auto sdir = seed_dir(run_dir, seed);
        if (!fs::exists(sdir / "scores.jsonl")) continue;
        auto tables = seed_tables(cfg, read_scores(sdir / "scores.jsonl"), read_timings(sdir / "timing.jsonl"));
        write_tables(sdir, tables);
        for (auto row : tables.rows) {
            row.key = "seed " + std::to_string(seed) + ", " + row.key;
            all_rows.push_back(std::move(row));
        }
        for (const auto& [key, ex] : tables.final_ex) {
            auto it = best.find(key);
            if (it == best.end() || ex > it->second.first) best[key] = {ex, seed};
        }
        per_seed.emplace(seed, std::move(tables));
    }
    for (const auto& spec : cfg.pipelines) {
        auto it = best.find(spec.key);
        if (it == best.end()) continue;
        const auto seed = it->second.second;
        for (auto row : per_seed.at(seed).rows) {
            if (row.pipeline_id != spec.key) continue;
            row.key = "best-of (seed " + std::to_string(seed) + "), " + row.key;
            all_rows.push_back(std::move(row));
        }
    }
    SeedTables top;
    top.rows = std::move(all_rows);
    write_tables(run_dir, top);
}

SplitSummary score_predictions(const ScoreOnlyOptions& options) {
    const auto examples = load_split_file(options.gold_split, options.field_map);
    if (examples.empty()) throw ContractError("gold split is empty");

    std::map<std::string, std::string> preds;
    for (const auto& j : read_jsonl(options.predictions)) {
        if (!j.contains("example_id") || !j.contains("sql")) {
            throw ParseError(preds.size(), "prediction needs example_id and sql");
        }
        const auto& id = j.at("example_id");
        const auto key = id.is_string() ? id.get<std::string>() : id.dump();
        preds[key] = j.at("sql").is_null() ? std::string() : j.at("sql").get<std::string>();
    }

    PipelineSpec spec;
    spec.key = "external";
    spec.model = "external";
    std::map<std::string, SchemaCatalog> schemas;
    std::vector<ScoreRecord> scores;
    std::vector<TimingRecord> timings;
    ExperimentConfig timing_cfg;
    timing_cfg.exec = options.exec;
    for (const auto& ex : examples) {
        auto sit = schemas.find(ex.db_id);
        if (sit == schemas.end()) sit = schemas.emplace(ex.db_id, load_schema(options.db_root, ex.db_id)).first;
        const auto& schema = sit->second;
        Transcript t;
        t.example_id = ex.example_id;
        auto pit = preds.find(ex.example_id);
        if (pit == preds.end()) {
            t.failure = "no prediction";
        } else {
            auto e = extract_sql(pit->second);
            if (e.ok()) t.final_sql = e.sql;
            else t.failure = "extraction: " + e.error;
        }
        const auto gold = execute(schema, ex.gold_sql, options.exec.timeout);
        auto rec = score_transcript(ex, schema, gold, t, spec, options.exec.timeout);
        if (options.exec.rves_runs > 0) {
            for (auto& tr : time_unit(timing_cfg, schema, ex, rec)) timings.push_back(std::move(tr));
        }
        scores.push_back(std::move(rec));
    }
    const auto summary = aggregate(merge_metrics(scores, timings, 0), any_labeled(scores));

    if (!options.output_dir.empty()) {
        fs::create_directories(options.output_dir);
        std::string s, t;
        for (const auto& r : scores) s += r.to_json().dump() + "\n";
        for (const auto& r : timings) t += r.to_json().dump() + "\n";
        write_file_atomic(options.output_dir / "scores.jsonl", s);
        write_file_atomic(options.output_dir / "timing.jsonl", t);
        const std::vector<SummaryRow> rows{
            make_summary_row("external", "external", "final", summary, options.exec.rves_runs > 0)};
        write_file_atomic(options.output_dir / "summary.csv", summary_to_csv(rows));
        write_file_atomic(options.output_dir / "summary.md", summary_to_markdown(rows));
    }
    return summary;
}

}  // namespace sqlagents
