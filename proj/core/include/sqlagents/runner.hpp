#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqlagents/config.hpp"
#include "sqlagents/metrics.hpp"
#include "sqlagents/pipelines.hpp"

namespace sqlagents {

struct RoundScore {
    int round = 0;
    std::optional<std::string> sql;
    std::string exec_status;  // ok / sql_error / timeout / not_executed
    int ex = 0;
    SoftF1 soft;
};

// One (pipeline, example) line of scores.jsonl. Holds only deterministic
// values; timing lives in timing.jsonl.
struct ScoreRecord {
    std::string example_id;
    std::string db_id;
    Difficulty difficulty = Difficulty::unlabeled;
    std::string pipeline_key;
    PipelineId pipeline = PipelineId::baseline;
    std::string label;
    std::optional<std::string> final_sql;
    std::optional<std::string> failure;
    std::string exec_status = "not_executed";
    std::string exec_error;
    int ex = 0;
    SoftF1 soft;
    std::vector<RoundScore> rounds;  // MAD judge verdicts, rounds 1..T

    nlohmann::json to_json() const;
    static ScoreRecord from_json(const nlohmann::json& j);
};

struct TimingRecord {
    std::string example_id;
    std::string pipeline_key;
    int round = 0;  // 0: final prediction of a non-MAD pipeline
    std::optional<double> tau;
    double gt_mean = 0.0;
    double pred_mean = 0.0;
    double r_ves = 0.0;
    std::string error;

    nlohmann::json to_json() const;
    static TimingRecord from_json(const nlohmann::json& j);
};

struct GoldResult {
    ExecOutcome outcome;
};

// Scores one transcript against the gold result (executing predictions).
ScoreRecord score_transcript(const Example& example, const SchemaCatalog& schema,
                             const ExecOutcome& gold, const Transcript& transcript,
                             const PipelineSpec& spec, std::chrono::milliseconds timeout);

struct SeedProgress {
    std::int64_t seed = 0;
    std::size_t total = 0;      // (pipeline, example) units
    std::size_t completed = 0;
    std::size_t failed = 0;
    std::size_t timed = 0;
    bool finished = false;
};

struct RunManifest {
    std::string config_hash;
    std::string created_at;
    std::string updated_at;
    std::string status;  // running / complete
    std::vector<SeedProgress> seeds;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
    static RunManifest load(const std::filesystem::path& run_dir);
};

struct RunHooks {
    // Called after each (pipeline, example) unit is durably checkpointed,
    // with the number of units checkpointed by this process so far.
    std::function<void(std::size_t)> on_checkpoint;
    // Replaces the configured backend (tests).
    std::shared_ptr<Backend> backend;
};

// Output layout under cfg.output_dir:
//   config.json, manifest.json, summary.csv, summary.md
//   seed-<s>/transcripts.jsonl, scores.jsonl, timing.jsonl, summary.csv,
//           summary.md, trace.jsonl, checkpoints/...
RunManifest run_experiment(const ExperimentConfig& cfg, const RunHooks& hooks = {});

// Continues an interrupted run; a finished run is left untouched.
RunManifest resume(const std::filesystem::path& run_dir, const RunHooks& hooks = {});

std::filesystem::path seed_dir(const std::filesystem::path& run_dir, std::int64_t seed);

// Loads per-seed scores and timings and rewrites all summary/report files.
void write_run_reports(const std::filesystem::path& run_dir);

struct ScoreOnlyOptions {
    std::filesystem::path predictions;  // JSONL: example_id + sql
    std::filesystem::path gold_split;   // split JSON file
    std::filesystem::path db_root;      // holds databases/<db>/<db>.sqlite
    FieldMap field_map = FieldMap::bird();
    ExecConfig exec;
    std::filesystem::path output_dir;
};

// Metrics-only mode: scores externally produced SQL.
SplitSummary score_predictions(const ScoreOnlyOptions& options);

// Merges scores with timings into per-example metric rows.
std::vector<MetricScores> merge_metrics(const std::vector<ScoreRecord>& scores,
                                        const std::vector<TimingRecord>& timings,
                                        int round = 0);

}  // namespace sqlagents
