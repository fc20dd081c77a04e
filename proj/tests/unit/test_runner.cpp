#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <fstream>

#include "sqlagents/errors.hpp"
#include "sqlagents/jsonl.hpp"
#include "sqlagents/runner.hpp"
#include "support.hpp"

using namespace sqlagents;
using namespace sqlagents::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class DeskRun : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        root_ = new TempDir();
        prepare_desk(root_->path() / "desk");
    }
    static void TearDownTestSuite() {
        delete root_;
        root_ = nullptr;
    }

    static fs::path desk() { return root_->path() / "desk"; }

    json config_json(const fs::path& out, std::vector<int> seeds = {42}, int limit = 8, int in_flight = 4) const {
        auto j = json::parse(slurp(source_dir() / "configs/desk.json"));
        j["dataset"]["root"] = desk().string();
        j["dataset"]["limit"] = limit;
        j["backend"]["fixtures"] = (desk() / "fixtures.jsonl").string();
        j["output_dir"] = out.string();
        j["seeds"] = seeds;
        j["exec"]["rves_runs"] = 3;
        j["max_in_flight"] = in_flight;
        return j;
    }

    ExperimentConfig config(const fs::path& out, std::vector<int> seeds = {42}, int limit = 8, int in_flight = 4) const {
        return ExperimentConfig::from_json(config_json(out, std::move(seeds), limit, in_flight));
    }

    // Scores minus nothing: these files hold deterministic values only.
    static std::string scores(const fs::path& run, int seed) { return slurp(seed_dir(run, seed) / "scores.jsonl"); }

    TempDir tmp_;
    static TempDir* root_;
};

TempDir* DeskRun::root_ = nullptr;

}  // namespace

TEST_F(DeskRun, ProducesTheDocumentedLayout) {
    const auto out = tmp_ / "run";
    const auto m = run_experiment(config(out));
    EXPECT_EQ(m.status, "complete");
    ASSERT_EQ(m.seeds.size(), 1u);
    EXPECT_EQ(m.seeds[0].total, 4u * 8u);
    EXPECT_EQ(m.seeds[0].completed, 4u * 8u);
    EXPECT_TRUE(m.seeds[0].finished);
    for (auto f : {"config.json", "manifest.json", "summary.csv", "summary.md"}) EXPECT_TRUE(fs::exists(out / f)) << f;
    const auto sdir = seed_dir(out, 42);
    for (auto f : {"transcripts.jsonl", "scores.jsonl", "timing.jsonl", "summary.csv", "summary.md", "delta.csv",
                   "delta.tsv", "trace.jsonl"}) {
        EXPECT_TRUE(fs::exists(sdir / f)) << f;
    }
    const auto score_lines = read_jsonl(sdir / "scores.jsonl");
    EXPECT_EQ(score_lines.size(), 32u);
    // config order, then example order
    EXPECT_EQ(score_lines.front()["pipeline_key"], "baseline");
    EXPECT_EQ(score_lines.back()["pipeline_key"], "coder_aggregator");
    for (const auto& s : score_lines) {
        EXPECT_FALSE(s.contains("r_ves"));
        EXPECT_FALSE(s.contains("tau"));
    }
    const auto turns = read_jsonl(sdir / "transcripts.jsonl");
    std::size_t mad_turns = 0;
    for (const auto& t : turns) {
        if (t["type"] == "turn" && t["pipeline"] == "mad") ++mad_turns;
    }
    EXPECT_EQ(mad_turns, 8u * 15u);
    // every backend call made it into the trace
    EXPECT_EQ(read_jsonl(sdir / "trace.jsonl").size(),
              std::count_if(turns.begin(), turns.end(), [](const json& t) { return t["type"] == "turn"; }));
    const auto csv = slurp(out / "summary.csv");
    EXPECT_TRUE(csv.starts_with("model,pipeline,key,ex,soft_f1,r_ves,ex_simple,ex_moderate,ex_hard\n"));
    EXPECT_NE(csv.find("seed 42, round 3"), std::string::npos);
    EXPECT_NE(csv.find("best-of (seed 42), final"), std::string::npos);
    EXPECT_TRUE(slurp(sdir / "delta.csv").starts_with("model,baseline_ex,judge_ex,delta\n"));
}

TEST_F(DeskRun, RefusesToOverwriteAndResumesCompleteRunsUntouched) {
    const auto out = tmp_ / "run";
    const auto cfg = config(out);
    run_experiment(cfg);
    EXPECT_THROW(run_experiment(cfg), ResumeError);
    const auto before = slurp(out / "manifest.json");
    const auto m = resume(out);
    EXPECT_EQ(m.status, "complete");
    EXPECT_EQ(slurp(out / "manifest.json"), before);
}

TEST_F(DeskRun, TamperedConfigIsRejected) {
    const auto out = tmp_ / "run";
    run_experiment(config(out));
    auto text = slurp(out / "config.json");
    text.insert(text.find("\"seeds\""), "\"seedz\": 1,\n  ");
    spit(out / "config.json", text);
    EXPECT_THROW(resume(out), ResumeError);
    EXPECT_THROW(resume(tmp_ / "nothing-here"), Error);
}

TEST_F(DeskRun, CrashAndResumeMatchesUninterruptedRun) {
    const auto clean = tmp_ / "clean";
    run_experiment(config(clean, {42, 11}));

    const auto crashed = tmp_ / "crashed";
    const auto cfg = config(crashed, {42, 11});
    for (std::size_t kill_after : {5u, 40u}) {
        const auto dir = crashed.string() + "-" + std::to_string(kill_after);
        auto c = cfg;
        c.output_dir = dir;
        const pid_t pid = fork();
        ASSERT_NE(pid, -1);
        if (pid == 0) {
            RunHooks hooks;
            hooks.on_checkpoint = [kill_after](std::size_t n) {
                if (n >= kill_after) _exit(17);
            };
            try {
                run_experiment(c, hooks);
            } catch (...) {
                _exit(1);
            }
            _exit(0);
        }
        int status = 0;
        waitpid(pid, &status, 0);
        ASSERT_TRUE(WIFEXITED(status));
        ASSERT_EQ(WEXITSTATUS(status), 17);
        EXPECT_EQ(RunManifest::load(dir).status, "running");

        std::size_t redone = 0;
        RunHooks count;
        count.on_checkpoint = [&redone](std::size_t n) { redone = n; };
        const auto m = resume(dir, count);
        EXPECT_EQ(m.status, "complete");
        EXPECT_EQ(redone, 64u - kill_after) << "finished units must not be re-run";
        for (int seed : {42, 11}) {
            EXPECT_EQ(scores(dir, seed), scores(clean, seed)) << "seed " << seed;
            EXPECT_EQ(slurp(seed_dir(dir, seed) / "transcripts.jsonl"),
                      slurp(seed_dir(clean, seed) / "transcripts.jsonl"));
        }
    }
}

TEST_F(DeskRun, ConcurrencyDoesNotChangeResults) {
    const auto a = tmp_ / "serial";
    const auto b = tmp_ / "wide";
    run_experiment(config(a, {42}, 8, 1));
    run_experiment(config(b, {42}, 8, 8));
    EXPECT_EQ(scores(a, 42), scores(b, 42));
    EXPECT_EQ(slurp(seed_dir(a, 42) / "transcripts.jsonl"), slurp(seed_dir(b, 42) / "transcripts.jsonl"));
}

TEST_F(DeskRun, ReportsAreReproducibleFromStoredFiles) {
    const auto out = tmp_ / "run";
    run_experiment(config(out, {42, 11}));
    const auto csv = slurp(out / "summary.csv");
    const auto md = slurp(out / "summary.md");
    fs::remove(out / "summary.csv");
    write_run_reports(out);
    EXPECT_EQ(slurp(out / "summary.csv"), csv);
    EXPECT_EQ(slurp(out / "summary.md"), md);
}

TEST_F(DeskRun, ExOnlyWhenTimingDisabled) {
    const auto out = tmp_ / "run";
    auto j = config_json(out);
    j["exec"]["rves_runs"] = 0;
    run_experiment(ExperimentConfig::from_json(j));
    EXPECT_EQ(slurp(seed_dir(out, 42) / "timing.jsonl"), "");
    const auto csv = slurp(seed_dir(out, 42) / "summary.csv");
    const auto row = csv.substr(csv.find('\n') + 1);
    // r_ves cell left empty
    EXPECT_NE(row.substr(0, row.find('\n')).find(",,"), std::string::npos) << csv;
    EXPECT_EQ(slurp(seed_dir(out, 42) / "summary.md").find("R-VES"), std::string::npos);
}

TEST_F(DeskRun, BackendFailuresBecomeScoredFailures) {
    const auto out = tmp_ / "run";
    auto j = config_json(out, {42}, 4);
    j["pipelines"] = json::array({{{"id", "baseline"}, {"model", "QwQ-32B"}}});
    RunHooks hooks;
    hooks.backend = std::make_shared<ScriptedBackend>(
        ScriptedBackend::Responder([](const ChatRequest& r, const ModelProfile&) -> std::string {
            if (r.tag.starts_with("1/")) throw BackendError("model offline");
            return "no sql here";
        }));
    const auto m = run_experiment(ExperimentConfig::from_json(j), hooks);
    EXPECT_EQ(m.seeds[0].failed, 4u);
    for (const auto& s : read_jsonl(seed_dir(out, 42) / "scores.jsonl")) {
        EXPECT_EQ(s["ex"], 0);
        EXPECT_FALSE(s["failure"].is_null());
    }
}

TEST_F(DeskRun, GoldAnswersScorePerfectly) {
    const auto out = tmp_ / "run";
    auto j = config_json(out, {42}, 20);
    j["pipelines"] = json::array({{{"id", "baseline"}, {"model", "Qwen2.5-Coder-14B-Instruct"}}});
    std::map<std::string, std::string> gold;
    for (const auto& e : load_split(desk(), "dev", FieldMap::bird())) gold[e.example_id] = e.gold_sql;
    RunHooks hooks;
    hooks.backend = std::make_shared<ScriptedBackend>(
        ScriptedBackend::Responder([&gold](const ChatRequest& r, const ModelProfile&) {
            return "```sql\n" + gold.at(r.tag.substr(0, r.tag.find('/'))) + "\n```";
        }));
    run_experiment(ExperimentConfig::from_json(j), hooks);
    const auto s = read_jsonl(seed_dir(out, 42) / "scores.jsonl");
    ASSERT_EQ(s.size(), 20u);
    for (const auto& r : s) {
        EXPECT_EQ(r["ex"], 1) << r.dump();
        EXPECT_DOUBLE_EQ(r["soft_f1"]["f1"].get<double>(), 1.0);
    }
    for (const auto& t : read_jsonl(seed_dir(out, 42) / "timing.jsonl")) {
        EXPECT_GE(t["r_ves"].get<double>(), 0.25);
    }
    EXPECT_NE(slurp(seed_dir(out, 42) / "summary.csv").find(",100.0,100.0,"), std::string::npos);
}

TEST_F(DeskRun, ScoreOnlyMode) {
    const auto split = load_split(desk(), "dev", FieldMap::bird());
    std::string preds;
    for (std::size_t i = 0; i < split.size(); ++i) {
        if (i % 4 == 3) continue;  // missing prediction
        const auto sql = i % 2 == 0 ? split[i].gold_sql : std::string("SELECT 'nope'");
        preds += json{{"example_id", split[i].example_id}, {"sql", "```sql\n" + sql + "\n```"}}.dump() + "\n";
    }
    spit(tmp_ / "preds.jsonl", preds);
    ScoreOnlyOptions o;
    o.predictions = tmp_ / "preds.jsonl";
    o.gold_split = desk() / "dev.json";
    o.db_root = desk();
    o.exec.rves_runs = 3;
    o.output_dir = tmp_ / "scored";
    const auto s = score_predictions(o);
    std::size_t expected = 0;
    for (std::size_t i = 0; i < split.size(); ++i) expected += (i % 4 != 3 && i % 2 == 0);
    EXPECT_DOUBLE_EQ(s.overall.ex, static_cast<double>(expected) / static_cast<double>(split.size()));
    EXPECT_TRUE(fs::exists(tmp_ / "scored/summary.csv"));
    EXPECT_EQ(read_jsonl(tmp_ / "scored/scores.jsonl").size(), split.size());
}

TEST(Records, ScoreRoundTrip) {
    ScoreRecord r;
    r.example_id = "3";
    r.db_id = "db";
    r.difficulty = Difficulty::moderate;
    r.pipeline_key = "mad";
    r.pipeline = PipelineId::mad;
    r.final_sql = "SELECT 1";
    r.exec_status = "ok";
    r.ex = 1;
    r.soft = {3, 1, 0, 0.75, 1.0, 6.0 / 7.0};
    r.rounds.push_back({1, "SELECT 2", "ok", 0, {}});
    const auto back = ScoreRecord::from_json(r.to_json());
    EXPECT_EQ(back.to_json(), r.to_json());
    EXPECT_EQ(back.rounds.size(), 1u);
    EXPECT_EQ(back.difficulty, Difficulty::moderate);
}

TEST(Records, MergeUsesLastRoundTimingForMadFinals) {
    ScoreRecord r;
    r.example_id = "1";
    r.pipeline_key = "mad";
    r.ex = 1;
    r.rounds = {{1, "a", "ok", 1, {}}, {2, "b", "ok", 1, {}}};
    std::vector<TimingRecord> t{{"1", "mad", 1, 1.0, 0, 0, 1.0, ""}, {"1", "mad", 2, 2.0, 0, 0, 1.25, ""}};
    EXPECT_DOUBLE_EQ(merge_metrics({r}, t, 0)[0].r_ves, 1.25);
    EXPECT_DOUBLE_EQ(merge_metrics({r}, t, 1)[0].r_ves, 1.0);
    r.rounds[0].ex = 0;
    EXPECT_DOUBLE_EQ(merge_metrics({r}, t, 1)[0].r_ves, 0.0);
}
