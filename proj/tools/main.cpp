#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>

#include "sqlagents/config.hpp"
#include "sqlagents/dataset.hpp"
#include "sqlagents/errors.hpp"
#include "sqlagents/jsonl.hpp"
#include "sqlagents/report.hpp"
#include "sqlagents/runner.hpp"

namespace fs = std::filesystem;
using namespace sqlagents;

namespace {

void print_manifest(const RunManifest& m) {
    for (const auto& s : m.seeds) {
        std::cout << "seed " << s.seed << ": " << s.completed << "/" << s.total << " done, " << s.failed
                  << " failed, " << s.timed << " timed\n";
    }
    std::cout << "status: " << m.status << "\n";
}

int init_desk(const fs::path& root, bool force) {
    const auto sql_dir = root / "sql";
    if (!fs::is_directory(sql_dir)) throw LoadError("no sql/ directory under " + root.string());
    for (const auto& entry : fs::directory_iterator(sql_dir)) {
        if (entry.path().extension() != ".sql") continue;
        const auto db = entry.path().stem().string();
        const auto target = database_path(root, db);
        if (fs::exists(target)) {
            if (!force) {
                spdlog::info("{} exists, skipping", target.string());
                continue;
            }
            fs::remove(target);
        }
        fs::create_directories(target.parent_path());
        build_database(entry.path(), target);
        spdlog::info("built {}", target.string());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent text-to-SQL experiment runner"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    auto* run = app.add_subcommand("run", "Run an experiment from a config file");
    std::string config_file;
    std::optional<int> max_in_flight;
    std::string output_override;
    run->add_option("--config", config_file, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--max-in-flight", max_in_flight, "Override max_in_flight");
    run->add_option("--output", output_override, "Override output_dir");

    auto* res = app.add_subcommand("resume", "Continue an interrupted run");
    std::string run_dir;
    res->add_option("run_dir", run_dir)->required()->check(CLI::ExistingDirectory);

    auto* rep = app.add_subcommand("report", "Rewrite summary tables of a run");
    std::string report_dir;
    rep->add_option("run_dir", report_dir)->required()->check(CLI::ExistingDirectory);

    auto* score = app.add_subcommand("score", "Score externally produced predictions");
    ScoreOnlyOptions so;
    std::string pred, gold, db_root, field_map = "bird", out_dir;
    double timeout_s = 30.0;
    std::string trim = "iqr";
    so.exec.rves_runs = 0;
    score->add_option("--pred", pred, "Predictions JSONL (example_id, sql)")->required()->check(CLI::ExistingFile);
    score->add_option("--gold", gold, "Gold split JSON")->required()->check(CLI::ExistingFile);
    score->add_option("--db-root", db_root, "Directory holding databases/ (default: split's directory)");
    score->add_option("--field-map", field_map, "bird or spider")->check(CLI::IsMember({"bird", "spider"}));
    score->add_option("--out", out_dir, "Write scores and summary here");
    score->add_option("--rves-runs", so.exec.rves_runs, "Timing runs per query (0 disables R-VES)");
    score->add_option("--timeout-s", timeout_s, "Per-query timeout");
    score->add_option("--trim", trim, "Timing trim policy")->check(CLI::IsMember({"iqr", "none"}));

    auto* desk = app.add_subcommand("init-desk", "Build SQLite databases from <root>/sql/*.sql");
    std::string desk_root = "data/desk";
    bool force = false;
    desk->add_option("--root", desk_root);
    desk->add_flag("--force", force, "Rebuild existing databases");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*run) {
            auto cfg = ExperimentConfig::load(config_file);
            if (max_in_flight) cfg.max_in_flight = *max_in_flight;
            if (!output_override.empty()) cfg.output_dir = fs::absolute(output_override);
            print_manifest(run_experiment(cfg));
            std::cout << read_file(fs::path(cfg.output_dir) / "summary.md");
        } else if (*res) {
            print_manifest(resume(run_dir));
        } else if (*rep) {
            write_run_reports(report_dir);
            std::cout << read_file(fs::path(report_dir) / "summary.md");
        } else if (*score) {
            so.predictions = pred;
            so.gold_split = gold;
            so.db_root = db_root.empty() ? fs::path(gold).parent_path() : fs::path(db_root);
            so.field_map = field_map == "spider" ? FieldMap::spider() : FieldMap::bird();
            so.exec.timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000));
            so.exec.trim = *parse_trim_policy(trim);
            so.output_dir = out_dir;
            const auto summary = score_predictions(so);
            const std::vector<SummaryRow> rows{
                make_summary_row("external", "score", "final", summary, so.exec.rves_runs > 0)};
            std::cout << "examples: " << summary.overall.n << "\n" << summary_to_markdown(rows);
        } else if (*desk) {
            return init_desk(desk_root, force);
        }
    } catch (const ConfigError& e) {
        spdlog::error("config: {}", e.what());
        return 2;
    } catch (const ResumeError& e) {
        spdlog::error("resume: {}", e.what());
        return 3;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
