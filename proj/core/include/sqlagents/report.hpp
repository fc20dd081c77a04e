#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sqlagents/metrics.hpp"

namespace sqlagents {

struct SummaryRow {
    std::string model_id;
    std::string pipeline_id;
    std::string key;  // round, planner set, coder tier or seed
    double ex = 0.0;  // percentages
    double soft_f1 = 0.0;
    std::optional<double> r_ves;
    std::optional<std::array<double, 3>> ex_by_difficulty;  // simple, moderate, hard
};

SummaryRow make_summary_row(std::string model_id, std::string pipeline_id, std::string key,
                            const SplitSummary& summary, bool with_r_ves = true);

struct RoundTable {
    std::vector<std::string> models;
    int rounds = 0;
    std::vector<SummaryRow> rows;  // model-major, round-minor

    std::string to_csv() const;
    std::string to_markdown() const;
};

// Keyed by model, then round 1..T. Every model must carry every round.
RoundTable make_round_table(const std::map<std::string, std::map<int, SplitSummary>>& scores,
                            bool with_r_ves = true);

struct DeltaEntry {
    std::string model_id;
    double baseline_ex = 0.0;  // percentage points as reported (one decimal)
    double round3_ex = 0.0;
    double delta = 0.0;        // rounded to one decimal
};

// Delta = EX(judge, final round) - EX(baseline), per model, in points.
std::vector<DeltaEntry> make_delta_report(const std::map<std::string, double>& baseline_ex,
                                          const std::map<std::string, double>& round3_ex);

std::string delta_to_csv(std::span<const DeltaEntry> deltas);
// Two tab-separated columns (model, delta) for external plotting.
std::string delta_plot_data(std::span<const DeltaEntry> deltas);

// Generic keyed table (Table 1/3/4 shapes): one row per SummaryRow.
std::string summary_to_csv(std::span<const SummaryRow> rows);
std::string summary_to_markdown(std::span<const SummaryRow> rows);

}  // namespace sqlagents
