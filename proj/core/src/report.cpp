#include "sqlagents/report.hpp"

#include <set>

#include "sqlagents/errors.hpp"

namespace sqlagents {

namespace {

double pct(double fraction) { return round_half_up(fraction * 100.0, 1); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string md_cell(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += '\\';
        out += c == '\n' ? ' ' : c;
    }
    return out;
}

std::string num(double v) { return format_points(v); }

bool any_rves(std::span<const SummaryRow> rows) {
    for (const auto& r : rows) {
        if (r.r_ves) return true;
    }
    return false;
}

bool any_difficulty(std::span<const SummaryRow> rows) {
    for (const auto& r : rows) {
        if (r.ex_by_difficulty) return true;
    }
    return false;
}

}  // namespace

SummaryRow make_summary_row(std::string model_id, std::string pipeline_id, std::string key,
                            const SplitSummary& summary, bool with_r_ves) {
    SummaryRow row;
    row.model_id = std::move(model_id);
    row.pipeline_id = std::move(pipeline_id);
    row.key = std::move(key);
    row.ex = pct(summary.overall.ex);
    row.soft_f1 = pct(summary.overall.soft_f1);
    if (with_r_ves) row.r_ves = pct(summary.overall.r_ves);
    if (summary.stratified) {
        row.ex_by_difficulty = std::array<double, 3>{
            pct(summary.bucket(Difficulty::simple).ex),
            pct(summary.bucket(Difficulty::moderate).ex),
            pct(summary.bucket(Difficulty::hard).ex),
        };
    }
    return row;
}

std::string RoundTable::to_csv() const {
    const bool rves = any_rves(rows);
    std::string out = "model";
    for (int r = 1; r <= rounds; ++r) {
        const auto p = "round" + std::to_string(r) + "_";
        out += "," + p + "ex," + p + "soft_f1";
        if (rves) out += "," + p + "r_ves";
    }
    out += "\n";
    std::size_t i = 0;
    for (const auto& m : models) {
        out += csv_field(m);
        for (int r = 0; r < rounds; ++r, ++i) {
            const auto& row = rows[i];
            out += "," + num(row.ex) + "," + num(row.soft_f1);
            if (rves) out += "," + (row.r_ves ? num(*row.r_ves) : std::string());
        }
        out += "\n";
    }
    return out;
}

std::string RoundTable::to_markdown() const {
    const bool rves = any_rves(rows);
    const int per_round = rves ? 3 : 2;
    std::string out = "| Model |";
    for (int r = 1; r <= rounds; ++r) {
        const auto p = "R" + std::to_string(r) + " ";
        out += " " + p + "EX | " + p + "Soft F1 |";
        if (rves) out += " " + p + "R-VES |";
    }
    out += "\n|---|";
    for (int c = 0; c < rounds * per_round; ++c) out += "---:|";
    out += "\n";
    std::size_t i = 0;
    for (const auto& m : models) {
        out += "| " + md_cell(m) + " |";
        for (int r = 0; r < rounds; ++r, ++i) {
            const auto& row = rows[i];
            out += " " + num(row.ex) + " | " + num(row.soft_f1) + " |";
            if (rves) out += " " + (row.r_ves ? num(*row.r_ves) : std::string()) + " |";
        }
        out += "\n";
    }
    return out;
}

RoundTable make_round_table(const std::map<std::string, std::map<int, SplitSummary>>& scores, bool with_r_ves) {
    RoundTable t;
    for (const auto& [model, by_round] : scores) {
        if (!by_round.empty()) t.rounds = std::max(t.rounds, by_round.rbegin()->first);
    }
    if (t.rounds < 1) throw ReportError("round table: no rounds given");
    for (const auto& [model, by_round] : scores) {
        t.models.push_back(model);
        for (int r = 1; r <= t.rounds; ++r) {
            auto it = by_round.find(r);
            if (it == by_round.end()) {
                throw ReportError("round table: model '" + model + "' is missing round " + std::to_string(r));
            }
            t.rows.push_back(make_summary_row(model, "mad", "round " + std::to_string(r), it->second, with_r_ves));
        }
    }
    return t;
}

std::vector<DeltaEntry> make_delta_report(const std::map<std::string, double>& baseline_ex,
                                          const std::map<std::string, double>& round3_ex) {
    for (const auto& [model, _] : baseline_ex) {
        if (!round3_ex.count(model)) throw ReportError("delta: model '" + model + "' has no judge scores");
    }
    std::vector<DeltaEntry> out;
    for (const auto& [model, judge] : round3_ex) {
        auto it = baseline_ex.find(model);
        if (it == baseline_ex.end()) throw ReportError("delta: model '" + model + "' has no baseline scores");
        DeltaEntry d;
        d.model_id = model;
        d.baseline_ex = it->second;
        d.round3_ex = judge;
        d.delta = round_half_up(judge - it->second, 1);
        out.push_back(d);
    }
    return out;
}

std::string delta_to_csv(std::span<const DeltaEntry> deltas) {
    std::string out = "model,baseline_ex,judge_ex,delta\n";
    for (const auto& d : deltas) {
        out += csv_field(d.model_id) + "," + num(d.baseline_ex) + "," + num(d.round3_ex) + "," +
               format_points(d.delta, true) + "\n";
    }
    return out;
}

std::string delta_plot_data(std::span<const DeltaEntry> deltas) {
    std::string out = "model\tdelta\n";
    for (const auto& d : deltas) out += d.model_id + "\t" + format_points(d.delta, true) + "\n";
    return out;
}

std::string summary_to_csv(std::span<const SummaryRow> rows) {
    std::string out = "model,pipeline,key,ex,soft_f1,r_ves,ex_simple,ex_moderate,ex_hard\n";
    for (const auto& r : rows) {
        out += csv_field(r.model_id) + "," + csv_field(r.pipeline_id) + "," + csv_field(r.key) + "," + num(r.ex) +
               "," + num(r.soft_f1) + "," + (r.r_ves ? num(*r.r_ves) : std::string());
        for (int i = 0; i < 3; ++i) {
            out += ",";
            if (r.ex_by_difficulty) out += num((*r.ex_by_difficulty)[static_cast<std::size_t>(i)]);
        }
        out += "\n";
    }
    return out;
}

std::string summary_to_markdown(std::span<const SummaryRow> rows) {
    const bool rves = any_rves(rows);
    const bool diff = any_difficulty(rows);
    std::string out = "| Model | Pipeline | Key | EX | Soft F1 |";
    std::string rule = "|---|---|---|---:|---:|";
    if (rves) {
        out += " R-VES |";
        rule += "---:|";
    }
    if (diff) {
        out += " Simple | Moderate | Challenging |";
        rule += "---:|---:|---:|";
    }
    out += "\n" + rule + "\n";
    for (const auto& r : rows) {
        out += "| " + md_cell(r.model_id) + " | " + md_cell(r.pipeline_id) + " | " + md_cell(r.key) + " | " +
               num(r.ex) + " | " + num(r.soft_f1) + " |";
        if (rves) out += " " + (r.r_ves ? num(*r.r_ves) : std::string()) + " |";
        if (diff) {
            for (int i = 0; i < 3; ++i) {
                out += " " + (r.ex_by_difficulty ? num((*r.ex_by_difficulty)[static_cast<std::size_t>(i)])
                                                 : std::string()) + " |";
            }
        }
        out += "\n";
    }
    return out;
}

}  // namespace sqlagents
