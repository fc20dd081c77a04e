#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "sqlagents/dataset.hpp"
#include "sqlagents/sqlexec.hpp"

namespace sqlagents {

// Relative tolerance for numeric cell equality (integer vs real included).
inline constexpr double kNumericTolerance = 1e-6;

bool cells_equal(const Cell& a, const Cell& b);

// Total order: null < numeric < text < blob; numerics by value.
int compare_cells(const Cell& a, const Cell& b);
int compare_rows(const Row& a, const Row& b);

// 1 iff the row multisets are equal, ignoring row order and column names.
// Column counts must agree.
int exec_match(const ResultTable& gold, const ResultTable& pred);

struct SoftF1 {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Rows of each table are canonically sorted and zipped; cells of a pair are
// matched as multisets. Surplus rows count entirely as FP (pred) or FN (gold).
SoftF1 soft_f1(const ResultTable& gold, const ResultTable& pred);

// Reward over tau for a correct prediction; 0 for an incorrect one.
double r_ves(bool correct, std::optional<double> tau);

struct MetricScores {
    int ex = 0;
    SoftF1 soft;
    double r_ves = 0.0;
    Difficulty difficulty = Difficulty::unlabeled;
};

struct MetricMeans {
    std::size_t n = 0;
    double ex = 0.0;       // fractions in [0,1]; r_ves in [0,1.25]
    double soft_f1 = 0.0;
    double r_ves = 0.0;
};

struct SplitSummary {
    MetricMeans overall;
    std::array<MetricMeans, 4> by_difficulty{};  // indexed by Difficulty
    bool stratified = false;

    const MetricMeans& bucket(Difficulty d) const {
        return by_difficulty[static_cast<std::size_t>(d)];
    }
};

SplitSummary aggregate(std::span<const MetricScores> per_example, bool stratify = true);

// One decimal, half-up: 0.524 -> "52.4".
std::string format_percent(double fraction);
// Same rounding for a value already in percentage points.
std::string format_points(double points, bool explicit_sign = false);
double round_half_up(double value, int decimals);

}  // namespace sqlagents
