#include "sqlagents/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sqlagents/errors.hpp"

namespace sqlagents {

namespace {

int type_rank(const Cell& c) {
    switch (c.index()) {
        case 0: return 0;          // null
        case 1: case 2: return 1;  // numeric
        case 3: return 2;          // text
        default: return 3;         // blob
    }
}

long double numeric_value(const Cell& c) {
    if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<long double>(*i);
    return static_cast<long double>(std::get<double>(c));
}

template <class T>
int three_way(const T& a, const T& b) {
    return a < b ? -1 : (b < a ? 1 : 0);
}

std::vector<Row> sorted_rows(const ResultTable& t) {
    std::vector<Row> rows = t.rows;
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return compare_rows(a, b) < 0; });
    return rows;
}

// Greedy multiset intersection of two rows' cells.
std::size_t matched_cells(const Row& gold, const Row& pred) {
    std::vector<bool> used(gold.size(), false);
    std::size_t matched = 0;
    for (const auto& p : pred) {
        for (std::size_t g = 0; g < gold.size(); ++g) {
            if (!used[g] && cells_equal(gold[g], p)) {
                used[g] = true;
                ++matched;
                break;
            }
        }
    }
    return matched;
}

}  // namespace

bool cells_equal(const Cell& a, const Cell& b) {
    const int ra = type_rank(a);
    if (ra != type_rank(b)) return false;
    switch (ra) {
        case 0: return true;
        case 1: {
            if (a.index() == 1 && b.index() == 1) return std::get<1>(a) == std::get<1>(b);
            const long double x = numeric_value(a);
            const long double y = numeric_value(b);
            if (x == y) return true;
            if (std::isnan(static_cast<double>(x)) || std::isnan(static_cast<double>(y))) return false;
            const long double scale = std::max(std::fabs(x), std::fabs(y));
            return std::fabs(x - y) <= static_cast<long double>(kNumericTolerance) * scale;
        }
        case 2: return std::get<std::string>(a) == std::get<std::string>(b);
        default: return std::get<BlobDigest>(a) == std::get<BlobDigest>(b);
    }
}

int compare_cells(const Cell& a, const Cell& b) {
    const int ra = type_rank(a);
    const int rb = type_rank(b);
    if (ra != rb) return ra < rb ? -1 : 1;
    switch (ra) {
        case 0: return 0;
        case 1:
            if (a.index() == 1 && b.index() == 1) return three_way(std::get<1>(a), std::get<1>(b));
            return three_way(numeric_value(a), numeric_value(b));
        case 2: {
            const int c = std::get<std::string>(a).compare(std::get<std::string>(b));
            return c < 0 ? -1 : (c > 0 ? 1 : 0);
        }
        default: {
            const auto& x = std::get<BlobDigest>(a);
            const auto& y = std::get<BlobDigest>(b);
            if (x.fnv1a != y.fnv1a) return x.fnv1a < y.fnv1a ? -1 : 1;
            return three_way(x.size, y.size);
        }
    }
}

int compare_rows(const Row& a, const Row& b) {
    const auto n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (int c = compare_cells(a[i], b[i]); c != 0) return c;
    }
    return three_way(a.size(), b.size());
}

int exec_match(const ResultTable& gold, const ResultTable& pred) {
    if (gold.columns.size() != pred.columns.size()) return 0;
    if (gold.rows.size() != pred.rows.size()) return 0;
    const auto g = sorted_rows(gold);
    const auto p = sorted_rows(pred);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i].size() != p[i].size()) return 0;
        for (std::size_t c = 0; c < g[i].size(); ++c) {
            if (!cells_equal(g[i][c], p[i][c])) return 0;
        }
    }
    return 1;
}

SoftF1 soft_f1(const ResultTable& gold, const ResultTable& pred) {
    SoftF1 s;
    if (gold.rows.empty() && pred.rows.empty()) {
        s.f1 = 1.0;
        return s;
    }
    const auto g = sorted_rows(gold);
    const auto p = sorted_rows(pred);
    const auto paired = std::min(g.size(), p.size());
    for (std::size_t i = 0; i < paired; ++i) {
        const auto m = matched_cells(g[i], p[i]);
        s.tp += m;
        s.fp += p[i].size() - m;
        s.fn += g[i].size() - m;
    }
    for (std::size_t i = paired; i < p.size(); ++i) s.fp += p[i].size();
    for (std::size_t i = paired; i < g.size(); ++i) s.fn += g[i].size();

    const auto tp = static_cast<double>(s.tp);
    if (s.tp + s.fp > 0) s.precision = tp / static_cast<double>(s.tp + s.fp);
    if (s.tp + s.fn > 0) s.recall = tp / static_cast<double>(s.tp + s.fn);
    if (s.precision + s.recall > 0.0) {
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    }
    return s;
}

double r_ves(bool correct, std::optional<double> tau) {
    if (!correct) return 0.0;
    if (!tau || std::isnan(*tau)) throw ContractError("r_ves: correct prediction without tau");
    const double t = *tau;
    if (t >= 2.0) return 1.25;
    if (t >= 1.0) return 1.0;
    if (t >= 0.5) return 0.75;
    if (t >= 0.25) return 0.5;
    return 0.25;
}

SplitSummary aggregate(std::span<const MetricScores> per_example, bool stratify) {
    if (per_example.empty()) throw ContractError("aggregate: no examples");
    SplitSummary out;
    out.stratified = stratify;
    struct Sums {
        std::size_t n = 0;
        double ex = 0, f1 = 0, rves = 0;
    };
    Sums total;
    std::array<Sums, 4> buckets{};
    for (const auto& m : per_example) {
        total.n += 1;
        total.ex += m.ex;
        total.f1 += m.soft.f1;
        total.rves += m.r_ves;
        auto& b = buckets[static_cast<std::size_t>(m.difficulty)];
        b.n += 1;
        b.ex += m.ex;
        b.f1 += m.soft.f1;
        b.rves += m.r_ves;
    }
    auto means = [](const Sums& s) {
        MetricMeans m;
        m.n = s.n;
        if (s.n == 0) return m;
        const auto n = static_cast<double>(s.n);
        m.ex = s.ex / n;
        m.soft_f1 = s.f1 / n;
        m.r_ves = s.rves / n;
        return m;
    };
    out.overall = means(total);
    if (stratify) {
        for (std::size_t i = 0; i < buckets.size(); ++i) out.by_difficulty[i] = means(buckets[i]);
    }
    return out;
}

double round_half_up(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    const double mag = std::floor(std::fabs(value) * scale + 0.5 + 1e-9) / scale;
    return value < 0 ? -mag : mag;
}

std::string format_points(double points, bool explicit_sign) {
    double r = round_half_up(points, 1);
    if (r == 0.0) r = 0.0;  // no "-0.0"
    char buf[32];
    std::snprintf(buf, sizeof(buf), explicit_sign && r > 0 ? "+%.1f" : "%.1f", r);
    return buf;
}

std::string format_percent(double fraction) { return format_points(fraction * 100.0); }

}  // namespace sqlagents
