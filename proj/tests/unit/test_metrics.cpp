#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sqlagents/errors.hpp"
#include "sqlagents/metrics.hpp"
#include "support.hpp"

using namespace sqlagents;
using namespace sqlagents::testing;

TEST(ExecMatch, AgreesWithMultisetOracle) {
    const auto pairs = make_table_pairs(1234, 400);
    std::size_t matches = 0;
    for (const auto& p : pairs) {
        const int oracle = multiset_oracle(p.gold, p.pred);
        EXPECT_EQ(exec_match(p.gold, p.pred), oracle) << p.mutation;
        matches += static_cast<std::size_t>(oracle);
    }
    // both outcomes are well represented
    EXPECT_GT(matches, 80u);
    EXPECT_LT(matches, 320u);
}

TEST(ExecMatch, Basics) {
    EXPECT_EQ(exec_match(table({{1}, {2}}), table({{2}, {1}})), 1);
    EXPECT_EQ(exec_match(table({{1}, {1}}), table({{1}})), 0);
    EXPECT_EQ(exec_match(table({}, 1), table({}, 1)), 1);
    EXPECT_EQ(exec_match(table({}, 1), table({}, 2)), 0);
    EXPECT_EQ(exec_match(table({{std::int64_t{2}}}), table({{2.0}})), 1);
    EXPECT_EQ(exec_match(table({{1, std::string("a")}}), table({{std::string("a"), 1}})), 0);
}

TEST(ExecMatch, RelativeToleranceForReals) {
    EXPECT_EQ(exec_match(table({{1000000.0}}), table({{1000000.5}})), 1);
    EXPECT_EQ(exec_match(table({{1.0}}), table({{1.00001}})), 0);
    // integers compare exactly
    EXPECT_EQ(exec_match(table({{std::int64_t{9007199254740993}}}), table({{std::int64_t{9007199254740992}}})), 0);
}

TEST(ExecMatch, Symmetric) {
    for (const auto& p : make_table_pairs(99, 200)) {
        EXPECT_EQ(exec_match(p.gold, p.pred), exec_match(p.pred, p.gold));
    }
}

TEST(SoftF1, LabelledCorpus) {
    const auto corpus = load_soft_f1_corpus();
    ASSERT_EQ(corpus.size(), 25u);
    for (const auto& c : corpus) {
        const auto s = soft_f1(c.gold, c.pred);
        EXPECT_EQ(s.tp, c.tp) << c.name;
        EXPECT_EQ(s.fp, c.fp) << c.name;
        EXPECT_EQ(s.fn, c.fn) << c.name;
        if (c.f1) {
            EXPECT_EQ(s.f1, *c.f1) << c.name;
            continue;
        }
        const double p = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
        const double r = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
        const double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
        EXPECT_DOUBLE_EQ(s.precision, p) << c.name;
        EXPECT_DOUBLE_EQ(s.recall, r) << c.name;
        EXPECT_DOUBLE_EQ(s.f1, f1) << c.name;
    }
}

TEST(SoftF1, Properties) {
    for (const auto& p : make_table_pairs(7, 300)) {
        const auto s = soft_f1(p.gold, p.pred);
        EXPECT_GE(s.f1, 0.0);
        EXPECT_LE(s.f1, 1.0);
        // a perfect EX match with same column count has F1 = 1
        if (exec_match(p.gold, p.pred)) EXPECT_DOUBLE_EQ(s.f1, 1.0) << p.mutation;
        // cells are conserved
        std::size_t gold_cells = 0, pred_cells = 0;
        for (const auto& r : p.gold.rows) gold_cells += r.size();
        for (const auto& r : p.pred.rows) pred_cells += r.size();
        EXPECT_EQ(s.tp + s.fn, gold_cells);
        EXPECT_EQ(s.tp + s.fp, pred_cells);
        const auto t = soft_f1(p.pred, p.gold);
        EXPECT_EQ(t.tp, s.tp);
        EXPECT_EQ(t.fp, s.fn);
    }
}

TEST(RVes, BoundaryGrid) {
    const std::vector<std::pair<double, double>> grid = {
        {0.1, 0.25}, {0.249, 0.25}, {0.25, 0.5}, {0.49, 0.5},   {0.5, 0.75},
        {0.99, 0.75}, {1.0, 1.0},   {1.99, 1.0}, {2.0, 1.25},   {10.0, 1.25},
    };
    for (const auto& [tau, want] : grid) EXPECT_EQ(r_ves(true, tau), want) << tau;
}

TEST(RVes, IncorrectIsZeroAndCorrectNeedsTau) {
    EXPECT_EQ(r_ves(false, 10.0), 0.0);
    EXPECT_EQ(r_ves(false, std::nullopt), 0.0);
    EXPECT_THROW(r_ves(true, std::nullopt), ContractError);
    EXPECT_THROW(r_ves(true, std::nan("")), ContractError);
}

TEST(RVes, MonotoneInTau) {
    double prev = 0.0;
    for (double tau = 0.01; tau < 5.0; tau += 0.01) {
        const double v = r_ves(true, tau);
        EXPECT_GE(v, prev);
        EXPECT_GT(v, 0.0);
        prev = v;
    }
}

TEST(Aggregate, MeansAndStrata) {
    std::vector<MetricScores> s;
    auto add = [&](int ex, double f1, double rv, Difficulty d) {
        MetricScores m;
        m.ex = ex;
        m.soft.f1 = f1;
        m.r_ves = rv;
        m.difficulty = d;
        s.push_back(m);
    };
    add(1, 1.0, 1.25, Difficulty::simple);
    add(0, 0.5, 0.0, Difficulty::simple);
    add(1, 1.0, 0.75, Difficulty::hard);
    add(0, 0.0, 0.0, Difficulty::moderate);
    const auto a = aggregate(s);
    EXPECT_EQ(a.overall.n, 4u);
    EXPECT_DOUBLE_EQ(a.overall.ex, 0.5);
    EXPECT_DOUBLE_EQ(a.overall.soft_f1, 2.5 / 4);
    EXPECT_DOUBLE_EQ(a.overall.r_ves, 0.5);
    EXPECT_EQ(a.bucket(Difficulty::simple).n, 2u);
    EXPECT_DOUBLE_EQ(a.bucket(Difficulty::simple).ex, 0.5);
    EXPECT_DOUBLE_EQ(a.bucket(Difficulty::hard).r_ves, 0.75);
    EXPECT_EQ(a.bucket(Difficulty::unlabeled).n, 0u);
    EXPECT_FALSE(aggregate(s, false).stratified);
    EXPECT_THROW(aggregate(std::vector<MetricScores>{}), ContractError);
}

TEST(Aggregate, StrataPartitionOverall) {
    std::mt19937 rng(3);
    std::vector<MetricScores> s(137);
    for (auto& m : s) {
        m.ex = static_cast<int>(rng() % 2);
        m.soft.f1 = (rng() % 100) / 100.0;
        m.r_ves = m.ex ? 0.25 * static_cast<double>(1 + rng() % 5) : 0.0;
        m.difficulty = static_cast<Difficulty>(rng() % 4);
    }
    const auto a = aggregate(s);
    double ex = 0;
    std::size_t n = 0;
    for (const auto& b : a.by_difficulty) {
        ex += b.ex * static_cast<double>(b.n);
        n += b.n;
    }
    EXPECT_EQ(n, s.size());
    EXPECT_NEAR(ex / static_cast<double>(n), a.overall.ex, 1e-12);
    EXPECT_LE(a.overall.r_ves, 1.25);
}

TEST(Format, OneDecimalHalfUp) {
    EXPECT_EQ(format_percent(262.0 / 500.0), "52.4");
    EXPECT_EQ(format_percent(0.5245), "52.5");
    EXPECT_EQ(format_percent(0.52449), "52.4");
    EXPECT_EQ(format_points(0.05), "0.1");
    EXPECT_EQ(format_points(-0.05), "-0.1");
    EXPECT_EQ(format_points(-0.04), "0.0");
    EXPECT_EQ(format_points(41.0 - 31.4, true), "+9.6");
    EXPECT_EQ(format_points(0.0, true), "0.0");
    EXPECT_EQ(format_points(-2.25, true), "-2.3");
    EXPECT_EQ(format_percent(1.25), "125.0");
    EXPECT_DOUBLE_EQ(round_half_up(2.675, 2), 2.68);
}
