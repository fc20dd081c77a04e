#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "sqlagents/errors.hpp"
#include "sqlagents/sqlexec.hpp"
#include "support.hpp"

using namespace sqlagents;
using namespace sqlagents::testing;
using namespace std::chrono_literals;

namespace {

class ExecTest : public ::testing::Test {
protected:
    void SetUp() override {
        schema = make_db(dir.path(), "t",
                         "CREATE TABLE t (i INTEGER, r REAL, s TEXT, b BLOB, n);\n"
                         "INSERT INTO t VALUES (1, 2.0, 'x', x'0102', NULL);\n"
                         "INSERT INTO t VALUES (2, 2.5, 'y', x'', 7);\n");
    }
    TempDir dir;
    SchemaCatalog schema;
};

}  // namespace

TEST_F(ExecTest, TypedCells) {
    const auto out = execute(schema, "SELECT i, r, s, b, n FROM t ORDER BY i", 5s);
    ASSERT_TRUE(out.ok()) << out.error_text;
    const auto& t = *out.table;
    EXPECT_EQ(t.columns, (std::vector<std::string>{"i", "r", "s", "b", "n"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(std::get<std::int64_t>(t.rows[0][0]), 1);
    // integral reals stay reals
    EXPECT_EQ(std::get<double>(t.rows[0][1]), 2.0);
    EXPECT_EQ(std::get<std::string>(t.rows[0][2]), "x");
    const std::byte bytes[] = {std::byte{1}, std::byte{2}};
    EXPECT_EQ(std::get<BlobDigest>(t.rows[0][3]), digest_blob(bytes));
    EXPECT_EQ(std::get<BlobDigest>(t.rows[1][3]).size, 0u);
    EXPECT_TRUE(std::holds_alternative<std::monostate>(t.rows[0][4]));
}

TEST_F(ExecTest, ErrorsAreOutcomesNotExceptions) {
    auto out = execute(schema, "SELEC 1", 5s);
    EXPECT_EQ(out.status, ExecStatus::sql_error);
    EXPECT_FALSE(out.table);
    EXPECT_FALSE(out.error_text.empty());
    EXPECT_EQ(execute(schema, "SELECT * FROM missing", 5s).status, ExecStatus::sql_error);
    EXPECT_EQ(execute(schema, "", 5s).status, ExecStatus::sql_error);
    EXPECT_EQ(execute(schema, "SELECT 1; SELECT 2", 5s).status, ExecStatus::sql_error);
}

TEST_F(ExecTest, TrailingSemicolonIsFine) {
    EXPECT_TRUE(execute(schema, "SELECT 1;", 5s).ok());
    EXPECT_TRUE(execute(schema, "SELECT 1;  \n", 5s).ok());
}

TEST_F(ExecTest, WritesAreRefused) {
    for (const char* sql : {"INSERT INTO t VALUES (3, 0, 'z', NULL, NULL)", "DELETE FROM t", "DROP TABLE t",
                            "UPDATE t SET i = 9", "CREATE TABLE u (x)", "ATTACH DATABASE ':memory:' AS m",
                            "PRAGMA user_version = 3"}) {
        EXPECT_EQ(execute(schema, sql, 5s).status, ExecStatus::sql_error) << sql;
    }
    const auto out = execute(schema, "SELECT COUNT(*) FROM t", 5s);
    EXPECT_EQ(std::get<std::int64_t>(out.table->rows[0][0]), 2);
}

TEST_F(ExecTest, RunawayQueryTimesOut) {
    const auto start = std::chrono::steady_clock::now();
    const auto out = execute(schema,
                             "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) "
                             "SELECT COUNT(*) FROM c",
                             200ms);
    const auto took = std::chrono::steady_clock::now() - start;
    EXPECT_EQ(out.status, ExecStatus::timeout);
    EXPECT_LT(took, 5s);
}

TEST_F(ExecTest, ConnectionIsReusableAndMovable) {
    Connection a(schema.db_path);
    EXPECT_TRUE(a.execute("SELECT 1", 1s).ok());
    Connection b(std::move(a));
    EXPECT_TRUE(b.execute("SELECT 2", 1s).ok());
    EXPECT_EQ(b.run_discarding("SELECT * FROM t", 1s).status, ExecStatus::ok);
    const auto discarded = b.run_discarding("SELECT * FROM t", 1s);
    ASSERT_TRUE(discarded.table);
    EXPECT_TRUE(discarded.table->rows.empty());
}

TEST(Exec, MissingDatabaseThrows) {
    EXPECT_THROW(Connection("/nonexistent/x.sqlite"), Error);
}

namespace {

// Linear-interpolated quantile, written independently of the library.
double quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

}  // namespace

TEST(Timing, IqrTrimMatchesOracle) {
    std::mt19937 rng(7);
    std::lognormal_distribution<double> dist(0.0, 0.6);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 4 + rng() % 60;
        std::vector<double> xs(n);
        for (auto& x : xs) x = dist(rng);
        if (trial % 5 == 0) xs[rng() % n] *= 50;  // spike
        const double q1 = quantile(xs, 0.25), q3 = quantile(xs, 0.75);
        std::vector<double> expect;
        for (double x : xs) {
            if (x >= q1 - 1.5 * (q3 - q1) && x <= q3 + 1.5 * (q3 - q1)) expect.push_back(x);
        }
        EXPECT_EQ(trim_samples(xs, TrimPolicy::iqr), expect);
        const double mean = std::accumulate(expect.begin(), expect.end(), 0.0) / static_cast<double>(expect.size());
        EXPECT_DOUBLE_EQ(trimmed_mean(xs, TrimPolicy::iqr), mean);
    }
}

TEST(Timing, SmallSamplesAndNonePolicyKeepEverything) {
    const std::vector<double> three{1, 1, 100};
    EXPECT_EQ(trim_samples(three, TrimPolicy::iqr), three);
    const std::vector<double> spiky{1, 1, 1, 1, 1, 1, 100};
    EXPECT_EQ(trim_samples(spiky, TrimPolicy::none), spiky);
    EXPECT_EQ(trim_samples(spiky, TrimPolicy::iqr).size(), 6u);
    EXPECT_THROW(trimmed_mean(std::vector<double>{}, TrimPolicy::iqr), ContractError);
}

TEST(Timing, TrimPolicyNames) {
    EXPECT_EQ(parse_trim_policy("iqr"), TrimPolicy::iqr);
    EXPECT_EQ(parse_trim_policy("none"), TrimPolicy::none);
    EXPECT_FALSE(parse_trim_policy("median"));
    EXPECT_EQ(to_string(TrimPolicy::iqr), "iqr");
}

TEST(Timing, TauFromSeries) {
    const auto s = make_timing_sample({0.2, 0.2, 0.2}, {0.1, 0.1, 0.1}, TrimPolicy::iqr);
    ASSERT_TRUE(s.tau);
    EXPECT_DOUBLE_EQ(*s.tau, 2.0);
    EXPECT_FALSE(make_timing_sample({0.0, 0.0, 0.0}, {0.1, 0.1, 0.1}, TrimPolicy::none).tau);
}

namespace {

// Each measured run lasts gold_ms for the first `runs` runs, pred_ms after.
MonotonicClock fake_clock(int runs, double gold_ms, double pred_ms, std::shared_ptr<int> calls) {
    auto now_ms = std::make_shared<double>(0.0);
    return [=] {
        const int k = (*calls)++;
        if (k % 2 == 1) *now_ms += (k / 2 < runs) ? gold_ms : pred_ms;
        else *now_ms += 0.5;  // gap between runs is not measured
        return std::chrono::nanoseconds(static_cast<std::int64_t>(*now_ms * 1e6));
    };
}

}  // namespace

TEST_F(ExecTest, TimePairWithFakeClock) {
    auto calls = std::make_shared<int>(0);
    TimingOptions o;
    o.runs = 10;
    o.clock = fake_clock(10, 4.0, 2.0, calls);
    const auto s = time_pair(schema, "SELECT * FROM t", "SELECT i FROM t", o);
    EXPECT_EQ(*calls, 40);
    ASSERT_EQ(s.gt_times.size(), 10u);
    ASSERT_EQ(s.pred_times.size(), 10u);
    EXPECT_NEAR(s.gt_times[3], 0.004, 1e-12);
    EXPECT_NEAR(s.pred_times[7], 0.002, 1e-12);
    ASSERT_TRUE(s.tau);
    EXPECT_NEAR(*s.tau, 2.0, 1e-9);
}

TEST_F(ExecTest, TimePairContract) {
    TimingOptions o;
    o.runs = 2;
    EXPECT_THROW(time_pair(schema, "SELECT 1", "SELECT 1", o), ContractError);
    o.runs = 3;
    EXPECT_THROW(time_pair(schema, "SELECT 1", "SELECT nope FROM t", o), TimingError);
}

TEST_F(ExecTest, RealTimingOfIdenticalQueriesIsNearOne) {
    TimingOptions o;
    o.runs = 30;
    const auto s = time_pair(schema, "SELECT * FROM t", "SELECT * FROM t", o);
    ASSERT_TRUE(s.tau);
    EXPECT_GT(*s.tau, 0.2);
    EXPECT_LT(*s.tau, 5.0);
}
