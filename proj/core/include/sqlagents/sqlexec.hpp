#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

struct sqlite3;

namespace sqlagents {

struct SchemaCatalog;

struct BlobDigest {
    std::uint64_t fnv1a = 0;
    std::size_t size = 0;

    friend bool operator==(const BlobDigest&, const BlobDigest&) = default;
};

BlobDigest digest_blob(std::span<const std::byte> bytes);

// null, integer, real, text, blob. Integral reals stay reals.
using Cell = std::variant<std::monostate, std::int64_t, double, std::string, BlobDigest>;
using Row = std::vector<Cell>;

struct ResultTable {
    std::vector<std::string> columns;
    std::vector<Row> rows;

    friend bool operator==(const ResultTable&, const ResultTable&) = default;
};

enum class ExecStatus { ok, sql_error, timeout };

std::string_view to_string(ExecStatus s);

struct ExecOutcome {
    ExecStatus status = ExecStatus::ok;
    std::optional<ResultTable> table;  // present iff status == ok
    std::string error_text;

    bool ok() const noexcept { return status == ExecStatus::ok; }
};

// Read-only connection to one database file. Not shared across threads.
class Connection {
public:
    explicit Connection(const std::filesystem::path& db_path);
    ~Connection();
    Connection(Connection&&) noexcept;
    Connection& operator=(Connection&&) noexcept;
    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;

    ExecOutcome execute(std::string_view sql, std::chrono::milliseconds timeout);

    // Runs the statement to completion without materializing rows.
    ExecOutcome run_discarding(std::string_view sql, std::chrono::milliseconds timeout);

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    ExecOutcome run(std::string_view sql, std::chrono::milliseconds timeout, bool keep_rows);

    std::filesystem::path path_;
    sqlite3* db_ = nullptr;
    std::chrono::steady_clock::time_point deadline_{};
};

ExecOutcome execute(const SchemaCatalog& db, std::string_view sql,
                    std::chrono::milliseconds timeout = std::chrono::seconds(30));

enum class TrimPolicy { none, iqr };

std::string_view to_string(TrimPolicy p);
std::optional<TrimPolicy> parse_trim_policy(std::string_view text);

// Drops samples outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR] (linear-interpolated
// quartiles) under TrimPolicy::iqr. Returns samples in input order.
std::vector<double> trim_samples(std::span<const double> seconds, TrimPolicy policy);
double trimmed_mean(std::span<const double> seconds, TrimPolicy policy);

struct TimingSample {
    std::vector<double> gt_times;
    std::vector<double> pred_times;
    std::optional<double> tau;  // T_GT / T_Pred over trimmed means
};

// Computes tau from already-measured series.
TimingSample make_timing_sample(std::vector<double> gt_times, std::vector<double> pred_times,
                                TrimPolicy policy);

// Monotonic time source; replaceable so timing math can be tested.
using MonotonicClock = std::function<std::chrono::nanoseconds()>;
MonotonicClock steady_clock_source();

struct TimingOptions {
    int runs = 100;
    TrimPolicy trim = TrimPolicy::iqr;
    std::chrono::milliseconds timeout = std::chrono::seconds(30);
    MonotonicClock clock = steady_clock_source();
};

// Runs gold `runs` times, then pred `runs` times, serially on `conn`.
// Throws TimingError when any run fails or times out; ContractError when runs < 3.
TimingSample time_pair(Connection& conn, std::string_view gold_sql, std::string_view pred_sql,
                       const TimingOptions& options);
TimingSample time_pair(const SchemaCatalog& db, std::string_view gold_sql,
                       std::string_view pred_sql, const TimingOptions& options);

}  // namespace sqlagents
