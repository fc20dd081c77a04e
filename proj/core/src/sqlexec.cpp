#include "sqlagents/sqlexec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sqlagents/dataset.hpp"
#include "sqlagents/errors.hpp"
#include "sqlagents/jsonl.hpp"
#include "sqlite_util.hpp"

namespace fs = std::filesystem;

namespace sqlagents {

namespace {

constexpr int kProgressOps = 1000;

int on_progress(void* arg) {
    const auto* deadline = static_cast<const std::chrono::steady_clock::time_point*>(arg);
    return std::chrono::steady_clock::now() >= *deadline ? 1 : 0;
}

// Only reads are allowed through this connection.
int authorize(void*, int action, const char*, const char*, const char*, const char*) {
    switch (action) {
        case SQLITE_SELECT:
        case SQLITE_READ:
        case SQLITE_FUNCTION:
        case SQLITE_RECURSIVE:
            return SQLITE_OK;
        default:
            return SQLITE_DENY;
    }
}

bool only_trivia(sqlite3* db, const char* tail) {
    while (tail && *tail) {
        sqlite3_stmt* next = nullptr;
        const char* rest = nullptr;
        if (sqlite3_prepare_v2(db, tail, -1, &next, &rest) != SQLITE_OK) return false;
        if (next) {
            sqlite3_finalize(next);
            return false;
        }
        if (rest == tail) break;
        tail = rest;
    }
    return true;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace

BlobDigest digest_blob(std::span<const std::byte> bytes) {
    std::string_view view(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    return BlobDigest{fnv1a64(view), bytes.size()};
}

std::string_view to_string(ExecStatus s) {
    switch (s) {
        case ExecStatus::ok: return "ok";
        case ExecStatus::sql_error: return "sql_error";
        case ExecStatus::timeout: return "timeout";
    }
    return "ok";
}

Connection::Connection(const fs::path& db_path) : path_(db_path) {
    if (!fs::is_regular_file(db_path)) throw NotFoundError("database not found: " + db_path.string());
    int rc = sqlite3_open_v2(db_path.c_str(), &db_, SQLITE_OPEN_READONLY | SQLITE_OPEN_NOMUTEX,
                             nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = db_ ? sqlite3_errmsg(db_) : "open failed";
        sqlite3_close_v2(db_);
        db_ = nullptr;
        throw StorageError(db_path.string() + ": " + msg);
    }
    sqlite3_limit(db_, SQLITE_LIMIT_ATTACHED, 0);
    sqlite3_set_authorizer(db_, authorize, nullptr);
    sqlite3_progress_handler(db_, kProgressOps, on_progress, &deadline_);
}

Connection::~Connection() {
    if (db_) sqlite3_close_v2(db_);
}

Connection::Connection(Connection&& other) noexcept
    : path_(std::move(other.path_)), db_(std::exchange(other.db_, nullptr)) {
    if (db_) sqlite3_progress_handler(db_, kProgressOps, on_progress, &deadline_);
}

Connection& Connection::operator=(Connection&& other) noexcept {
    if (this != &other) {
        if (db_) sqlite3_close_v2(db_);
        path_ = std::move(other.path_);
        db_ = std::exchange(other.db_, nullptr);
        if (db_) sqlite3_progress_handler(db_, kProgressOps, on_progress, &deadline_);
    }
    return *this;
}

ExecOutcome Connection::execute(std::string_view sql, std::chrono::milliseconds timeout) {
    return run(sql, timeout, true);
}

ExecOutcome Connection::run_discarding(std::string_view sql, std::chrono::milliseconds timeout) {
    return run(sql, timeout, false);
}

ExecOutcome Connection::run(std::string_view sql, std::chrono::milliseconds timeout, bool keep_rows) {
    if (timeout.count() <= 0) throw ContractError("execute: timeout must be positive");
    ExecOutcome out;
    deadline_ = std::chrono::steady_clock::now() + timeout;

    sqlite3_stmt* raw = nullptr;
    const char* tail = nullptr;
    const std::string text(sql);
    int rc = sqlite3_prepare_v2(db_, text.c_str(), static_cast<int>(text.size() + 1), &raw, &tail);
    detail::StmtPtr stmt(raw);
    if (rc != SQLITE_OK) {
        out.status = rc == SQLITE_INTERRUPT ? ExecStatus::timeout : ExecStatus::sql_error;
        out.error_text = sqlite3_errmsg(db_);
        return out;
    }
    if (!stmt) {
        out.status = ExecStatus::sql_error;
        out.error_text = "empty statement";
        return out;
    }
    if (!only_trivia(db_, tail)) {
        out.status = ExecStatus::sql_error;
        out.error_text = "multiple statements are not supported";
        return out;
    }

    ResultTable table;
    const int ncol = sqlite3_column_count(stmt.get());
    table.columns.reserve(static_cast<std::size_t>(ncol));
    for (int c = 0; c < ncol; ++c) {
        const char* name = sqlite3_column_name(stmt.get(), c);
        table.columns.emplace_back(name ? name : "");
    }

    while ((rc = sqlite3_step(stmt.get())) == SQLITE_ROW) {
        if (!keep_rows) continue;
        Row row;
        row.reserve(static_cast<std::size_t>(ncol));
        for (int c = 0; c < ncol; ++c) {
            switch (sqlite3_column_type(stmt.get(), c)) {
                case SQLITE_INTEGER:
                    row.emplace_back(static_cast<std::int64_t>(sqlite3_column_int64(stmt.get(), c)));
                    break;
                case SQLITE_FLOAT:
                    row.emplace_back(sqlite3_column_double(stmt.get(), c));
                    break;
                case SQLITE_TEXT:
                    row.emplace_back(detail::column_text(stmt.get(), c));
                    break;
                case SQLITE_BLOB: {
                    const auto* p = static_cast<const std::byte*>(sqlite3_column_blob(stmt.get(), c));
                    const auto n = static_cast<std::size_t>(sqlite3_column_bytes(stmt.get(), c));
                    row.emplace_back(digest_blob({p, n}));
                    break;
                }
                default:
                    row.emplace_back(std::monostate{});
            }
        }
        table.rows.push_back(std::move(row));
    }

    if (rc == SQLITE_DONE) {
        out.table = std::move(table);
        return out;
    }
    if (rc == SQLITE_INTERRUPT && std::chrono::steady_clock::now() >= deadline_) {
        out.status = ExecStatus::timeout;
        out.error_text = "query exceeded " + std::to_string(timeout.count()) + " ms";
        return out;
    }
    out.status = ExecStatus::sql_error;
    out.error_text = sqlite3_errmsg(db_);
    return out;
}

ExecOutcome execute(const SchemaCatalog& db, std::string_view sql, std::chrono::milliseconds timeout) {
    Connection conn(db.db_path);
    return conn.execute(sql, timeout);
}

std::string_view to_string(TrimPolicy p) {
    return p == TrimPolicy::iqr ? "iqr" : "none";
}

std::optional<TrimPolicy> parse_trim_policy(std::string_view text) {
    if (text == "iqr") return TrimPolicy::iqr;
    if (text == "none") return TrimPolicy::none;
    return std::nullopt;
}

std::vector<double> trim_samples(std::span<const double> seconds, TrimPolicy policy) {
    std::vector<double> kept(seconds.begin(), seconds.end());
    if (policy == TrimPolicy::none || kept.size() < 4) return kept;
    std::vector<double> sorted = kept;
    std::sort(sorted.begin(), sorted.end());
    const double q1 = quantile_sorted(sorted, 0.25);
    const double q3 = quantile_sorted(sorted, 0.75);
    const double iqr = q3 - q1;
    const double lo = q1 - 1.5 * iqr;
    const double hi = q3 + 1.5 * iqr;
    std::erase_if(kept, [&](double v) { return v < lo || v > hi; });
    return kept;
}

double trimmed_mean(std::span<const double> seconds, TrimPolicy policy) {
    if (seconds.empty()) throw ContractError("trimmed_mean: no samples");
    const auto kept = trim_samples(seconds, policy);
    return std::accumulate(kept.begin(), kept.end(), 0.0) / static_cast<double>(kept.size());
}

TimingSample make_timing_sample(std::vector<double> gt_times, std::vector<double> pred_times,
                                TrimPolicy policy) {
    TimingSample s;
    s.gt_times = std::move(gt_times);
    s.pred_times = std::move(pred_times);
    const double gt = trimmed_mean(s.gt_times, policy);
    const double pred = trimmed_mean(s.pred_times, policy);
    if (gt > 0.0 && pred > 0.0) s.tau = gt / pred;
    return s;
}

MonotonicClock steady_clock_source() {
    return [] {
        return std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch());
    };
}

namespace {

std::vector<double> measure(Connection& conn, std::string_view sql, const TimingOptions& o,
                            std::string_view which) {
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(o.runs));
    for (int i = 0; i < o.runs; ++i) {
        const auto start = o.clock();
        auto res = conn.run_discarding(sql, o.timeout);
        const auto stop = o.clock();
        if (!res.ok()) {
            throw TimingError(std::string(which) + " run " + std::to_string(i) + " failed (" +
                              std::string(to_string(res.status)) + "): " + res.error_text);
        }
        times.push_back(std::chrono::duration<double>(stop - start).count());
    }
    return times;
}

}  // namespace

TimingSample time_pair(Connection& conn, std::string_view gold_sql, std::string_view pred_sql,
                       const TimingOptions& options) {
    if (options.runs < 3) throw ContractError("time_pair: runs must be >= 3");
    auto gt = measure(conn, gold_sql, options, "gold");
    auto pred = measure(conn, pred_sql, options, "pred");
    return make_timing_sample(std::move(gt), std::move(pred), options.trim);
}

TimingSample time_pair(const SchemaCatalog& db, std::string_view gold_sql, std::string_view pred_sql,
                       const TimingOptions& options) {
    Connection conn(db.db_path);
    return time_pair(conn, gold_sql, pred_sql, options);
}

}  // namespace sqlagents
