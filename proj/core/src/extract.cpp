#include <algorithm>
#include <cctype>

#include "sqlagents/pipelines.hpp"

namespace sqlagents {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string normalize(std::string_view sql) {
    sql = trim(sql);
    while (!sql.empty() && (sql.back() == ';' || is_space(sql.back()))) sql.remove_suffix(1);
    return std::string(sql);
}

// First keyword of a code block, skipping whitespace and "--" comments.
std::string first_keyword(std::string_view code) {
    std::size_t i = 0;
    while (i < code.size()) {
        if (is_space(code[i])) {
            ++i;
        } else if (code.substr(i, 2) == "--") {
            auto nl = code.find('\n', i);
            i = nl == std::string_view::npos ? code.size() : nl + 1;
        } else {
            break;
        }
    }
    std::size_t j = i;
    while (j < code.size() && is_word(code[j])) ++j;
    return lower(code.substr(i, j - i));
}

std::optional<std::string> last_fenced(std::string_view text) {
    std::optional<std::string> best;
    std::size_t pos = 0;
    while (true) {
        const auto open = text.find("```", pos);
        if (open == std::string_view::npos) break;
        const auto label_end = text.find('\n', open + 3);
        if (label_end == std::string_view::npos) break;
        const auto label = lower(trim(text.substr(open + 3, label_end - open - 3)));
        const auto body_start = label_end + 1;
        auto close = text.find("```", body_start);
        const auto body = text.substr(body_start, (close == std::string_view::npos ? text.size() : close) - body_start);
        pos = close == std::string_view::npos ? text.size() : close + 3;

        bool candidate = false;
        if (label.rfind("sql", 0) == 0) {
            candidate = true;
        } else if (label.empty()) {
            const auto kw = first_keyword(body);
            candidate = kw == "select" || kw == "with";
        }
        if (candidate) {
            auto sql = normalize(body);
            if (!sql.empty()) best = std::move(sql);
        }
        if (close == std::string_view::npos) break;
    }
    return best;
}

bool at_line_start(std::string_view text, std::size_t pos) {
    std::size_t i = pos;
    while (i > 0 && (text[i - 1] == ' ' || text[i - 1] == '\t')) --i;
    return i == 0 || text[i - 1] == '\n' || text[i - 1] == ':' || text[i - 1] == '`' ||
           text[i - 1] == '"' || text[i - 1] == '*';
}

bool keyword_at(std::string_view text, std::size_t pos, std::string_view kw, bool* exact_case) {
    if (pos + kw.size() > text.size()) return false;
    if (pos > 0 && is_word(text[pos - 1])) return false;
    if (pos + kw.size() < text.size() && is_word(text[pos + kw.size()])) return false;
    for (std::size_t k = 0; k < kw.size(); ++k) {
        if (std::toupper(static_cast<unsigned char>(text[pos + k])) != kw[k]) return false;
    }
    *exact_case = text.substr(pos, kw.size()) == kw;
    return true;
}

// End of a prose statement beginning at `start`.
std::size_t statement_end(std::string_view text, std::size_t start, bool backticked, bool bold = false) {
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (c == ';') return i + 1;
        if (backticked && c == '`') return i;
        if (bold && text.substr(i, 2) == "**") return i;
        if (c == '<' && (text.substr(i, 7) == "<think>" || text.substr(i, 8) == "</think>")) return i;
        if (c == '\n') {
            std::size_t j = i + 1;
            while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r')) ++j;
            if (j < text.size() && text[j] == '\n') return i;
            if (text.substr(j, 3) == "```") return i;
        }
    }
    return text.size();
}

std::size_t skip_spaces(std::string_view s, std::size_t i) {
    while (i < s.size() && is_space(s[i])) ++i;
    return i;
}

bool word_ci_at(std::string_view s, std::size_t i, std::string_view kw) {
    bool exact = false;
    return keyword_at(s, i, kw, &exact);
}

// WITH [RECURSIVE] name ... AS [NOT] [MATERIALIZED] (
bool looks_like_cte(std::string_view stmt) {
    std::size_t i = skip_spaces(stmt, 4);
    if (word_ci_at(stmt, i, "RECURSIVE")) i = skip_spaces(stmt, i + 9);
    if (i >= stmt.size() || !(is_word(stmt[i]) || stmt[i] == '"' || stmt[i] == '`' || stmt[i] == '[')) {
        return false;
    }
    for (; i < stmt.size(); ++i) {
        if (!word_ci_at(stmt, i, "AS")) continue;
        std::size_t j = skip_spaces(stmt, i + 2);
        if (word_ci_at(stmt, j, "NOT")) j = skip_spaces(stmt, j + 3);
        if (word_ci_at(stmt, j, "MATERIALIZED")) j = skip_spaces(stmt, j + 12);
        if (j < stmt.size() && stmt[j] == '(') return true;
    }
    return false;
}

std::optional<std::string> last_prose_statement(std::string_view text) {
    std::optional<std::string> best;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t found = std::string_view::npos;
        for (std::size_t i = pos; i < text.size(); ++i) {
            bool exact = false;
            if (keyword_at(text, i, "SELECT", &exact)) {
                if (exact || at_line_start(text, i)) {
                    found = i;
                    break;
                }
            } else if (keyword_at(text, i, "WITH", &exact)) {
                if (exact || at_line_start(text, i)) {
                    const auto end = statement_end(text, i, i > 0 && text[i - 1] == '`');
                    if (looks_like_cte(text.substr(i, end - i))) {
                        found = i;
                        break;
                    }
                }
            }
        }
        if (found == std::string_view::npos) break;
        const bool backticked = found > 0 && text[found - 1] == '`';
        const bool bold = found > 1 && text.substr(found - 2, 2) == "**";
        const auto end = statement_end(text, found, backticked, bold);
        auto stmt = normalize(text.substr(found, end - found));
        // A sentence-final period is prose, not SQL.
        if (end == text.size() || (end < text.size() && text[end] != ';' && text[end - 1] != ';')) {
            while (!stmt.empty() && stmt.back() == '.') stmt.pop_back();
            stmt = normalize(stmt);
        }
        if (!stmt.empty()) best = std::move(stmt);
        pos = std::max(end, found + 1);
    }
    return best;
}

std::optional<std::string> find_sql(std::string_view text) {
    if (auto fenced = last_fenced(text)) return fenced;
    return last_prose_statement(text);
}

}  // namespace

Extraction extract_sql(std::string_view raw_text) {
    Extraction out;
    try {
        if (const auto close = raw_text.rfind("</think>"); close != std::string_view::npos) {
            const auto answer = raw_text.substr(close + 8);
            if (!trim(answer).empty()) {
                if (auto sql = find_sql(answer)) {
                    out.sql = std::move(sql);
                    return out;
                }
            }
        }
        if (auto sql = find_sql(raw_text)) {
            out.sql = std::move(sql);
            return out;
        }
        out.error = "no SQL query found in model output";
    } catch (const std::exception& e) {
        out.sql.reset();
        out.error = std::string("extraction failed: ") + e.what();
    }
    return out;
}

}  // namespace sqlagents
