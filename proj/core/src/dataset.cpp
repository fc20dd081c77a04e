#include "sqlagents/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sqlagents/errors.hpp"
#include "sqlagents/jsonl.hpp"
#include "sqlite_util.hpp"

namespace fs = std::filesystem;

namespace sqlagents {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

// SQLite's column affinity rules, in precedence order.
std::string affinity_of(std::string_view declared) {
    const std::string t = upper(declared);
    auto has = [&](std::string_view needle) { return t.find(needle) != std::string::npos; };
    if (has("INT")) return "INTEGER";
    if (has("CHAR") || has("CLOB") || has("TEXT")) return "TEXT";
    if (t.empty() || has("BLOB")) return "BLOB";
    if (has("REAL") || has("FLOA") || has("DOUB")) return "REAL";
    return "NUMERIC";
}

const nlohmann::json* field(const nlohmann::json& record, const std::string& key) {
    if (key.empty()) return nullptr;
    auto it = record.find(key);
    if (it == record.end() || it->is_null()) return nullptr;
    return &*it;
}

std::string required_string(const nlohmann::json& record, const std::string& key,
                            std::size_t index, std::string_view what) {
    const auto* v = field(record, key);
    if (!v) throw ParseError(index, "missing " + std::string(what) + " field '" + key + "'");
    if (v->is_string()) return v->get<std::string>();
    if (v->is_number_integer()) return std::to_string(v->get<long long>());
    throw ParseError(index, "field '" + key + "' is not a string");
}

detail::StmtPtr prepare(sqlite3* db, const char* sql, const fs::path& path) {
    sqlite3_stmt* raw = nullptr;
    if (sqlite3_prepare_v2(db, sql, -1, &raw, nullptr) != SQLITE_OK) {
        throw StorageError(path.string() + ": " + sqlite3_errmsg(db));
    }
    return detail::StmtPtr(raw);
}

void step_or_throw(sqlite3* db, int rc, const fs::path& path) {
    if (rc != SQLITE_ROW && rc != SQLITE_DONE) {
        throw StorageError(path.string() + ": " + sqlite3_errmsg(db));
    }
}

}  // namespace

std::string_view to_string(Difficulty d) {
    switch (d) {
        case Difficulty::simple: return "simple";
        case Difficulty::moderate: return "moderate";
        case Difficulty::hard: return "hard";
        case Difficulty::unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

std::optional<Difficulty> parse_difficulty(std::string_view text) {
    const auto t = lower(text);
    if (t == "simple") return Difficulty::simple;
    if (t == "moderate") return Difficulty::moderate;
    if (t == "hard" || t == "challenging") return Difficulty::hard;
    if (t == "unlabeled" || t.empty()) return Difficulty::unlabeled;
    return std::nullopt;
}

FieldMap FieldMap::bird() { return FieldMap{}; }

FieldMap FieldMap::spider() {
    FieldMap m;
    m.example_id.clear();
    m.gold_sql = "query";
    m.evidence.clear();
    m.difficulty.clear();
    return m;
}

FieldMap FieldMap::from_json(const nlohmann::json& j) {
    if (j.is_null()) return bird();
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "bird") return bird();
        if (name == "spider") return spider();
        throw ConfigError("unknown field_map preset '" + name + "'");
    }
    if (!j.is_object()) throw ConfigError("dataset.field_map must be a preset name or object");
    FieldMap m = j.contains("preset") ? from_json(j.at("preset")) : bird();
    for (const auto& [key, value] : j.items()) {
        if (key == "preset") continue;
        if (!value.is_string()) throw ConfigError("dataset.field_map." + key + " must be a string");
        auto v = value.get<std::string>();
        if (key == "example_id") m.example_id = v;
        else if (key == "db_id") m.db_id = v;
        else if (key == "question") m.question = v;
        else if (key == "gold_sql") m.gold_sql = v;
        else if (key == "evidence") m.evidence = v;
        else if (key == "difficulty") m.difficulty = v;
        else throw ConfigError("unknown dataset.field_map key '" + key + "'");
    }
    return m;
}

std::size_t DifficultyHistogram::total() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
}

DifficultyHistogram histogram(std::span<const Example> examples) {
    DifficultyHistogram h;
    for (const auto& e : examples) ++h.counts[static_cast<std::size_t>(e.difficulty)];
    return h;
}

fs::path split_path(const fs::path& root, std::string_view split_name) {
    return root / (std::string(split_name) + ".json");
}

std::vector<Example> load_split(const fs::path& root, std::string_view split_name,
                                const FieldMap& fields) {
    return load_split_file(split_path(root, split_name), fields);
}

std::vector<Example> load_split_file(const fs::path& file, const FieldMap& fields) {
    if (!fs::exists(file)) throw LoadError("split file not found: " + file.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(file));
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError(file.string() + ": " + e.what());
    }
    if (!doc.is_array()) throw LoadError(file.string() + ": expected a JSON array of records");

    std::vector<Example> out;
    out.reserve(doc.size());
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& rec = doc[i];
        if (!rec.is_object()) throw ParseError(i, "record is not an object");
        Example ex;
        ex.example_id = fields.example_id.empty()
                            ? std::to_string(i)
                            : required_string(rec, fields.example_id, i, "example id");
        ex.db_id = required_string(rec, fields.db_id, i, "db_id");
        ex.question = required_string(rec, fields.question, i, "question");
        ex.gold_sql = required_string(rec, fields.gold_sql, i, "gold SQL");
        if (ex.gold_sql.find_first_not_of(" \t\r\n") == std::string::npos) {
            throw ParseError(i, "gold SQL is empty");
        }
        if (const auto* ev = field(rec, fields.evidence)) {
            if (!ev->is_string()) throw ParseError(i, "evidence is not a string");
            auto text = ev->get<std::string>();
            if (text.find_first_not_of(" \t\r\n") != std::string::npos) ex.evidence = std::move(text);
        }
        if (!fields.difficulty.empty()) {
            auto label = required_string(rec, fields.difficulty, i, "difficulty");
            auto d = parse_difficulty(label);
            if (!d) throw ParseError(i, "unknown difficulty '" + label + "'");
            ex.difficulty = *d;
        }
        if (!seen.insert(ex.example_id).second) {
            throw IntegrityError(file.string() + ": duplicate example id '" + ex.example_id + "'");
        }
        out.push_back(std::move(ex));
    }
    return out;
}

const TableDef* SchemaCatalog::find_table(std::string_view name) const {
    const auto key = lower(name);
    for (const auto& t : tables) {
        if (lower(t.name) == key) return &t;
    }
    return nullptr;
}

fs::path database_path(const fs::path& root, std::string_view db_id) {
    const std::string id(db_id);
    return root / "databases" / id / (id + ".sqlite");
}

SchemaCatalog load_schema(const fs::path& root, std::string_view db_id) {
    return load_schema_file(database_path(root, db_id), std::string(db_id));
}

SchemaCatalog load_schema_file(const fs::path& db_path, std::string db_id) {
    if (!fs::is_regular_file(db_path)) throw NotFoundError("database not found: " + db_path.string());

    sqlite3* raw = nullptr;
    int rc = sqlite3_open_v2(db_path.c_str(), &raw, SQLITE_OPEN_READONLY, nullptr);
    detail::DbPtr db(raw);
    if (rc != SQLITE_OK) {
        throw StorageError(db_path.string() + ": " + (raw ? sqlite3_errmsg(raw) : "open failed"));
    }

    SchemaCatalog cat;
    cat.db_id = std::move(db_id);
    cat.db_path = db_path;

    auto list = prepare(db.get(),
                        "SELECT name, sql FROM sqlite_master WHERE type = 'table' "
                        "AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' ORDER BY rowid",
                        db_path);
    while ((rc = sqlite3_step(list.get())) == SQLITE_ROW) {
        TableDef t;
        t.name = detail::column_text(list.get(), 0);
        t.create_sql = detail::column_text(list.get(), 1);
        cat.tables.push_back(std::move(t));
    }
    step_or_throw(db.get(), rc, db_path);

    for (auto& t : cat.tables) {
        auto info = prepare(db.get(), "SELECT name, type, \"notnull\", pk FROM pragma_table_info(?1)",
                            db_path);
        sqlite3_bind_text(info.get(), 1, t.name.c_str(), -1, SQLITE_TRANSIENT);
        std::vector<std::pair<int, std::string>> pk;
        while ((rc = sqlite3_step(info.get())) == SQLITE_ROW) {
            ColumnDef c;
            c.name = detail::column_text(info.get(), 0);
            c.declared_type = detail::column_text(info.get(), 1);
            c.affinity = affinity_of(c.declared_type);
            c.not_null = sqlite3_column_int(info.get(), 2) != 0;
            if (int k = sqlite3_column_int(info.get(), 3); k > 0) pk.emplace_back(k, c.name);
            t.columns.push_back(std::move(c));
        }
        step_or_throw(db.get(), rc, db_path);
        std::sort(pk.begin(), pk.end());
        for (auto& [_, name] : pk) t.primary_key.push_back(std::move(name));

        auto fks = prepare(db.get(),
                           "SELECT id, \"table\", \"from\", \"to\" FROM pragma_foreign_key_list(?1) "
                           "ORDER BY id, seq",
                           db_path);
        sqlite3_bind_text(fks.get(), 1, t.name.c_str(), -1, SQLITE_TRANSIENT);
        int current = -1;
        while ((rc = sqlite3_step(fks.get())) == SQLITE_ROW) {
            int id = sqlite3_column_int(fks.get(), 0);
            if (id != current) {
                current = id;
                t.foreign_keys.push_back({{}, detail::column_text(fks.get(), 1), {}});
            }
            auto& fk = t.foreign_keys.back();
            fk.from_columns.push_back(detail::column_text(fks.get(), 2));
            if (sqlite3_column_type(fks.get(), 3) != SQLITE_NULL) {
                fk.to_columns.push_back(detail::column_text(fks.get(), 3));
            }
        }
        step_or_throw(db.get(), rc, db_path);
    }

    // Every kept reference names a table of this catalog.
    for (auto& t : cat.tables) {
        std::erase_if(t.foreign_keys, [&](const ForeignKey& fk) {
            if (cat.find_table(fk.table)) return false;
            spdlog::warn("{}: dropping foreign key {} -> {} (no such table)", cat.db_id, t.name,
                         fk.table);
            return true;
        });
    }

    cat.ddl_text = render_ddl(cat.tables);
    return cat;
}

std::string render_ddl(std::span<const TableDef> tables) {
    std::string out;
    for (const auto& t : tables) {
        if (!out.empty()) out += "\n\n";
        out += t.create_sql;
    }
    return out;
}

void build_database(const fs::path& script, const fs::path& db_path) {
    const auto sql = read_file(script);
    if (db_path.has_parent_path()) fs::create_directories(db_path.parent_path());
    fs::remove(db_path);
    sqlite3* raw = nullptr;
    int rc = sqlite3_open_v2(db_path.c_str(), &raw, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE,
                             nullptr);
    detail::DbPtr db(raw);
    if (rc != SQLITE_OK) throw StorageError("cannot create " + db_path.string());
    sqlite3_exec(db.get(), "PRAGMA synchronous = OFF; PRAGMA journal_mode = MEMORY;", nullptr, nullptr, nullptr);
    char* err = nullptr;
    if (sqlite3_exec(db.get(), sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        throw StorageError(script.string() + ": " + msg);
    }
}

}  // namespace sqlagents
