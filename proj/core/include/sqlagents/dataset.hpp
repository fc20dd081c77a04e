#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sqlagents {

enum class Difficulty { simple, moderate, hard, unlabeled };

std::string_view to_string(Difficulty d);
// Accepts "simple", "moderate", "hard"/"challenging" and "unlabeled"/"".
std::optional<Difficulty> parse_difficulty(std::string_view text);

struct Example {
    std::string example_id;
    std::string db_id;
    std::string question;
    std::string gold_sql;
    std::optional<std::string> evidence;
    Difficulty difficulty = Difficulty::unlabeled;

    friend bool operator==(const Example&, const Example&) = default;
};

// Maps benchmark-specific JSON keys onto Example fields. An empty key means
// the source has no such field: example ids fall back to the record index,
// difficulty falls back to unlabeled, evidence to absent.
struct FieldMap {
    std::string example_id = "question_id";
    std::string db_id = "db_id";
    std::string question = "question";
    std::string gold_sql = "SQL";
    std::string evidence = "evidence";
    std::string difficulty = "difficulty";

    static FieldMap bird();
    static FieldMap spider();
    // A preset name ("bird", "spider") or an object overriding keys of the
    // bird preset.
    static FieldMap from_json(const nlohmann::json& j);
};

struct DifficultyHistogram {
    std::array<std::size_t, 4> counts{};

    std::size_t operator[](Difficulty d) const { return counts[static_cast<std::size_t>(d)]; }
    std::size_t total() const;
    friend bool operator==(const DifficultyHistogram&, const DifficultyHistogram&) = default;
};

DifficultyHistogram histogram(std::span<const Example> examples);

std::filesystem::path split_path(const std::filesystem::path& root, std::string_view split_name);

// Reads <root>/<split_name>.json, an array of objects. Records keep file order.
std::vector<Example> load_split(const std::filesystem::path& root, std::string_view split_name,
                                const FieldMap& fields = FieldMap::bird());
std::vector<Example> load_split_file(const std::filesystem::path& file,
                                     const FieldMap& fields = FieldMap::bird());

struct ColumnDef {
    std::string name;
    std::string declared_type;
    std::string affinity;  // INTEGER, TEXT, BLOB, REAL or NUMERIC
    bool not_null = false;

    friend bool operator==(const ColumnDef&, const ColumnDef&) = default;
};

struct ForeignKey {
    std::vector<std::string> from_columns;
    std::string table;
    std::vector<std::string> to_columns;  // empty when the target's primary key is implied

    friend bool operator==(const ForeignKey&, const ForeignKey&) = default;
};

struct TableDef {
    std::string name;
    std::vector<ColumnDef> columns;
    std::vector<std::string> primary_key;
    std::vector<ForeignKey> foreign_keys;
    std::string create_sql;

    friend bool operator==(const TableDef&, const TableDef&) = default;
};

struct SchemaCatalog {
    std::string db_id;
    std::filesystem::path db_path;
    std::vector<TableDef> tables;
    std::string ddl_text;

    const TableDef* find_table(std::string_view name) const;
};

std::filesystem::path database_path(const std::filesystem::path& root, std::string_view db_id);

// Introspects <root>/databases/<db_id>/<db_id>.sqlite.
SchemaCatalog load_schema(const std::filesystem::path& root, std::string_view db_id);
SchemaCatalog load_schema_file(const std::filesystem::path& db_path, std::string db_id);

// CREATE TABLE statements joined by one blank line, in catalog order.
std::string render_ddl(std::span<const TableDef> tables);

// Creates (or replaces) a SQLite file by executing a SQL script. Used to
// materialize fixture databases; benchmark databases are never written.
void build_database(const std::filesystem::path& script, const std::filesystem::path& db_path);

}  // namespace sqlagents
