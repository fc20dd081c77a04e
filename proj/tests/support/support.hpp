#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sqlagents/backend.hpp"
#include "sqlagents/dataset.hpp"
#include "sqlagents/sqlexec.hpp"

namespace sqlagents::testing {

std::filesystem::path source_dir();
std::filesystem::path desk_source();  // data/desk in the source tree

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

// Copies the desk split and fixtures into `root` and builds its databases.
void prepare_desk(const std::filesystem::path& root);

// Builds <root>/databases/<db_id>/<db_id>.sqlite from a script.
SchemaCatalog make_db(const std::filesystem::path& root, const std::string& db_id, const std::string& script);

std::string slurp(const std::filesystem::path& file);
void spit(const std::filesystem::path& file, const std::string& text);

ResultTable table(std::vector<Row> rows, std::size_t columns = 0);

}  // namespace sqlagents::testing

#include <nlohmann/json.hpp>

namespace sqlagents::testing {

// JSON array of rows -> table. Integers, reals, strings and null map to cells.
ResultTable table_from_json(const nlohmann::json& rows);

struct LabelledF1 {
    std::string name;
    ResultTable gold, pred;
    std::size_t tp, fp, fn;
    std::optional<double> f1;
};
std::vector<LabelledF1> load_soft_f1_corpus();

struct TablePair {
    ResultTable gold, pred;
    std::string mutation;
};
// Random gold tables and derived predictions (shuffles, dropped or
// duplicated rows, cell edits, int/real twins, column swaps).
std::vector<TablePair> make_table_pairs(unsigned seed, std::size_t n);

// Multiset equality over canonical row strings.
int multiset_oracle(const ResultTable& gold, const ResultTable& pred);

}  // namespace sqlagents::testing
