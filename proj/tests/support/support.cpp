#include "support.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace sqlagents::testing {

fs::path source_dir() { return SQLAGENTS_SOURCE_DIR; }
fs::path desk_source() { return source_dir() / "data" / "desk"; }

TempDir::TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "sqlagents-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void prepare_desk(const fs::path& root) {
    fs::create_directories(root);
    fs::copy_file(desk_source() / "dev.json", root / "dev.json", fs::copy_options::overwrite_existing);
    fs::copy_file(desk_source() / "fixtures.jsonl", root / "fixtures.jsonl", fs::copy_options::overwrite_existing);
    for (const auto& e : fs::directory_iterator(desk_source() / "sql")) {
        const auto db = e.path().stem().string();
        build_database(e.path(), database_path(root, db));
    }
}

SchemaCatalog make_db(const fs::path& root, const std::string& db_id, const std::string& script) {
    const auto sql = root / (db_id + ".sql");
    spit(sql, script);
    build_database(sql, database_path(root, db_id));
    return load_schema(root, db_id);
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    out << text;
}

ResultTable table(std::vector<Row> rows, std::size_t columns) {
    ResultTable t;
    if (columns == 0 && !rows.empty()) columns = rows.front().size();
    for (std::size_t i = 0; i < columns; ++i) t.columns.push_back("c" + std::to_string(i));
    t.rows = std::move(rows);
    return t;
}

}  // namespace sqlagents::testing

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>

namespace sqlagents::testing {

ResultTable table_from_json(const nlohmann::json& rows) {
    ResultTable t;
    std::size_t width = 0;
    for (const auto& r : rows) {
        Row row;
        for (const auto& c : r) {
            if (c.is_null()) row.emplace_back(std::monostate{});
            else if (c.is_number_integer()) row.emplace_back(c.get<std::int64_t>());
            else if (c.is_number_float()) row.emplace_back(c.get<double>());
            else row.emplace_back(c.get<std::string>());
        }
        width = std::max(width, row.size());
        t.rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < width; ++i) t.columns.push_back("c" + std::to_string(i));
    return t;
}

std::vector<LabelledF1> load_soft_f1_corpus() {
    std::vector<LabelledF1> out;
    for (const auto& c : nlohmann::json::parse(slurp(source_dir() / "tests" / "data" / "soft_f1_corpus.json"))) {
        LabelledF1 l{c["name"], table_from_json(c["gold"]), table_from_json(c["pred"]),
                     c["tp"], c["fp"], c["fn"], std::nullopt};
        if (c.contains("f1")) l.f1 = c["f1"].get<double>();
        out.push_back(std::move(l));
    }
    return out;
}

namespace {

Cell random_cell(std::mt19937& rng) {
    switch (rng() % 5) {
        case 0: return std::monostate{};
        case 1:
        case 2: return static_cast<std::int64_t>(rng() % 6);
        case 3: return static_cast<double>(rng() % 6) + 0.5;
        default: return std::string(1, static_cast<char>('a' + rng() % 4));
    }
}

std::string canonical(const Cell& c) {
    if (std::holds_alternative<std::monostate>(c)) return "N";
    if (const auto* i = std::get_if<std::int64_t>(&c)) return "#" + std::to_string(static_cast<double>(*i));
    if (const auto* d = std::get_if<double>(&c)) return "#" + std::to_string(*d);
    if (const auto* s = std::get_if<std::string>(&c)) return "S" + *s;
    const auto& b = std::get<BlobDigest>(c);
    return "B" + std::to_string(b.fnv1a) + ":" + std::to_string(b.size);
}

}  // namespace

std::vector<TablePair> make_table_pairs(unsigned seed, std::size_t n) {
    std::mt19937 rng(seed);
    std::vector<TablePair> out;
    const char* names[] = {"shuffle", "drop-row", "dup-row", "edit-cell", "int-real", "swap-cols",
                           "add-row", "drop-col", "identical", "independent"};
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t cols = 1 + rng() % 3;
        const std::size_t rows = rng() % 6;
        ResultTable g;
        for (std::size_t c = 0; c < cols; ++c) g.columns.push_back("c" + std::to_string(c));
        for (std::size_t r = 0; r < rows; ++r) {
            Row row;
            for (std::size_t c = 0; c < cols; ++c) row.push_back(random_cell(rng));
            g.rows.push_back(row);
        }
        ResultTable p = g;
        const auto kind = k % 10;
        switch (kind) {
            case 0: std::shuffle(p.rows.begin(), p.rows.end(), rng); break;
            case 1: if (!p.rows.empty()) p.rows.erase(p.rows.begin() + static_cast<long>(rng() % p.rows.size())); break;
            case 2: if (!p.rows.empty()) p.rows.push_back(p.rows[rng() % p.rows.size()]); break;
            case 3: if (!p.rows.empty()) p.rows[rng() % p.rows.size()][rng() % cols] = random_cell(rng); break;
            case 4:
                for (auto& row : p.rows) {
                    for (auto& cell : row) {
                        if (auto* i = std::get_if<std::int64_t>(&cell)) cell = static_cast<double>(*i);
                    }
                }
                std::shuffle(p.rows.begin(), p.rows.end(), rng);
                break;
            case 5:
                if (cols > 1) {
                    for (auto& row : p.rows) std::swap(row[0], row[1]);
                }
                break;
            case 6: {
                Row row;
                for (std::size_t c = 0; c < cols; ++c) row.push_back(random_cell(rng));
                p.rows.insert(p.rows.begin() + static_cast<long>(rng() % (p.rows.size() + 1)), row);
                break;
            }
            case 7:
                if (cols > 1) {
                    p.columns.pop_back();
                    for (auto& row : p.rows) row.pop_back();
                }
                break;
            case 8: break;
            default:
                p.rows.clear();
                for (std::size_t r = 0; r < rows; ++r) {
                    Row row;
                    for (std::size_t c = 0; c < cols; ++c) row.push_back(random_cell(rng));
                    p.rows.push_back(row);
                }
        }
        out.push_back({std::move(g), std::move(p), names[kind]});
    }
    return out;
}

int multiset_oracle(const ResultTable& gold, const ResultTable& pred) {
    if (gold.columns.size() != pred.columns.size()) return 0;
    std::map<std::string, long> counts;
    auto key = [](const Row& r) {
        std::string k;
        for (const auto& c : r) k += canonical(c) + "\x1f";
        return k;
    };
    for (const auto& r : gold.rows) counts[key(r)]++;
    for (const auto& r : pred.rows) counts[key(r)]--;
    for (const auto& [_, v] : counts) {
        if (v != 0) return 0;
    }
    return 1;
}

}  // namespace sqlagents::testing
