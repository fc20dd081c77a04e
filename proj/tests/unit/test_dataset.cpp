#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "sqlagents/dataset.hpp"
#include "sqlagents/errors.hpp"
#include "support.hpp"

using namespace sqlagents;
using namespace sqlagents::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path write_split(const TempDir& dir, const json& records, const std::string& name = "dev") {
    const auto file = dir / (name + ".json");
    spit(file, records.dump(2));
    return file;
}

json bird_record(int id, const std::string& db = "db", std::string difficulty = "simple") {
    return {{"question_id", id},         {"db_id", db},         {"question", "q" + std::to_string(id)},
            {"SQL", "SELECT " + std::to_string(id)}, {"evidence", "e"}, {"difficulty", difficulty}};
}

}  // namespace

TEST(Dataset, LoadsDeskSplitInFileOrder) {
    const auto examples = load_split(desk_source(), "dev");
    const auto raw = json::parse(slurp(desk_source() / "dev.json"));
    ASSERT_EQ(examples.size(), raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        EXPECT_EQ(examples[i].example_id, std::to_string(raw[i]["question_id"].get<int>()));
        EXPECT_EQ(examples[i].gold_sql, raw[i]["SQL"].get<std::string>());
        EXPECT_EQ(examples[i].db_id, raw[i]["db_id"].get<std::string>());
    }
}

TEST(Dataset, HistogramMatchesIndependentCount) {
    const auto examples = load_split(desk_source(), "dev");
    std::map<std::string, std::size_t> counts;
    for (const auto& r : json::parse(slurp(desk_source() / "dev.json"))) {
        counts[r["difficulty"].get<std::string>()]++;
    }
    const auto h = histogram(examples);
    EXPECT_EQ(h[Difficulty::simple], counts["simple"]);
    EXPECT_EQ(h[Difficulty::moderate], counts["moderate"]);
    EXPECT_EQ(h[Difficulty::hard], counts["challenging"]);
    EXPECT_EQ(h[Difficulty::unlabeled], 0u);
    EXPECT_EQ(h.total(), examples.size());
}

TEST(Dataset, EmptyEvidenceIsAbsent) {
    TempDir dir;
    auto rec = bird_record(1);
    rec["evidence"] = "";
    const auto ex = load_split_file(write_split(dir, json::array({rec})));
    EXPECT_FALSE(ex[0].evidence.has_value());
    rec["evidence"] = "hint";
    EXPECT_EQ(load_split_file(write_split(dir, json::array({rec})))[0].evidence, "hint");
}

TEST(Dataset, ChallengingMapsToHard) {
    TempDir dir;
    const auto ex = load_split_file(write_split(dir, json::array({bird_record(1, "db", "challenging")})));
    EXPECT_EQ(ex[0].difficulty, Difficulty::hard);
}

TEST(Dataset, SpiderFieldMapUsesIndexIds) {
    TempDir dir;
    json recs = json::array();
    for (int i = 0; i < 3; ++i) {
        recs.push_back({{"db_id", "concert_singer"}, {"question", "q"}, {"query", "SELECT " + std::to_string(i)}});
    }
    const auto ex = load_split_file(write_split(dir, recs), FieldMap::spider());
    ASSERT_EQ(ex.size(), 3u);
    EXPECT_EQ(ex[2].example_id, "2");
    EXPECT_EQ(ex[1].gold_sql, "SELECT 1");
    EXPECT_EQ(ex[0].difficulty, Difficulty::unlabeled);
    EXPECT_FALSE(ex[0].evidence);
}

TEST(Dataset, MissingFieldReportsRecordIndex) {
    TempDir dir;
    auto bad = bird_record(2);
    bad.erase("db_id");
    const auto file = write_split(dir, json::array({bird_record(1), bad}));
    try {
        load_split_file(file);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.record_index(), 1u);
    }
}

TEST(Dataset, EmptyGoldSqlIsRejected) {
    TempDir dir;
    auto rec = bird_record(1);
    rec["SQL"] = "   ";
    EXPECT_THROW(load_split_file(write_split(dir, json::array({rec}))), ParseError);
}

TEST(Dataset, DuplicateIdsAreRejected) {
    TempDir dir;
    EXPECT_THROW(load_split_file(write_split(dir, json::array({bird_record(1), bird_record(1)}))), IntegrityError);
}

TEST(Dataset, MissingOrMalformedFile) {
    TempDir dir;
    EXPECT_THROW(load_split(dir.path(), "nope"), LoadError);
    spit(dir / "bad.json", "[{");
    EXPECT_THROW(load_split(dir.path(), "bad"), LoadError);
    spit(dir / "obj.json", "{}");
    EXPECT_THROW(load_split(dir.path(), "obj"), LoadError);
}

TEST(Dataset, FieldMapFromJson) {
    EXPECT_EQ(FieldMap::from_json("spider").gold_sql, "query");
    const auto m = FieldMap::from_json(json{{"preset", "spider"}, {"gold_sql", "sql"}});
    EXPECT_EQ(m.gold_sql, "sql");
    EXPECT_TRUE(m.example_id.empty());
    EXPECT_THROW(FieldMap::from_json("wikisql"), ConfigError);
    EXPECT_THROW(FieldMap::from_json(json{{"colour", "x"}}), ConfigError);
}

TEST(Schema, IntrospectsTablesColumnsAndKeys) {
    TempDir dir;
    const auto cat = make_db(dir.path(), "shop",
                             "CREATE TABLE customer (id INTEGER PRIMARY KEY, name VARCHAR(40) NOT NULL, score FLOAT);\n"
                             "CREATE TABLE orders (oid INTEGER, cid INTEGER REFERENCES customer (id), total NUMERIC,"
                             " note, PRIMARY KEY (oid, cid));\n");
    ASSERT_EQ(cat.tables.size(), 2u);
    EXPECT_EQ(cat.tables[0].name, "customer");
    EXPECT_EQ(cat.tables[1].name, "orders");
    const auto* c = cat.find_table("customer");
    ASSERT_NE(c, nullptr);
    ASSERT_EQ(c->columns.size(), 3u);
    EXPECT_EQ(c->columns[1].affinity, "TEXT");
    EXPECT_TRUE(c->columns[1].not_null);
    EXPECT_EQ(c->columns[2].affinity, "REAL");
    EXPECT_EQ(c->primary_key, std::vector<std::string>{"id"});
    const auto* o = cat.find_table("orders");
    EXPECT_EQ(o->primary_key, (std::vector<std::string>{"oid", "cid"}));
    EXPECT_EQ(o->columns[2].affinity, "NUMERIC");
    EXPECT_EQ(o->columns[3].affinity, "BLOB");
    ASSERT_EQ(o->foreign_keys.size(), 1u);
    EXPECT_EQ(o->foreign_keys[0].table, "customer");
    EXPECT_EQ(o->foreign_keys[0].from_columns, std::vector<std::string>{"cid"});
    EXPECT_EQ(cat.find_table("nope"), nullptr);
}

TEST(Schema, DdlIsCreateStatementsSeparatedByBlankLine) {
    TempDir dir;
    const auto cat = make_db(dir.path(), "two", "CREATE TABLE a (x INT);\nCREATE TABLE b (y TEXT);\n");
    EXPECT_EQ(cat.ddl_text, "CREATE TABLE a (x INT)\n\nCREATE TABLE b (y TEXT)");
    EXPECT_EQ(render_ddl(cat.tables), cat.ddl_text);
}

TEST(Schema, DanglingForeignKeyIsDropped) {
    TempDir dir;
    const auto cat = make_db(dir.path(), "dangle", "CREATE TABLE a (x INT REFERENCES ghost (id));\n");
    EXPECT_TRUE(cat.tables[0].foreign_keys.empty());
}

TEST(Schema, MissingAndCorruptDatabases) {
    TempDir dir;
    EXPECT_THROW(load_schema(dir.path(), "absent"), NotFoundError);
    spit(database_path(dir.path(), "junk"), std::string(4096, 'x'));
    EXPECT_THROW(load_schema(dir.path(), "junk"), StorageError);
}

TEST(Schema, DeskDatabasesLoad) {
    TempDir dir;
    prepare_desk(dir.path());
    const auto s = load_schema(dir.path(), "school_district");
    EXPECT_EQ(s.tables.size(), 3u);
    const auto m = load_schema(dir.path(), "motor_racing");
    EXPECT_EQ(m.find_table("results")->foreign_keys.size(), 2u);
}
