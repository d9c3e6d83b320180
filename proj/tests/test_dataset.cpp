#include <doctest.h>

#include <fstream>

#include "naqsql/dataset.hpp"
#include "naqsql/error.hpp"
#include "naqsql/llm.hpp"
#include "support/env.hpp"

using namespace naqsql;
using nlohmann::json;

namespace {

std::filesystem::path write_json(const testenv::TempDir& dir, const std::string& name, const json& doc) {
  const auto path = dir.path / name;
  std::ofstream(path) << doc.dump();
  return path;
}

QuestionItem answerable(const std::string& id, const std::string& sql) {
  return QuestionItem{id, "question " + id, Label::Answerable, sql, std::nullopt};
}

}  // namespace

TEST_CASE("NAQ fixture loads with labels and categories") {
  const auto items = load_questions(testenv::fixture("naq.json"));
  CHECK(items.size() == 16);
  const auto it = std::find_if(items.begin(), items.end(), [](const QuestionItem& q) {
    return q.question == "Why does the TP53 gene cause cancer in some patients but not in others?";
  });
  REQUIRE(it != items.end());
  CHECK(it->label == Label::Unanswerable);
  CHECK(it->category == NaqCategory::NonSql);
  for (NaqCategory c : kAllNaqCategories) {
    CHECK(std::count_if(items.begin(), items.end(), [c](const QuestionItem& q) { return q.category == c; }) == 2);
  }
}

TEST_CASE("answerable item without gold SQL is rejected") {
  testenv::TempDir dir;
  const auto path = write_json(
      dir, "a.json", json::array({{{"id", "q1"}, {"question", "How many?"}, {"label", "answerable"}}}));
  CHECK_THROWS_AS(load_questions(path), ValidationError);
}

TEST_CASE("unknown category lists the legal names") {
  testenv::TempDir dir;
  const auto path = write_json(dir, "c.json",
                               json::array({{{"id", "q1"},
                                             {"question", "Why?"},
                                             {"label", "unanswerable"},
                                             {"gold_sql", nullptr},
                                             {"category", "Weird"}}}));
  try {
    load_questions(path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    for (NaqCategory c : kAllNaqCategories) CHECK(msg.find(std::string(to_string(c))) != std::string::npos);
  }
}

TEST_CASE("dataset parsing errors") {
  testenv::TempDir dir;
  CHECK_THROWS_AS(load_questions(dir.path / "missing.json"), IoError);
  std::ofstream(dir.path / "bad.json") << "[{";
  CHECK_THROWS_AS(load_questions(dir.path / "bad.json"), ParseError);
  CHECK_THROWS_AS(parse_questions(json::object()), ParseError);
  const json dup = json::array({item_to_json(answerable("a", "SELECT 1")), item_to_json(answerable("a", "SELECT 2"))});
  CHECK_THROWS_AS(parse_questions(dup), ValidationError);
  const json bad_label = json::array({{{"id", "x"}, {"question", "q"}, {"label", "maybe"}}});
  CHECK_THROWS_AS(parse_questions(bad_label), ValidationError);
}

TEST_CASE("questions round-trip") {
  const auto items = load_questions(testenv::fixture("dev.json"));
  CHECK(parse_questions(serialize_questions(items)) == items);
}

TEST_CASE("gold cache skips unanswerable items") {
  SqliteExecutor ex("sqlite-dump:" + testenv::fixture("oncomx_mini.sql").string());
  std::vector<QuestionItem> items = {answerable("a1", "SELECT count(*) FROM disease"),
                                     answerable("a2", "SELECT name FROM disease ORDER BY id"),
                                     QuestionItem{"n1", "Why?", Label::Unanswerable, std::nullopt, NaqCategory::NonSql}};
  const GoldResultCache cache = build_gold_cache(items, ex);
  CHECK(cache.size() == 2);
  CHECK(cache.count("n1") == 0);
  REQUIRE(cache.at("a1").table);
  CHECK(cache.at("a1").table->rows[0][0] == Cell{std::int64_t{6}});
}

TEST_CASE("gold SQL against a missing table is recorded, not fatal") {
  SqliteExecutor ex("sqlite-dump:" + testenv::fixture("oncomx_mini.sql").string());
  const GoldResultCache cache = build_gold_cache({answerable("a1", "SELECT * FROM gene")}, ex);
  REQUIRE(cache.size() == 1);
  CHECK_FALSE(cache.at("a1").table.has_value());
  REQUIRE(cache.at("a1").error.has_value());
  CHECK(cache.at("a1").error->find("gene") != std::string::npos);
}

TEST_CASE("gold cache file is byte-identical on rebuild and round-trips") {
  testenv::TempDir dir;
  const auto items = load_questions(testenv::fixture("dev.json"));
  std::string first;
  for (int run = 0; run < 2; ++run) {
    SqliteExecutor ex("sqlite-dump:" + testenv::fixture("oncomx_mini.sql").string());
    const auto path = dir.path / ("gold" + std::to_string(run) + ".json");
    write_gold_cache(build_gold_cache(items, ex), path);
    if (run == 0) {
      first = testenv::read_file(path);
      CHECK(load_gold_cache(path) == build_gold_cache(items, ex));
    } else {
      CHECK(testenv::read_file(path) == first);
    }
  }
  const json doc = json::parse(first);
  CHECK(doc.size() == 10);
  CHECK(doc["dev-01"]["error"].is_null());
  CHECK(doc["dev-01"]["columns"] == json::array({"count(*)"}));
}

TEST_CASE("NAQ candidate generation") {
  const SchemaModel schema = load_schema(testenv::fixture("oncomx_mini.schema.json"));

  SUBCASE("three lines give three candidates") {
    LlmClient llm(std::make_shared<ScriptedProvider>(
        std::vector<std::string>{"1. What is the protein mass of KRAS?\n2. Which drugs target EGFR?\n"
                                 "- Where is the clinical trial registry?"}));
    const auto out = generate_naq_candidates(schema, NaqCategory::ColumnsMissing, 3, llm);
    CHECK(out.questions == std::vector<std::string>{"What is the protein mass of KRAS?", "Which drugs target EGFR?",
                                                    "Where is the clinical trial registry?"});
    CHECK(out.requires_human_curation);
    CHECK(out.category == NaqCategory::ColumnsMissing);
  }
  SUBCASE("duplicates collapse") {
    LlmClient llm(std::make_shared<ScriptedProvider>(
        std::vector<std::string>{"Which drugs target EGFR?\nwhich drugs target EGFR?"}));
    CHECK(generate_naq_candidates(schema, NaqCategory::ColumnsMissing, 3, llm).questions.size() == 1);
  }
  SUBCASE("empty output") {
    LlmClient llm(std::make_shared<ScriptedProvider>(std::vector<std::string>{""}));
    CHECK_THROWS_AS(generate_naq_candidates(schema, NaqCategory::ColumnsMissing, 3, llm), EmptyGeneration);
  }
  SUBCASE("prompt names the category and carries the schema") {
    const std::string prompt = naq_generation_prompt(schema, NaqCategory::ValuesMissing, 4);
    CHECK(prompt.find(render_schema_prompt(schema)) != std::string::npos);
    CHECK(prompt.find(std::string(category_definition(NaqCategory::ValuesMissing))) != std::string::npos);
  }
}
