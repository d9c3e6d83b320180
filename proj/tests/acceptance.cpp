// Acceptance checks, one PASS/FAIL line per criterion. Exit status is
// nonzero when any line fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "naqsql/executor.hpp"
#include "naqsql/metrics.hpp"
#include "naqsql/retriever.hpp"
#include "naqsql/sqltext.hpp"
#include "support/cases.hpp"
#include "support/env.hpp"
#include "support/oracles.hpp"

using namespace naqsql;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

// Collects failure reasons for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

int failed_criteria = 0;

void report(const std::string& name, const std::function<void(Check&)>& body) {
  Check check;
  try {
    body(check);
  } catch (const std::exception& e) {
    check.failures.push_back(std::string("exception: ") + e.what());
  }
  if (check.failures.empty()) {
    std::cout << "PASS " << name << "\n";
    return;
  }
  ++failed_criteria;
  std::cout << "FAIL " << name << "\n";
  for (std::size_t i = 0; i < check.failures.size() && i < 10; ++i) std::cout << "     - " << check.failures[i] << "\n";
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string quote(const std::string& s) { return "'" + s + "'"; }

int run_cli(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = quote(NAQSQL_CLI) + " " + args + " > " + quote(log.string()) + " 2>&1";
  return std::system(cmd.c_str());
}

bool near(const json& v, double expected) { return v.is_number() && std::abs(v.get<double>() - expected) < 1e-12; }

// --------------------------------------------------------------------------

void metrics_oracle(Check& c) {
  const auto started = Clock::now();
  const auto all = cases::metric_cases();
  c.expect(all.size() >= 30, "fewer than 30 handcrafted pairs");
  std::set<ResultComparison> tiers;
  for (const auto& m : all) {
    tiers.insert(m.expected);
    const auto got = compare_results(m.pred, m.gold);
    c.expect(got == m.expected, m.name + ": got " + to_string(got) + ", labelled " + to_string(m.expected));
    c.expect(got == oracle::compare(m.pred, m.gold), m.name + ": differs from the permutation oracle");
    if (got == ResultComparison::ExactMatch) {
      c.expect(soft_equivalent(std::get<ResultTable>(m.pred), m.gold), m.name + ": exact but not soft");
    }
  }
  c.expect(tiers.size() == 4, "not every tier is represented");

  // Random tables up to six columns against the oracle.
  std::mt19937 rng(424242);
  for (int i = 0; i < 400; ++i) {
    const std::size_t width = 1 + rng() % 6;
    auto make = [&](std::size_t w) {
      ResultTable t;
      for (std::size_t k = 0; k < w; ++k) t.columns.push_back(rng() % 6 == 0 ? "id" : "c" + std::to_string(k));
      const std::size_t rows = rng() % 5;
      for (std::size_t r = 0; r < rows; ++r) {
        std::vector<Cell> row;
        for (std::size_t k = 0; k < w; ++k) {
          const unsigned v = rng() % 4;
          row.push_back(v == 3 ? cases::N() : cases::I(static_cast<std::int64_t>(v)));
        }
        t.rows.push_back(std::move(row));
      }
      return t;
    };
    const ResultTable gold = make(width);
    ResultTable pred = gold;
    if (rng() % 2) {
      std::vector<std::size_t> perm(width);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      ResultTable p;
      for (std::size_t k : perm) p.columns.push_back(gold.columns[k]);
      for (const auto& row : gold.rows) {
        std::vector<Cell> r;
        for (std::size_t k : perm) r.push_back(row[k]);
        p.rows.push_back(std::move(r));
      }
      std::shuffle(p.rows.begin(), p.rows.end(), rng);
      pred = p;
    }
    if (rng() % 3 == 0) pred = make(1 + rng() % 6);
    const auto got = compare_results(pred, gold);
    c.expect(got == oracle::compare(pred, gold), "random pair " + std::to_string(i) + " differs from the oracle");
    if (got == ResultComparison::ExactMatch) c.expect(soft_equivalent(pred, gold), "random exact pair not soft");
  }
  const double elapsed = seconds_since(started);
  c.expect(elapsed < 5.0, "took " + std::to_string(elapsed) + " s");
}

void state_machine(Check& c) {
  testenv::FixtureEnv env;
  std::set<std::size_t> lengths;
  for (const auto& s : testenv::state_machine_scenarios()) {
    const std::string mismatch = testenv::check_scenario(env, s);
    c.expect(mismatch.empty(), s.name + ": " + mismatch);
    if (!s.ui_mode) lengths.insert(s.transcript);
  }
  for (std::size_t n = 1; n <= 5; ++n) {
    c.expect(lengths.count(n) == 1, "no evaluation-mode scenario with transcript length " + std::to_string(n));
  }

  PipelineOptions eval;
  auto run = testenv::run_scripted(env, {"the answer is 42", "SELECT 1;"}, "How many diseases are there?", eval);
  c.expect(run.outcome.reprompts_used == 1 && run.provider->call_count() == 2 &&
               std::holds_alternative<Executed>(run.outcome.verdict),
           "re-prompt example");
  run = testenv::run_scripted(
      env, {"SELECT * FROM nope;", "SELECT * FROM nope2;", "SELECT * FROM nope3;", "SELECT * FROM nope4;", "SELECT 1"},
      "How many diseases are there?", eval);
  c.expect(std::holds_alternative<DbFailed>(run.outcome.verdict) && run.outcome.corrections_used == 3 &&
               run.outcome.transcript.size() == 4 && run.provider->call_count() == 4,
           "correction budget example");
  run = testenv::run_scripted(env, {"unanswerable question", "SELECT 1"}, "Why?", eval);
  c.expect(std::holds_alternative<Abstained>(run.outcome.verdict) && run.provider->call_count() == 1,
           "abstention short-circuit");
}

void retriever_oracle(Check& c) {
  auto cosine = [](Vector a, Vector b) { return cosine_similarity(a, b); };
  c.expect(std::abs(cosine({1, 0}, {1, 0}) - 1.0) < 1e-6, "cosine([1,0],[1,0])");
  c.expect(std::abs(cosine({1, 0}, {0, 1})) < 1e-6, "cosine([1,0],[0,1])");
  c.expect(std::abs(cosine({1, 2, 3}, {4, 5, 6}) - 0.9746318) < 1e-6, "cosine([1,2,3],[4,5,6])");

  std::mt19937 rng(8128);
  std::uniform_real_distribution<double> u(-1, 1);
  int mismatches = 0;
  for (int s = 0; s < 200; ++s) {
    const std::size_t dim = 2 + rng() % 15;
    const std::size_t n = 1 + rng() % 64;
    std::vector<EmbeddedExample> entries;
    std::vector<oracle::Entry> mirror;
    for (std::size_t i = 0; i < n; ++i) {
      Vector v(dim);
      if (i > 0 && rng() % 6 == 0) {
        v = mirror[rng() % i].vector;
      } else {
        for (auto& x : v) x = u(rng);
        v[0] += 2.0;
      }
      const std::string id = "x" + std::to_string(i);
      entries.push_back({QuestionItem{id, "q" + id, Label::Unanswerable, std::nullopt, NaqCategory::NonSql}, v});
      mirror.push_back({id, v});
    }
    const ExampleStore store(Label::Unanswerable, entries);
    Vector query(dim);
    for (auto& x : query) x = u(rng);
    const std::size_t k = rng() % (n + 2);
    const std::optional<std::string> exclude =
        rng() % 2 ? std::optional<std::string>(mirror[rng() % n].id) : std::nullopt;
    std::vector<std::string> got;
    for (const auto& item : top_k_similar(query, store, k, exclude)) got.push_back(item.id);
    if (got != oracle::top_k(query, mirror, k, exclude)) ++mismatches;
    if (exclude && std::find(got.begin(), got.end(), *exclude) != got.end()) ++mismatches;
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " of 200 stores disagree with the brute-force ranking");
}

void normalization(Check& c) {
  c.expect(sql_exact_match("SELECT  name FROM gene;", "select name from gene"), "exact-match example 1");
  c.expect(!sql_exact_match("select name from gene", "select symbol from gene"), "exact-match example 2");
  c.expect(!sql_exact_match("select count(*) from gene", "select count( * ) from gene"), "exact-match example 3");
  for (const auto& sql : cases::fixture_sql_corpus()) {
    const std::string once = normalize_sql(sql);
    c.expect(normalize_sql(once) == once, "not idempotent: " + sql);
  }
  const auto all = cases::classify_cases();
  c.expect(all.size() >= 20, "fewer than 20 classification fixtures");
  for (const auto& k : all) {
    const ModelOutputClass got = classify_output(k.raw);
    bool ok = false;
    switch (k.expected) {
      case cases::Kind::Sql: {
        const auto* s = std::get_if<SqlCandidate>(&got);
        ok = s != nullptr && s->sql == k.sql;
        break;
      }
      case cases::Kind::Abstain: ok = std::holds_alternative<Abstention>(got); break;
      case cases::Kind::Unusable: ok = std::holds_alternative<UnusableOutput>(got); break;
    }
    c.expect(ok, "classification: " + k.name);
  }
}

std::string evaluate_args(const std::filesystem::path& out) {
  return "evaluate --settings " + quote(testenv::fixture("settings.json").string()) + " --dataset " +
         quote(testenv::fixture("dev.json").string()) + " --naq " + quote(testenv::fixture("naq.json").string()) +
         " --out " + quote(out.string());
}

void end_to_end(Check& c, const testenv::TempDir& dir) {
  const auto started = Clock::now();
  const auto first = dir.path / "run1" / "report.json";
  const auto second = dir.path / "run2" / "report.json";
  c.expect(run_cli(evaluate_args(first), dir.path / "run1.log") == 0, "first evaluate run failed");
  c.expect(run_cli(evaluate_args(second), dir.path / "run2.log") == 0, "second evaluate run failed");
  const double elapsed = seconds_since(started);
  c.expect(elapsed < 120.0, "two runs took " + std::to_string(elapsed) + " s");
  if (!c.failures.empty()) return;

  const json report = json::parse(testenv::read_file(first));
  const json& a = report.at("aggregates");
  c.expect(a.at("answerable") == 10 && a.at("unanswerable") == 16, "item counts");
  c.expect(near(a.at("sql_exact_match_acc"), 0.3), "sql_exact_match_acc != 0.3");
  c.expect(near(a.at("result_acc_exact"), 0.4), "result_acc_exact != 0.4");
  c.expect(near(a.at("result_acc_soft"), 0.6), "result_acc_soft != 0.6");
  c.expect(near(a.at("db_error_rate"), 1.0 / 9.0), "db_error_rate != 1/9");
  c.expect(near(a.at("false_abstention_rate_on_answerable"), 0.1), "false abstention rate != 0.1");
  c.expect(near(a.at("naq_detection_acc"), 1.0), "naq_detection_acc != 1.0");
  c.expect(a.at("naq_detection_by_category").size() == 8, "expected 8 categories");
  for (const auto& [cat, acc] : a.at("naq_detection_by_category").items()) {
    c.expect(near(acc, 1.0), cat + " accuracy != 1.0");
    c.expect(a.at("naq_count_by_category").at(cat) == 2, cat + " count != 2");
  }
  c.expect(report.at("infra_failures").empty(), "unexpected infra failures");

  c.expect(testenv::read_file(first) == testenv::read_file(second), "report JSON differs between runs");
  c.expect(testenv::read_file(csv_path_for(first)) == testenv::read_file(csv_path_for(second)),
           "report CSV differs between runs");
  // Each run was timed together above; one run must fit in 60 s.
  c.expect(elapsed / 2 < 60.0, "a single run took over 60 s");
}

void safety(Check& c, const testenv::TempDir& dir) {
  const auto db = dir.path / "safety" / "oncomx.db";
  std::filesystem::create_directories(db.parent_path());
  materialize_dump(testenv::fixture("oncomx_mini.sql"), db);
  const std::string before = testenv::read_file(db);
  const auto size_before = std::hash<std::string>{}(before);

  const auto out = dir.path / "safety" / "report.json";
  c.expect(run_cli(evaluate_args(out) + " --db " + quote("sqlite:" + db.string()), dir.path / "safety.log") == 0,
           "evaluate against the database file failed");
  {
    SqliteExecutor ex("sqlite:" + db.string());
    for (const char* sql : {"DELETE FROM disease", "DROP TABLE disease", "UPDATE disease SET name = 'x'",
                            "INSERT INTO disease VALUES (99, 'x')", "CREATE TABLE t (a)", "PRAGMA user_version = 7"}) {
      c.expect(std::holds_alternative<ExecError>(ex.execute_sql(sql)), std::string("write accepted: ") + sql);
    }
  }
  const std::string after = testenv::read_file(db);
  c.expect(before == after, "database bytes changed (hash " + std::to_string(size_before) + " -> " +
                                std::to_string(std::hash<std::string>{}(after)) + ")");
  std::set<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(db.parent_path())) files.insert(e.path().filename());
  c.expect(!files.count("oncomx.db-wal") && !files.count("oncomx.db-journal"), "journal files left beside the database");
}

// Live runs need a model endpoint and the full database, so only the report
// shape is checked here: two regimes through the multi-config path, each
// report carrying every accuracy and the per-category breakdown.
void live_mode_schema(Check& c, const testenv::TempDir& dir) {
  const json script = json::parse(testenv::read_file(testenv::fixture("scripted_desk_run.json")));
  json doubled = script;
  for (const auto& r : script) doubled.push_back(r);
  const auto script_path = dir.path / "live" / "script.json";
  std::filesystem::create_directories(script_path.parent_path());
  std::ofstream(script_path) << doubled.dump();

  const auto out = dir.path / "live" / "report.json";
  const std::string args = evaluate_args(out) + " --llm " + quote("scripted:" + script_path.string()) +
                           " --config nar+both3 --config nar";
  c.expect(run_cli(args, dir.path / "live.log") == 0, "multi-regime evaluate failed");
  if (!c.failures.empty()) return;
  const json summary = json::parse(testenv::read_file(dir.path / "live" / "report.summary.json"));
  c.expect(summary.contains("nar+both3") && summary.contains("nar"), "summary lacks a regime");
  for (const char* file : {"report.nar_both3.json", "report.nar.json"}) {
    const auto path = dir.path / "live" / file;
    if (!std::filesystem::exists(path)) {
      c.expect(false, std::string("missing ") + file);
      continue;
    }
    const json r = json::parse(testenv::read_file(path));
    c.expect(r.at("schema_version") == 1, std::string(file) + ": schema_version");
    for (const char* key : {"sql_exact_match_acc", "result_acc_exact", "result_acc_soft", "db_error_rate",
                            "naq_detection_acc", "false_abstention_rate_on_answerable"}) {
      c.expect(r.at("aggregates").at(key).is_number(), std::string(file) + ": " + key);
    }
    c.expect(r.at("aggregates").at("naq_detection_by_category").size() == 8, std::string(file) + ": categories");
    c.expect(r.at("config").contains("regime"), std::string(file) + ": regime echo");
  }
}

}  // namespace

int main() {
  testenv::TempDir dir;
  report("Metrics oracle suite (handcrafted pairs, permutation oracle, tier ordering, < 5 s)", metrics_oracle);
  report("State-machine suite (re-prompt, correction budget, short-circuit, call budget)", state_machine);
  report("Retriever oracle (200 random stores, leave-one-out, cosine hand values)", retriever_oracle);
  report("Normalization suite (idempotence, exact-match examples, output classification)", normalization);
  report("End-to-end desk run (hand-computed aggregates, byte-identical reports, < 60 s)",
         [&](Check& c) { end_to_end(c, dir); });
  report("Safety (database bytes unchanged after a full evaluation)", [&](Check& c) { safety(c, dir); });
  report("Live mode report schema (offline shape check; no live endpoint was contacted)",
         [&](Check& c) { live_mode_schema(c, dir); });
  std::cout << (failed_criteria == 0 ? "all criteria passed" : std::to_string(failed_criteria) + " criteria failed")
            << "\n";
  return failed_criteria == 0 ? 0 : 1;
}
