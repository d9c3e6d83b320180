#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "naqsql/dataset.hpp"
#include "naqsql/error.hpp"
#include "naqsql/evaluation.hpp"
#include "naqsql/metrics.hpp"
#include "naqsql/pipeline.hpp"
#include "naqsql/runtime.hpp"
#include "naqsql/service.hpp"

using namespace naqsql;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string settings;
  std::string schema;
  std::string db;
  std::string llm;
  std::string model;
  std::string embeddings;
  std::string seed_pool;
  std::string naq_pool;
};

struct RegimeFlags {
  bool nar = false;
  int shots = -1;
  std::string examples;
  bool no_correction = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--settings", f.settings, "JSON settings file");
  app->add_option("--schema", f.schema, "schema JSON (overrides settings)");
  app->add_option("--db", f.db, "database connection: sqlite:<file>, sqlite-dump:<file> or <dump>.sql");
  app->add_option("--llm", f.llm, "chat endpoint URL or scripted:<responses.json>");
  app->add_option("--model", f.model, "model name");
  app->add_option("--embeddings", f.embeddings, "offline embeddings JSON");
  app->add_option("--seed-pool", f.seed_pool, "answerable few-shot pool");
  app->add_option("--naq-pool", f.naq_pool, "unanswerable few-shot pool");
}

void add_regime(CLI::App* app, RegimeFlags& f) {
  app->add_flag("--nar", f.nar, "include the no-answer rules");
  app->add_option("--shots", f.shots, "examples per pool")->check(CLI::IsMember({0, 1, 3, 5}));
  app->add_option("--examples", f.examples, "example pools")->check(CLI::IsMember({"none", "aq", "naq", "both"}));
  app->add_flag("--no-correction", f.no_correction, "disable the correction loop");
}

Settings resolve_settings(const CommonFlags& f) {
  Settings s;
  if (!f.settings.empty()) {
    s = load_settings(f.settings);
  } else {
    if (f.schema.empty() || f.db.empty()) throw ConfigError("either --settings or both --schema and --db are required");
  }
  if (!f.schema.empty()) s.schema = f.schema;
  if (!f.db.empty()) s.database = f.db;
  if (!f.llm.empty()) s.llm = f.llm;
  if (!f.model.empty()) s.model = f.model;
  if (!f.embeddings.empty()) {
    s.embeddings_file = f.embeddings;
    s.embeddings_endpoint.reset();
  }
  if (!f.seed_pool.empty()) s.seed_pool = f.seed_pool;
  if (!f.naq_pool.empty()) s.naq_pool = f.naq_pool;
  return s;
}

PromptConfig apply_regime(PromptConfig base, const RegimeFlags& f) {
  if (f.nar) base.include_nar = true;
  if (f.shots >= 0) base.shots = f.shots;
  if (!f.examples.empty()) base.set_selection(example_selection_from_string(f.examples));
  base.validate();
  return base;
}

bool is_scripted(const Settings& s) { return s.llm.rfind("scripted:", 0) == 0; }

std::string embedding_source(const Settings& s) {
  if (s.embeddings_file) return "offline:" + s.embeddings_file->filename().string();
  if (s.embeddings_endpoint) return "http:" + s.embeddings_model;
  return "none";
}

std::string llm_source(const Settings& s) { return is_scripted(s) ? "scripted" : s.llm; }

void print_table(const ResultTable& table, std::size_t cap) {
  for (std::size_t c = 0; c < table.columns.size(); ++c) std::cout << (c ? " | " : "") << table.columns[c];
  std::cout << "\n";
  const std::size_t shown = std::min(cap, table.rows.size());
  for (std::size_t r = 0; r < shown; ++r) {
    for (std::size_t c = 0; c < table.rows[r].size(); ++c) {
      std::cout << (c ? " | " : "") << cell_to_string(table.rows[r][c]);
    }
    std::cout << "\n";
  }
  if (shown < table.rows.size() || table.truncated) {
    std::cout << "(" << shown << " of " << table.rows.size() << (table.truncated ? "+" : "") << " rows shown)\n";
  }
}

std::filesystem::path regime_report_path(const std::filesystem::path& out, const std::string& regime) {
  std::filesystem::path p = out;
  const std::string ext = p.has_extension() ? p.extension().string() : ".json";
  p.replace_extension();
  std::string tag = regime;
  for (char& ch : tag) {
    if (ch == '+') ch = '_';
  }
  return p.string() + "." + tag + ext;
}

json summary_row(const EvalReport& report) {
  const auto& a = report.aggregates;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"sql_exact_match_acc", opt(a.sql_exact_match_acc)},
          {"result_acc_exact", opt(a.result_acc_exact)},
          {"result_acc_soft", opt(a.result_acc_soft)},
          {"db_error_rate", opt(a.db_error_rate)},
          {"naq_detection_acc", opt(a.naq_detection_acc)},
          {"naq_detection_by_category", a.naq_detection_by_category},
          {"false_abstention_rate_on_answerable", opt(a.false_abstention_rate_on_answerable)},
          {"infra_failures", report.infra_failures.size()}};
}

int cmd_evaluate(const CommonFlags& common, const RegimeFlags& regime_flags, const std::vector<std::string>& configs,
                 const std::string& dataset, const std::string& naq, const std::string& gold_path,
                 const std::string& out, std::size_t jobs) {
  Settings settings = resolve_settings(common);
  Runtime runtime(settings);

  std::vector<QuestionItem> items;
  if (!dataset.empty()) items = load_questions(dataset);
  if (!naq.empty()) {
    auto more = load_questions(naq);
    items.insert(items.end(), more.begin(), more.end());
  }
  if (items.empty()) throw ConfigError("nothing to evaluate: pass --dataset and/or --naq");

  const GoldResultCache gold =
      gold_path.empty() ? build_gold_cache(items, runtime.executor(), settings.limits) : load_gold_cache(gold_path);

  std::vector<PromptConfig> regimes;
  if (configs.empty()) {
    regimes.push_back(apply_regime(settings.prompt, regime_flags));
  } else {
    for (const auto& name : configs) {
      PromptConfig c = parse_regime(name);
      c.dialect = settings.prompt.dialect;
      regimes.push_back(c);
    }
  }

  EvaluationRun run;
  run.options.correction_loop = settings.correction_loop && !regime_flags.no_correction;
  run.options.limits = settings.limits;
  run.jobs = is_scripted(settings) ? 1 : jobs;

  json summary = json::object();
  for (const auto& prompt : regimes) {
    run.prompt = prompt;
    json config = evaluation_config(run, runtime.llm().default_model(), llm_source(settings), embedding_source(settings));
    EvaluationResult result = run_evaluation(items, gold, runtime.context(), run, std::move(config));
    const std::filesystem::path path = regimes.size() == 1 ? std::filesystem::path(out)
                                                           : regime_report_path(out, regime_name(prompt));
    write_report(result.report, path);
    write_transcripts(result.runs, transcripts_path_for(path));
    summary[regime_name(prompt)] = summary_row(result.report);
    std::cout << regime_name(prompt) << ": wrote " << path.string() << "\n";
  }
  if (regimes.size() > 1) {
    std::filesystem::path p = out;
    p.replace_extension(".summary.json");
    std::ofstream s(p, std::ios::binary | std::ios::trunc);
    s << summary.dump(2) << "\n";
    if (!s) throw IoError("cannot write " + p.string());
    std::cout << "summary: " << p.string() << "\n";
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_ask(const CommonFlags& common, const RegimeFlags& regime_flags, const std::string& question, bool ui_mode) {
  Settings settings = resolve_settings(common);
  Runtime runtime(settings);
  PipelineOptions options;
  options.correction_loop = settings.correction_loop && !regime_flags.no_correction;
  options.ui_mode = ui_mode;
  options.limits = settings.limits;
  const PromptConfig config = apply_regime(settings.prompt, regime_flags);
  const PipelineOutcome outcome = answer_question(question, std::nullopt, runtime.context(), config, options);

  std::cout << "verdict: " << verdict_name(outcome.verdict) << "\n";
  if (auto sql = verdict_sql(outcome.verdict)) std::cout << "sql: " << *sql << "\n";
  if (const auto* executed = std::get_if<Executed>(&outcome.verdict)) {
    print_table(executed->table, 20);
  } else if (const auto* failed = std::get_if<DbFailed>(&outcome.verdict)) {
    std::cout << "error: " << failed->error.message << "\n";
  } else if (const auto* abstained = std::get_if<Abstained>(&outcome.verdict)) {
    std::cout << "model output: " << abstained->raw_output << "\n";
  }
  if (outcome.short_answer) std::cout << "answer: " << *outcome.short_answer << "\n";
  if (outcome.explanation) std::cout << "explanation: " << *outcome.explanation << "\n";
  if (outcome.enrichment_error) std::cout << "enrichment failed: " << *outcome.enrichment_error << "\n";

  const std::filesystem::path dir = settings.transcripts_dir.value_or("transcripts");
  std::filesystem::create_directories(dir);
  const auto stamp = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
  const std::filesystem::path path = dir / ("ask-" + std::to_string(stamp) + ".json");
  std::ofstream t(path, std::ios::binary | std::ios::trunc);
  t << outcome_to_json(outcome).dump(2) << "\n";
  if (!t) throw IoError("cannot write transcript " + path.string());
  std::cout << "transcript: " << path.string() << "\n";
  return 0;
}

int cmd_build_cache(const CommonFlags& common, const std::vector<std::string>& datasets, const std::string& out) {
  Settings settings = resolve_settings(common);
  Runtime runtime(settings);
  std::vector<QuestionItem> items;
  for (const auto& d : datasets) {
    auto more = load_questions(d);
    items.insert(items.end(), more.begin(), more.end());
  }
  const GoldResultCache cache = build_gold_cache(items, runtime.executor(), settings.limits);
  write_gold_cache(cache, out);
  std::size_t errors = 0;
  for (const auto& [id, entry] : cache) errors += entry.error ? 1 : 0;
  std::cout << "cached " << cache.size() << " gold result(s), " << errors << " error(s) -> " << out << "\n";
  return 0;
}

int cmd_generate_naq(const CommonFlags& common, const std::vector<std::string>& categories, std::size_t n,
                     bool review, const std::string& out) {
  Settings settings = resolve_settings(common);
  Runtime runtime(settings);
  std::vector<NaqCategory> wanted;
  if (categories.empty()) {
    wanted.assign(kAllNaqCategories.begin(), kAllNaqCategories.end());
  } else {
    for (const auto& c : categories) wanted.push_back(naq_category_from_string(c));
  }
  std::vector<QuestionItem> items;
  for (NaqCategory category : wanted) {
    const NaqCandidates candidates = generate_naq_candidates(runtime.schema(), category, n, runtime.llm());
    if (review) std::cout << "## " << to_string(category) << " (requires human curation)\n";
    for (std::size_t i = 0; i < candidates.questions.size(); ++i) {
      if (review) std::cout << "  " << (i + 1) << ". " << candidates.questions[i] << "\n";
      QuestionItem item;
      item.id = "naq-gen-" + std::string(to_string(category)) + "-" + std::to_string(i + 1);
      item.question = candidates.questions[i];
      item.label = Label::Unanswerable;
      item.category = category;
      items.push_back(std::move(item));
    }
  }
  const std::string doc = serialize_questions(items).dump(2) + "\n";
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    f << doc;
    if (!f) throw IoError("cannot write " + out);
    std::cout << "wrote " << items.size() << " candidate(s) to " << out << "\n";
  } else if (!review) {
    std::cout << doc;
  }
  return 0;
}

int cmd_serve(const CommonFlags& common, const std::string& host, int port, const std::string& static_dir) {
  Settings settings = resolve_settings(common);
  if (!static_dir.empty()) settings.static_dir = static_dir;
  Runtime runtime(settings);
  Service service(runtime);
  std::cout << "listening on http://" << host << ":" << port << std::endl;
  serve(service, host, port, settings.static_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"naqsql: abstention-aware natural language to SQL"};
  app.require_subcommand(1);

  CommonFlags common;
  RegimeFlags regime;

  auto* evaluate = app.add_subcommand("evaluate", "run the pipeline over datasets and write reports");
  add_common(evaluate, common);
  add_regime(evaluate, regime);
  std::vector<std::string> configs;
  std::string dataset, naq, gold, out = "report.json";
  std::size_t jobs = 4;
  evaluate->add_option("--config", configs, "regime name, e.g. nar+both5 (repeatable)");
  evaluate->add_option("--dataset", dataset, "answerable questions JSON");
  evaluate->add_option("--naq", naq, "unanswerable questions JSON");
  evaluate->add_option("--gold", gold, "gold cache JSON (built on the fly when omitted)");
  evaluate->add_option("--out", out, "report path");
  evaluate->add_option("--jobs", jobs, "questions in flight")->check(CLI::PositiveNumber);

  auto* ask = app.add_subcommand("ask", "answer one question");
  add_common(ask, common);
  add_regime(ask, regime);
  std::string question;
  bool ui_mode = false;
  ask->add_option("question", question, "natural language question")->required();
  ask->add_flag("--ui-mode", ui_mode, "add explanation / short answer calls");

  auto* build_cache = app.add_subcommand("build-cache", "execute gold SQL and store the results");
  add_common(build_cache, common);
  std::vector<std::string> cache_datasets;
  std::string cache_out = "gold_cache.json";
  build_cache->add_option("--dataset", cache_datasets, "questions JSON (repeatable)")->required();
  build_cache->add_option("--out", cache_out, "cache path");

  auto* generate = app.add_subcommand("generate-naq", "ask the model for unanswerable question candidates");
  add_common(generate, common);
  std::vector<std::string> categories;
  std::size_t count = 5;
  bool review = false;
  std::string gen_out;
  generate->add_option("--category", categories, "category name (repeatable; default all)");
  generate->add_option("-n,--count", count, "candidates per category")->check(CLI::PositiveNumber);
  generate->add_flag("--review", review, "print candidates for manual curation");
  generate->add_option("--out", gen_out, "write candidates as a questions JSON file");

  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP API");
  add_common(serve_cmd, common);
  std::string host = "127.0.0.1", static_dir;
  int port = 8080;
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_option("--port", port, "port");
  serve_cmd->add_option("--static", static_dir, "directory with the web console build");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*evaluate) return cmd_evaluate(common, regime, configs, dataset, naq, gold, out, jobs);
    if (*ask) return cmd_ask(common, regime, question, ui_mode);
    if (*build_cache) return cmd_build_cache(common, cache_datasets, cache_out);
    if (*generate) return cmd_generate_naq(common, categories, count, review, gen_out);
    if (*serve_cmd) return cmd_serve(common, host, port, static_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
