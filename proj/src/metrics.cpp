#include "naqsql/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "naqsql/error.hpp"
#include "naqsql/schema.hpp"
#include "naqsql/sqltext.hpp"

namespace naqsql {

using nlohmann::json;

std::string to_string(ResultComparison comparison) {
  switch (comparison) {
    case ResultComparison::ExactMatch: return "exact_match";
    case ResultComparison::SoftCorrect: return "soft_correct";
    case ResultComparison::Incorrect: return "incorrect";
    case ResultComparison::DbError: return "db_error";
  }
  return "incorrect";
}

ResultComparison result_comparison_from_string(const std::string& name) {
  if (name == "exact_match") return ResultComparison::ExactMatch;
  if (name == "soft_correct") return ResultComparison::SoftCorrect;
  if (name == "incorrect") return ResultComparison::Incorrect;
  if (name == "db_error") return ResultComparison::DbError;
  throw ParseError("unknown result comparison '" + name + "'");
}

bool sql_exact_match(const std::string& pred_sql, const std::string& gold_sql) {
  return normalize_sql(pred_sql) == normalize_sql(gold_sql);
}

// ---------------------------------------------------------------------------
// Cell and row comparison

namespace {

// null < bool < number < text
int type_rank(const Cell& c) {
  if (is_null(c)) return 0;
  if (std::holds_alternative<bool>(c)) return 1;
  if (is_numeric(c)) return 2;
  return 3;
}

// Strict weak order used only to line rows up before pairwise comparison.
bool cell_less(const Cell& a, const Cell& b) {
  const int ra = type_rank(a);
  const int rb = type_rank(b);
  if (ra != rb) return ra < rb;
  switch (ra) {
    case 1: return std::get<bool>(a) < std::get<bool>(b);
    case 2: return numeric_value(a) < numeric_value(b);
    case 3: return std::get<std::string>(a) < std::get<std::string>(b);
    default: return false;
  }
}

bool row_less(const std::vector<Cell>& a, const std::vector<Cell>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), cell_less);
}

bool rows_equivalent(const std::vector<Cell>& a, const std::vector<Cell>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!cells_equivalent(a[i], b[i])) return false;
  }
  return true;
}

std::vector<Cell> column_values(const ResultTable& t, std::size_t col) {
  std::vector<Cell> values;
  values.reserve(t.rows.size());
  for (const auto& row : t.rows) values.push_back(row[col]);
  std::sort(values.begin(), values.end(), cell_less);
  return values;
}

// Kuhn's augmenting-path matching on the compatibility graph.
bool has_perfect_matching(const std::vector<std::vector<bool>>& compatible) {
  const std::size_t n = compatible.size();
  std::vector<std::size_t> owner(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<bool> seen(n, false);
    auto augment = [&](auto&& self, std::size_t u) -> bool {
      for (std::size_t j = 0; j < n; ++j) {
        if (!compatible[u][j] || seen[j]) continue;
        seen[j] = true;
        if (owner[j] == n || self(self, owner[j])) {
          owner[j] = u;
          return true;
        }
      }
      return false;
    };
    if (!augment(augment, i)) return false;
  }
  return true;
}

bool identical_columns(const ResultTable& t, std::size_t x, std::size_t y) {
  for (const auto& row : t.rows) {
    if (!cells_equivalent(row[x], row[y])) return false;
  }
  return true;
}

// Rows of `a` restricted to its first `count` columns versus rows of `b`
// restricted to the columns those map to, compared as multisets.
bool projections_agree(const ResultTable& a, const ResultTable& b, const std::vector<std::size_t>& mapping,
                       std::size_t count) {
  std::vector<std::vector<Cell>> left, right;
  left.reserve(a.rows.size());
  right.reserve(b.rows.size());
  for (const auto& row : a.rows) left.emplace_back(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(count));
  for (const auto& row : b.rows) {
    std::vector<Cell> r;
    r.reserve(count);
    for (std::size_t i = 0; i < count; ++i) r.push_back(row[mapping[i]]);
    right.push_back(std::move(r));
  }
  std::sort(left.begin(), left.end(), row_less);
  std::sort(right.begin(), right.end(), row_less);
  for (std::size_t i = 0; i < left.size(); ++i) {
    if (!rows_equivalent(left[i], right[i])) return false;
  }
  return true;
}

bool same_signature(const std::vector<Cell>& a, const std::vector<Cell>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!cells_equivalent(a[i], b[i])) return false;
  }
  return true;
}

}  // namespace

bool cells_equivalent(const Cell& a, const Cell& b) {
  if (is_numeric(a) && is_numeric(b)) {
    const double x = numeric_value(a);
    const double y = numeric_value(b);
    if (std::isnan(x) || std::isnan(y)) return std::isnan(x) && std::isnan(y);
    if (x == y) return true;
    const double scale = std::max({1.0, std::fabs(x), std::fabs(y)});
    return std::fabs(x - y) <= kNumericTolerance * scale;
  }
  if (type_rank(a) != type_rank(b)) return false;
  if (is_null(a)) return true;
  if (const auto* ba = std::get_if<bool>(&a)) return *ba == std::get<bool>(b);
  return std::get<std::string>(a) == std::get<std::string>(b);
}

bool rows_equal_as_multisets(const ResultTable& a, const ResultTable& b,
                             const std::vector<std::size_t>& b_column_for_a) {
  if (a.rows.size() != b.rows.size()) return false;
  if (a.width() != b.width() || b_column_for_a.size() != a.width()) return false;

  std::vector<std::vector<Cell>> left = a.rows;
  std::vector<std::vector<Cell>> right;
  right.reserve(b.rows.size());
  for (const auto& row : b.rows) {
    std::vector<Cell> permuted;
    permuted.reserve(row.size());
    for (const std::size_t src : b_column_for_a) permuted.push_back(row[src]);
    right.push_back(std::move(permuted));
  }
  std::sort(left.begin(), left.end(), row_less);
  std::sort(right.begin(), right.end(), row_less);
  for (std::size_t i = 0; i < left.size(); ++i) {
    if (!rows_equivalent(left[i], right[i])) return false;
  }
  return true;
}

std::optional<std::vector<std::size_t>> find_column_bijection(const ResultTable& a, const ResultTable& b) {
  const std::size_t n = a.width();
  if (n != b.width() || a.rows.size() != b.rows.size()) return std::nullopt;

  // compatible[i][j]: column i of a and column j of b hold the same value
  // multiset. Necessary for any mapping i -> j to work.
  std::vector<std::vector<Cell>> sig_a(n);
  std::vector<std::vector<Cell>> sig_b(n);
  for (std::size_t i = 0; i < n; ++i) {
    sig_a[i] = column_values(a, i);
    sig_b[i] = column_values(b, i);
  }
  std::vector<std::vector<bool>> compatible(n, std::vector<bool>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) compatible[i][j] = same_signature(sig_a[i], sig_b[j]);
  }

  std::vector<std::size_t> mapping(n);
  if (n <= kExhaustiveColumnLimit) {
    std::iota(mapping.begin(), mapping.end(), 0);
    do {
      bool plausible = true;
      for (std::size_t i = 0; i < n && plausible; ++i) plausible = compatible[i][mapping[i]];
      if (plausible && rows_equal_as_multisets(a, b, mapping)) return mapping;
    } while (std::next_permutation(mapping.begin(), mapping.end()));
    return std::nullopt;
  }

  // Wide tables: backtracking over signature-compatible columns. A partial
  // mapping survives only while the rows projected onto the columns mapped
  // so far agree as multisets, and columns of `a` that are cell-for-cell
  // identical are mapped in increasing order since swapping them changes
  // nothing.
  if (!has_perfect_matching(compatible)) return std::nullopt;
  std::vector<std::size_t> twin_of(n, n);  // previous identical column of a
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i; k-- > 0;) {
      if (identical_columns(a, k, i)) {
        twin_of[i] = k;
        break;
      }
    }
  }
  std::vector<bool> used(n, false);
  auto search = [&](auto&& self, std::size_t i) -> bool {
    if (i == n) return true;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j] || !compatible[i][j]) continue;
      if (twin_of[i] != n && j < mapping[twin_of[i]]) continue;
      mapping[i] = j;
      if (!projections_agree(a, b, mapping, i + 1)) continue;
      used[j] = true;
      if (self(self, i + 1)) return true;
      used[j] = false;
    }
    return false;
  };
  if (search(search, 0)) return mapping;
  return std::nullopt;
}

ResultTable drop_identifier_columns(const ResultTable& table) {
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (!is_identifier_column(table.columns[c])) keep.push_back(c);
  }
  ResultTable out;
  out.truncated = table.truncated;
  for (const std::size_t c : keep) out.columns.push_back(table.columns[c]);
  out.rows.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    std::vector<Cell> cells;
    cells.reserve(keep.size());
    for (const std::size_t c : keep) cells.push_back(row[c]);
    out.rows.push_back(std::move(cells));
  }
  return out;
}

bool soft_equivalent(const ResultTable& a, const ResultTable& b) {
  return find_column_bijection(drop_identifier_columns(a), drop_identifier_columns(b)).has_value();
}

bool exact_equivalent(const ResultTable& a, const ResultTable& b) {
  return a.columns == b.columns && a.rows == b.rows;
}

ResultComparison compare_results(const ExecResult& pred, const ResultTable& gold) {
  const auto* table = std::get_if<ResultTable>(&pred);
  if (table == nullptr) return ResultComparison::DbError;
  if (exact_equivalent(*table, gold)) return ResultComparison::ExactMatch;
  if (soft_equivalent(*table, gold)) return ResultComparison::SoftCorrect;
  return ResultComparison::Incorrect;
}

UnanswerableScore score_unanswerable(const PipelineOutcome& outcome, const QuestionItem& item) {
  const bool abstained = std::holds_alternative<Abstained>(outcome.verdict);
  UnanswerableScore score;
  if (item.answerable()) {
    score.false_abstention = abstained;
  } else {
    score.naq_detected = abstained;
  }
  return score;
}

// ---------------------------------------------------------------------------
// Aggregation

json metric_definitions() {
  return {
      {"sql_exact_match",
       "lowercase, whitespace runs collapsed to one space, trimmed, trailing semicolons removed; "
       "string equality; denominator: answerable items"},
      {"result_acc_exact", "column names and order plus rows and row order identical; denominator: answerable items"},
      {"result_acc_soft",
       "exact, or equal row multisets under some column bijection after dropping identifier columns "
       "(id, *_id; case-insensitive) from both tables; numeric tolerance 1e-9 relative; "
       "denominator: answerable items"},
      {"db_error_rate", "predicted SQL failed to execute; denominator: answerable items with a SQL verdict"},
      {"naq_detection_acc", "verdict is abstention; denominator: unanswerable items (overall and per category)"},
      {"false_abstention_rate_on_answerable", "verdict is abstention; denominator: answerable items"},
      {"few_shot_both_pools", "k examples from each enabled pool (2k in total when both are enabled)"},
      {"excluded", "enrichment LLM calls and run-level LLM failures (listed under infra_failures)"},
  };
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

EvalReport evaluate_dataset(const std::vector<QuestionItem>& items, const std::map<std::string, ItemRun>& runs,
                            const GoldResultCache& gold_cache, json config) {
  EvalReport report;
  report.config = std::move(config);

  std::size_t exact_sql = 0, result_exact = 0, result_soft = 0, db_errors = 0, detected = 0, false_abst = 0;
  std::map<std::string, std::size_t> cat_detected;
  auto& agg = report.aggregates;

  for (const auto& item : items) {
    auto it = runs.find(item.id);
    if (it == runs.end()) throw MissingOutcome("no outcome for question '" + item.id + "'");

    QuestionRecord rec;
    rec.id = item.id;
    rec.label = item.label;
    rec.category = item.category;

    if (const auto* failure = std::get_if<InfraFailure>(&it->second)) {
      rec.verdict = "infra_failure";
      report.infra_failures.push_back(*failure);
      report.per_question.push_back(std::move(rec));
      continue;
    }
    const auto& outcome = std::get<PipelineOutcome>(it->second);
    rec.verdict = verdict_name(outcome.verdict);
    rec.sql = verdict_sql(outcome.verdict);
    rec.reprompts_used = outcome.reprompts_used;
    rec.corrections_used = outcome.corrections_used;
    const UnanswerableScore score = score_unanswerable(outcome, item);
    rec.naq_detected = score.naq_detected;
    rec.false_abstention = score.false_abstention;

    if (item.answerable()) {
      ++agg.answerable;
      rec.sql_exact_match = rec.sql.has_value() && sql_exact_match(*rec.sql, *item.gold_sql);
      if (rec.sql) ++agg.sql_verdicts;

      auto gold = gold_cache.find(item.id);
      const bool have_gold = gold != gold_cache.end() && gold->second.table.has_value();
      rec.gold_error = !have_gold;
      if (const auto* executed = std::get_if<Executed>(&outcome.verdict)) {
        rec.result_comparison =
            have_gold ? compare_results(executed->table, *gold->second.table) : ResultComparison::Incorrect;
      } else if (std::holds_alternative<DbFailed>(outcome.verdict)) {
        rec.result_comparison = ResultComparison::DbError;
      } else {
        rec.result_comparison = ResultComparison::Incorrect;
      }

      exact_sql += *rec.sql_exact_match ? 1 : 0;
      result_exact += rec.result_comparison == ResultComparison::ExactMatch ? 1 : 0;
      result_soft += (rec.result_comparison == ResultComparison::ExactMatch ||
                      rec.result_comparison == ResultComparison::SoftCorrect)
                         ? 1
                         : 0;
      db_errors += rec.result_comparison == ResultComparison::DbError ? 1 : 0;
      false_abst += rec.false_abstention ? 1 : 0;
    } else {
      ++agg.unanswerable;
      const std::string cat(to_string(*item.category));
      ++agg.naq_count_by_category[cat];
      cat_detected[cat];
      if (*rec.naq_detected) {
        ++detected;
        ++cat_detected[cat];
      }
    }
    report.per_question.push_back(std::move(rec));
  }

  agg.sql_exact_match_acc = ratio(exact_sql, agg.answerable);
  agg.result_acc_exact = ratio(result_exact, agg.answerable);
  agg.result_acc_soft = ratio(result_soft, agg.answerable);
  agg.db_error_rate = ratio(db_errors, agg.sql_verdicts);
  agg.naq_detection_acc = ratio(detected, agg.unanswerable);
  agg.false_abstention_rate_on_answerable = ratio(false_abst, agg.answerable);
  for (const auto& [cat, n] : agg.naq_count_by_category) {
    agg.naq_detection_by_category[cat] = *ratio(cat_detected[cat], n);
  }

  std::sort(report.per_question.begin(), report.per_question.end(),
            [](const QuestionRecord& a, const QuestionRecord& b) { return a.id < b.id; });
  std::sort(report.infra_failures.begin(), report.infra_failures.end(),
            [](const InfraFailure& a, const InfraFailure& b) { return a.question_id < b.question_id; });
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_from(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_bool(const std::optional<bool>& b) {
  if (!b) return "";
  return *b ? "true" : "false";
}

}  // namespace

json report_to_json(const EvalReport& report) {
  json per_question = json::array();
  for (const auto& r : report.per_question) {
    per_question.push_back({
        {"id", r.id},
        {"label", std::string(to_string(r.label))},
        {"category", r.category ? json(std::string(to_string(*r.category))) : json(nullptr)},
        {"verdict", r.verdict},
        {"sql", opt_json(r.sql)},
        {"sql_exact_match", opt_json(r.sql_exact_match)},
        {"result_comparison", r.result_comparison ? json(to_string(*r.result_comparison)) : json(nullptr)},
        {"naq_detected", opt_json(r.naq_detected)},
        {"false_abstention", r.false_abstention},
        {"gold_error", r.gold_error},
        {"reprompts_used", r.reprompts_used},
        {"corrections_used", r.corrections_used},
    });
  }
  const auto& a = report.aggregates;
  json aggregates = {
      {"answerable", a.answerable},
      {"unanswerable", a.unanswerable},
      {"sql_verdicts", a.sql_verdicts},
      {"sql_exact_match_acc", opt_json(a.sql_exact_match_acc)},
      {"result_acc_exact", opt_json(a.result_acc_exact)},
      {"result_acc_soft", opt_json(a.result_acc_soft)},
      {"db_error_rate", opt_json(a.db_error_rate)},
      {"naq_detection_acc", opt_json(a.naq_detection_acc)},
      {"naq_detection_by_category", a.naq_detection_by_category},
      {"naq_count_by_category", a.naq_count_by_category},
      {"false_abstention_rate_on_answerable", opt_json(a.false_abstention_rate_on_answerable)},
  };
  json infra = json::array();
  for (const auto& f : report.infra_failures) infra.push_back({{"id", f.question_id}, {"message", f.message}});
  return {{"schema_version", 1},
          {"config", report.config},
          {"metric_definitions", metric_definitions()},
          {"aggregates", std::move(aggregates)},
          {"per_question", std::move(per_question)},
          {"infra_failures", std::move(infra)}};
}

EvalReport report_from_json(const json& j) {
  EvalReport report;
  try {
    report.config = j.at("config");
    for (const auto& r : j.at("per_question")) {
      QuestionRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.label = r.at("label").get<std::string>() == "answerable" ? Label::Answerable : Label::Unanswerable;
      if (auto c = opt_from<std::string>(r, "category")) rec.category = naq_category_from_string(*c);
      rec.verdict = r.at("verdict").get<std::string>();
      rec.sql = opt_from<std::string>(r, "sql");
      rec.sql_exact_match = opt_from<bool>(r, "sql_exact_match");
      if (auto c = opt_from<std::string>(r, "result_comparison")) {
        rec.result_comparison = result_comparison_from_string(*c);
      }
      rec.naq_detected = opt_from<bool>(r, "naq_detected");
      rec.false_abstention = r.at("false_abstention").get<bool>();
      rec.gold_error = r.at("gold_error").get<bool>();
      rec.reprompts_used = r.at("reprompts_used").get<int>();
      rec.corrections_used = r.at("corrections_used").get<int>();
      report.per_question.push_back(std::move(rec));
    }
    const auto& a = j.at("aggregates");
    auto& agg = report.aggregates;
    agg.answerable = a.at("answerable").get<std::size_t>();
    agg.unanswerable = a.at("unanswerable").get<std::size_t>();
    agg.sql_verdicts = a.at("sql_verdicts").get<std::size_t>();
    agg.sql_exact_match_acc = opt_from<double>(a, "sql_exact_match_acc");
    agg.result_acc_exact = opt_from<double>(a, "result_acc_exact");
    agg.result_acc_soft = opt_from<double>(a, "result_acc_soft");
    agg.db_error_rate = opt_from<double>(a, "db_error_rate");
    agg.naq_detection_acc = opt_from<double>(a, "naq_detection_acc");
    agg.naq_detection_by_category = a.at("naq_detection_by_category").get<std::map<std::string, double>>();
    agg.naq_count_by_category = a.at("naq_count_by_category").get<std::map<std::string, std::size_t>>();
    agg.false_abstention_rate_on_answerable = opt_from<double>(a, "false_abstention_rate_on_answerable");
    for (const auto& f : j.at("infra_failures")) {
      report.infra_failures.push_back({f.at("id").get<std::string>(), f.at("message").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  return report;
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "id,label,category,verdict,sql_exact_match,result_comparison,naq_detected,false_abstention,"
         "reprompts_used,corrections_used,sql\n";
  for (const auto& r : report.per_question) {
    out << csv_field(r.id) << ',' << to_string(r.label) << ','
        << (r.category ? std::string(to_string(*r.category)) : "") << ',' << r.verdict << ','
        << csv_bool(r.sql_exact_match) << ','
        << (r.result_comparison ? to_string(*r.result_comparison) : "") << ',' << csv_bool(r.naq_detected)
        << ',' << (r.false_abstention ? "true" : "false") << ',' << r.reprompts_used << ','
        << r.corrections_used << ',' << csv_field(r.sql.value_or("")) << '\n';
  }
  return out.str();
}

std::filesystem::path csv_path_for(const std::filesystem::path& json_path) {
  std::filesystem::path p = json_path;
  p.replace_extension(".csv");
  return p;
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write report " + path.string());
    out << report_to_json(report).dump(2) << "\n";
  }
  std::ofstream csv(csv_path_for(path), std::ios::binary);
  if (!csv) throw IoError("cannot write report " + csv_path_for(path).string());
  csv << report_to_csv(report);
}

EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report " + path.string());
  try {
    return report_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError("report " + path.string() + ": " + e.what());
  }
}

}  // namespace naqsql
