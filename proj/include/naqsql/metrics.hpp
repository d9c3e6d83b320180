#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "naqsql/dataset.hpp"
#include "naqsql/pipeline.hpp"
#include "naqsql/result_table.hpp"

namespace naqsql {

// Relative tolerance for numeric cells: |a - b| <= tol * max(1, |a|, |b|).
inline constexpr double kNumericTolerance = 1e-9;
// Above this width the bijection search prunes by column signature.
inline constexpr std::size_t kExhaustiveColumnLimit = 8;

enum class ResultComparison { ExactMatch, SoftCorrect, Incorrect, DbError };

std::string to_string(ResultComparison comparison);
ResultComparison result_comparison_from_string(const std::string& name);

bool sql_exact_match(const std::string& pred_sql, const std::string& gold_sql);

// Numbers compare with kNumericTolerance (integers and decimals mix), text
// exactly, null only with null.
bool cells_equivalent(const Cell& a, const Cell& b);

// True when the rows of `a` and the rows of `b`, with b's columns reordered
// by `b_column_for_a[i]`, are equal as multisets.
bool rows_equal_as_multisets(const ResultTable& a, const ResultTable& b,
                             const std::vector<std::size_t>& b_column_for_a);

// Finds a column mapping under which the row multisets agree, if any.
std::optional<std::vector<std::size_t>> find_column_bijection(const ResultTable& a, const ResultTable& b);

ResultTable drop_identifier_columns(const ResultTable& table);

// Same data up to row order, column names/order and id-like columns.
bool soft_equivalent(const ResultTable& a, const ResultTable& b);
// Same column names in the same order and the same rows in the same order.
bool exact_equivalent(const ResultTable& a, const ResultTable& b);

ResultComparison compare_results(const ExecResult& pred, const ResultTable& gold);

struct UnanswerableScore {
  std::optional<bool> naq_detected;  // set for unanswerable items only
  bool false_abstention = false;     // answerable item that was abstained on
};

UnanswerableScore score_unanswerable(const PipelineOutcome& outcome, const QuestionItem& item);

// A question whose run ended in an LLM transport failure.
struct InfraFailure {
  std::string question_id;
  std::string message;
  bool operator==(const InfraFailure&) const = default;
};

using ItemRun = std::variant<PipelineOutcome, InfraFailure>;

struct QuestionRecord {
  std::string id;
  Label label = Label::Answerable;
  std::optional<NaqCategory> category;
  std::string verdict;  // verdict_name(), or "infra_failure"
  std::optional<std::string> sql;
  std::optional<bool> sql_exact_match;
  std::optional<ResultComparison> result_comparison;
  std::optional<bool> naq_detected;
  bool false_abstention = false;
  bool gold_error = false;
  int reprompts_used = 0;
  int corrections_used = 0;

  bool operator==(const QuestionRecord&) const = default;
};

struct Aggregates {
  std::size_t answerable = 0;    // evaluated (infra failures excluded)
  std::size_t unanswerable = 0;  // evaluated (infra failures excluded)
  std::size_t sql_verdicts = 0;  // answerable items that produced SQL
  std::optional<double> sql_exact_match_acc;
  std::optional<double> result_acc_exact;
  std::optional<double> result_acc_soft;  // exact or soft-correct
  std::optional<double> db_error_rate;
  std::optional<double> naq_detection_acc;
  std::map<std::string, double> naq_detection_by_category;
  std::map<std::string, std::size_t> naq_count_by_category;
  std::optional<double> false_abstention_rate_on_answerable;

  bool operator==(const Aggregates&) const = default;
};

struct EvalReport {
  nlohmann::json config = nlohmann::json::object();
  std::vector<QuestionRecord> per_question;  // sorted by id
  Aggregates aggregates;
  std::vector<InfraFailure> infra_failures;  // sorted by id

  bool operator==(const EvalReport&) const = default;
};

// Describes how each metric is computed; written into every report.
nlohmann::json metric_definitions();

// Throws MissingOutcome when an item has no run.
EvalReport evaluate_dataset(const std::vector<QuestionItem>& items, const std::map<std::string, ItemRun>& runs,
                            const GoldResultCache& gold_cache, nlohmann::json config = nlohmann::json::object());

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
std::string report_to_csv(const EvalReport& report);

// Writes `path` (JSON) and the same path with a .csv extension.
void write_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

std::filesystem::path csv_path_for(const std::filesystem::path& json_path);

}  // namespace naqsql
