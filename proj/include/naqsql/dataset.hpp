#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "naqsql/executor.hpp"
#include "naqsql/result_table.hpp"
#include "naqsql/schema.hpp"

namespace naqsql {

class LlmClient;

enum class NaqCategory {
  NonSql,
  ColumnsMissing,
  ValuesMissing,
  OutOfDomain,
  ColumnAmbiguous,
  ValueAmbiguous,
  ContextualAmbiguous,
  OperatorAmbiguous,
};

inline constexpr std::array<NaqCategory, 8> kAllNaqCategories = {
    NaqCategory::NonSql,          NaqCategory::ColumnsMissing,      NaqCategory::ValuesMissing,
    NaqCategory::OutOfDomain,     NaqCategory::ColumnAmbiguous,     NaqCategory::ValueAmbiguous,
    NaqCategory::ContextualAmbiguous, NaqCategory::OperatorAmbiguous,
};

std::string_view to_string(NaqCategory category);
// Throws ValidationError listing the legal names.
NaqCategory naq_category_from_string(std::string_view name);

enum class Label { Answerable, Unanswerable };

std::string_view to_string(Label label);

struct QuestionItem {
  std::string id;
  std::string question;
  Label label = Label::Answerable;
  std::optional<std::string> gold_sql;
  std::optional<NaqCategory> category;

  bool answerable() const { return label == Label::Answerable; }
  // Throws ValidationError when label and fields disagree.
  void validate() const;
  bool operator==(const QuestionItem&) const = default;
};

nlohmann::json item_to_json(const QuestionItem& item);
QuestionItem item_from_json(const nlohmann::json& j);

std::vector<QuestionItem> parse_questions(const nlohmann::json& doc);
nlohmann::json serialize_questions(const std::vector<QuestionItem>& items);
std::vector<QuestionItem> load_questions(const std::filesystem::path& path);

// Gold execution result for one answerable item. Exactly one of table/error.
struct GoldEntry {
  std::optional<ResultTable> table;
  std::optional<std::string> error;

  bool operator==(const GoldEntry&) const = default;
};

// Ordered by question id so the written file is deterministic.
using GoldResultCache = std::map<std::string, GoldEntry>;

GoldResultCache build_gold_cache(const std::vector<QuestionItem>& items, Executor& executor,
                                 const ExecLimits& limits = {});
nlohmann::json gold_cache_to_json(const GoldResultCache& cache);
GoldResultCache gold_cache_from_json(const nlohmann::json& j);
void write_gold_cache(const GoldResultCache& cache, const std::filesystem::path& path);
GoldResultCache load_gold_cache(const std::filesystem::path& path);

// Short definition used to steer candidate generation for a category.
std::string_view category_definition(NaqCategory category);

// Prompt asking a model for `n` candidate questions of one category.
std::string naq_generation_prompt(const SchemaModel& schema, NaqCategory category, std::size_t n);

struct NaqCandidates {
  NaqCategory category;
  std::vector<std::string> questions;
  // Candidates are raw model output and must be reviewed before use.
  bool requires_human_curation = true;
};

// One LLM call; output lines become candidates after stripping list markers
// and case-insensitive de-duplication. Throws EmptyGeneration when nothing
// usable comes back.
NaqCandidates generate_naq_candidates(const SchemaModel& schema, NaqCategory category, std::size_t n,
                                      LlmClient& llm);

}  // namespace naqsql
