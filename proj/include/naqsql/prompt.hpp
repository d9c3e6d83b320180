#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "naqsql/dataset.hpp"
#include "naqsql/retriever.hpp"
#include "naqsql/schema.hpp"

namespace naqsql {

enum class ExampleSelection { None, Answerable, Unanswerable, Both };

std::string to_string(ExampleSelection selection);
// "none" | "aq" | "naq" | "both"
ExampleSelection example_selection_from_string(const std::string& name);

struct PromptConfig {
  int shots = 0;  // 0, 1, 3 or 5
  bool include_nar = false;
  bool include_answerable_examples = false;
  bool include_unanswerable_examples = false;
  std::string dialect = "PostgreSQL";

  void validate() const;
  ExampleSelection selection() const;
  void set_selection(ExampleSelection selection);
  bool operator==(const PromptConfig&) const = default;
};

// Regime names: "base", "nar", optionally followed by "+aq<k>", "+naq<k>" or
// "+both<k>"; a bare "aq3" etc. means examples without the rules block.
PromptConfig parse_regime(const std::string& name);
std::string regime_name(const PromptConfig& config);

nlohmann::json prompt_config_to_json(const PromptConfig& config);
PromptConfig prompt_config_from_json(const nlohmann::json& j);

struct ExampleRef {
  Label pool;
  std::string id;
  bool operator==(const ExampleRef&) const = default;
};

struct AssembledPrompt {
  std::string system_text;
  std::string user_text;  // always ends with "[SQL]:"
  std::vector<ExampleRef> example_ids_used;
};

// Retrieval inputs for few-shot prompts. Stores may be null when the
// corresponding example flag is off.
struct ExamplePools {
  const ExampleStore* answerable = nullptr;
  const ExampleStore* unanswerable = nullptr;
  EmbeddingProvider* embedder = nullptr;
};

std::string role_instruction(const std::string& dialect);
std::string nar_rules_text();
// Throws ValidationError for an answerable item without SQL.
std::string format_example(const QuestionItem& item);

// Assembles system and user text. `question_id`, when given, is excluded from
// retrieval so a dataset item never serves as its own example. Retrieval and
// embedding failures surface as RetrievalError.
AssembledPrompt build_prompt(const std::string& question, const std::optional<std::string>& question_id,
                             const SchemaModel& schema, const PromptConfig& config, const ExamplePools& pools);

}  // namespace naqsql
