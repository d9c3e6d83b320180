#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "naqsql/executor.hpp"
#include "naqsql/llm.hpp"
#include "naqsql/prompt.hpp"
#include "naqsql/schema.hpp"

namespace naqsql {

inline constexpr const char* kRepromptMessage =
    "Please return a SQL query or 'unanswerable question' if the question cannot be answered with an SQL "
    "query on the database.";
inline constexpr const char* kCorrectionPrefix =
    "Please correct the SQL query based on the following error message: ";
inline constexpr int kMaxCorrections = 3;
inline constexpr std::size_t kSummaryRowCap = 20;

struct Executed {
  std::string sql;
  ResultTable table;
};
struct Abstained {
  std::string raw_output;
};
struct DbFailed {
  std::string sql;
  ExecError error;
};
struct Unusable {
  std::string raw_output;
};

using PipelineVerdict = std::variant<Executed, Abstained, DbFailed, Unusable>;

// "executed" | "abstained" | "db_failed" | "unusable"
std::string verdict_name(const PipelineVerdict& verdict);
std::optional<std::string> verdict_sql(const PipelineVerdict& verdict);

struct TranscriptEntry {
  std::string purpose;  // initial | reprompt | correction | explain | summarize
  bool enrichment = false;
  ChatRequest request;
  std::string response;
  std::optional<std::string> error;
  std::chrono::milliseconds latency{0};
};

nlohmann::json transcript_entry_to_json(const TranscriptEntry& entry);

struct Stage {
  std::string name;
  std::string status;
  std::string detail;
};

struct PipelineOutcome {
  std::string question_id;
  std::string question;
  PromptConfig config;
  bool correction_loop = true;
  PipelineVerdict verdict = Unusable{};
  std::vector<TranscriptEntry> transcript;
  int reprompts_used = 0;
  int corrections_used = 0;
  std::vector<ExampleRef> example_ids_used;
  std::vector<Stage> stages;
  // UI-mode enrichment; never read by the metrics.
  std::optional<std::string> explanation;
  std::optional<std::string> short_answer;
  std::optional<std::string> enrichment_error;

  // LLM calls that belong to the state machine proper (enrichment excluded).
  std::size_t core_calls() const;
};

nlohmann::json outcome_to_json(const PipelineOutcome& outcome);

struct PipelineOptions {
  bool correction_loop = true;
  bool ui_mode = false;
  ExecLimits limits{};
  std::string model;  // empty: client default
};

struct PipelineContext {
  const SchemaModel& schema;
  LlmClient& llm;
  ExamplePools pools;
  Executor& executor;
};

// Runs one question through prompt -> LLM -> classify -> (one re-prompt)
// -> execute -> (up to three corrections). LlmError and TimeoutError escape
// as run-level failures; every other path ends in exactly one verdict.
PipelineOutcome answer_question(const std::string& question, const std::optional<std::string>& question_id,
                                const PipelineContext& context, const PromptConfig& config,
                                const PipelineOptions& options);

// One extra call asking why the question cannot be answered and how to
// rephrase it. When `transcript` is given the call is appended as enrichment
// (including failed calls). Throws LlmError.
std::string explain_abstention(const std::string& question, const std::string& raw_output,
                               const SchemaModel& schema, LlmClient& llm, const std::string& model = {},
                               std::vector<TranscriptEntry>* transcript = nullptr);

// One extra call producing a short answer from at most kSummaryRowCap rows.
std::string summarize_result(const std::string& question, const ResultTable& table, LlmClient& llm,
                             const std::string& model = {}, std::vector<TranscriptEntry>* transcript = nullptr);

std::string summary_prompt(const std::string& question, const ResultTable& table);

}  // namespace naqsql
