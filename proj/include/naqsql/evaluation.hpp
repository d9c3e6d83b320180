#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "naqsql/dataset.hpp"
#include "naqsql/metrics.hpp"
#include "naqsql/pipeline.hpp"
#include "naqsql/prompt.hpp"

namespace naqsql {

struct EvaluationRun {
  PromptConfig prompt;
  PipelineOptions options;
  // Questions in flight at once. Scripted providers replay responses in
  // order, so callers pass 1 for them.
  std::size_t jobs = 1;
};

// Runs the pipeline on every item. LLM failures become InfraFailure; any
// other exception propagates.
std::map<std::string, ItemRun> run_items(const std::vector<QuestionItem>& items, const PipelineContext& context,
                                         const EvaluationRun& run);

// Configuration block echoed into reports.
nlohmann::json evaluation_config(const EvaluationRun& run, const std::string& model, const std::string& llm_source,
                                 const std::string& embedding_source);

struct EvaluationResult {
  EvalReport report;
  std::map<std::string, ItemRun> runs;
};

EvaluationResult run_evaluation(const std::vector<QuestionItem>& items, const GoldResultCache& gold,
                                const PipelineContext& context, const EvaluationRun& run, nlohmann::json config);

// One JSON object per line, sorted by question id.
void write_transcripts(const std::map<std::string, ItemRun>& runs, const std::filesystem::path& path);

std::filesystem::path transcripts_path_for(const std::filesystem::path& report_path);

}  // namespace naqsql
