#include "naqsql/evaluation.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "naqsql/error.hpp"

namespace naqsql {

using nlohmann::json;

namespace {

ItemRun run_one(const QuestionItem& item, const PipelineContext& context, const EvaluationRun& run) {
  try {
    return answer_question(item.question, item.id, context, run.prompt, run.options);
  } catch (const LlmError& e) {
    return InfraFailure{item.id, e.what()};
  }
}

}  // namespace

std::map<std::string, ItemRun> run_items(const std::vector<QuestionItem>& items, const PipelineContext& context,
                                         const EvaluationRun& run) {
  std::map<std::string, ItemRun> runs;
  const std::size_t jobs = std::max<std::size_t>(1, std::min(run.jobs, items.size()));
  if (jobs == 1) {
    for (const auto& item : items) runs.emplace(item.id, run_one(item, context, run));
    return runs;
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      try {
        ItemRun r = run_one(items[i], context, run);
        std::lock_guard lock(mu);
        runs.emplace(items[i].id, std::move(r));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = items.size();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(jobs);
  for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return runs;
}

json evaluation_config(const EvaluationRun& run, const std::string& model, const std::string& llm_source,
                       const std::string& embedding_source) {
  json prompt = prompt_config_to_json(run.prompt);
  return {{"regime", regime_name(run.prompt)},
          {"prompt", std::move(prompt)},
          {"correction_loop", run.options.correction_loop},
          {"ui_mode", run.options.ui_mode},
          {"model", model},
          {"llm", llm_source},
          {"embeddings", embedding_source},
          {"limits",
           {{"timeout_ms", run.options.limits.timeout.count()}, {"max_rows", run.options.limits.max_rows}}},
          {"identifier_columns_dropped_from", "both"}};
}

EvaluationResult run_evaluation(const std::vector<QuestionItem>& items, const GoldResultCache& gold,
                                const PipelineContext& context, const EvaluationRun& run, json config) {
  EvaluationResult result;
  result.runs = run_items(items, context, run);
  result.report = evaluate_dataset(items, result.runs, gold, std::move(config));
  return result;
}

void write_transcripts(const std::map<std::string, ItemRun>& runs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write transcripts " + path.string());
  for (const auto& [id, r] : runs) {
    json line;
    if (const auto* outcome = std::get_if<PipelineOutcome>(&r)) {
      line = outcome_to_json(*outcome);
    } else {
      const auto& failure = std::get<InfraFailure>(r);
      line = {{"question_id", id}, {"infra_failure", failure.message}};
    }
    out << line.dump() << "\n";
  }
  if (!out) throw IoError("failed writing transcripts " + path.string());
}

std::filesystem::path transcripts_path_for(const std::filesystem::path& report_path) {
  std::filesystem::path p = report_path;
  p.replace_extension(".transcripts.jsonl");
  return p;
}

}  // namespace naqsql
