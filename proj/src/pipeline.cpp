#include "naqsql/pipeline.hpp"

#include <sstream>

#include "naqsql/error.hpp"
#include "naqsql/sqltext.hpp"

namespace naqsql {

using nlohmann::json;

std::string verdict_name(const PipelineVerdict& verdict) {
  struct Visitor {
    std::string operator()(const Executed&) const { return "executed"; }
    std::string operator()(const Abstained&) const { return "abstained"; }
    std::string operator()(const DbFailed&) const { return "db_failed"; }
    std::string operator()(const Unusable&) const { return "unusable"; }
  };
  return std::visit(Visitor{}, verdict);
}

std::optional<std::string> verdict_sql(const PipelineVerdict& verdict) {
  if (const auto* e = std::get_if<Executed>(&verdict)) return e->sql;
  if (const auto* d = std::get_if<DbFailed>(&verdict)) return d->sql;
  return std::nullopt;
}

std::size_t PipelineOutcome::core_calls() const {
  std::size_t n = 0;
  for (const auto& t : transcript) n += t.enrichment ? 0 : 1;
  return n;
}

json transcript_entry_to_json(const TranscriptEntry& entry) {
  json j = {{"purpose", entry.purpose},
            {"enrichment", entry.enrichment},
            {"request", request_to_json(entry.request)},
            {"response", entry.response},
            {"latency_ms", entry.latency.count()}};
  j["error"] = entry.error ? json(*entry.error) : json(nullptr);
  return j;
}

json outcome_to_json(const PipelineOutcome& outcome) {
  json transcript = json::array();
  for (const auto& t : outcome.transcript) transcript.push_back(transcript_entry_to_json(t));
  json stages = json::array();
  for (const auto& s : outcome.stages) {
    stages.push_back({{"name", s.name}, {"status", s.status}, {"detail", s.detail}});
  }
  json examples = json::array();
  for (const auto& e : outcome.example_ids_used) {
    examples.push_back({{"pool", std::string(to_string(e.pool))}, {"id", e.id}});
  }
  json verdict = {{"kind", verdict_name(outcome.verdict)}};
  std::visit(
      [&verdict](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Executed>) {
          verdict["sql"] = v.sql;
          verdict["result"] = table_to_json(v.table);
        } else if constexpr (std::is_same_v<T, DbFailed>) {
          verdict["sql"] = v.sql;
          verdict["error"] = {{"kind", to_string(v.error.kind)}, {"message", v.error.message}};
        } else {
          verdict["raw_output"] = v.raw_output;
        }
      },
      outcome.verdict);

  auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
  return {{"question_id", outcome.question_id},
          {"question", outcome.question},
          {"config", prompt_config_to_json(outcome.config)},
          {"correction_loop", outcome.correction_loop},
          {"verdict", std::move(verdict)},
          {"reprompts_used", outcome.reprompts_used},
          {"corrections_used", outcome.corrections_used},
          {"example_ids_used", std::move(examples)},
          {"stages", std::move(stages)},
          {"transcript", std::move(transcript)},
          {"explanation", opt(outcome.explanation)},
          {"short_answer", opt(outcome.short_answer)},
          {"enrichment_error", opt(outcome.enrichment_error)}};
}

namespace {

// Keeps the running conversation and records every call.
class Conversation {
 public:
  Conversation(LlmClient& llm, PipelineOutcome& outcome, std::string model, std::string system)
      : llm_(llm), outcome_(outcome) {
    base_.model = model.empty() ? llm.default_model() : std::move(model);
    base_.system = std::move(system);
  }

  std::string send(const std::string& purpose, const std::string& message) {
    ChatRequest request = base_;
    request.user_turns.push_back(message);
    TranscriptEntry entry{purpose, false, request, {}, std::nullopt, {}};
    ChatResponse response;
    try {
      response = llm_.complete(request);
    } catch (const LlmError& e) {
      entry.error = e.what();
      outcome_.transcript.push_back(std::move(entry));
      outcome_.stages.push_back({"llm-called", "error", purpose + ": " + e.what()});
      throw;
    }
    entry.response = response.text;
    entry.latency = response.latency;
    outcome_.transcript.push_back(std::move(entry));
    outcome_.stages.push_back({"llm-called", "ok", purpose});
    base_ = std::move(request);
    base_.assistant_turns.push_back(response.text);
    return response.text;
  }

 private:
  LlmClient& llm_;
  PipelineOutcome& outcome_;
  ChatRequest base_;
};

std::string describe_class(const ModelOutputClass& cls) {
  if (std::holds_alternative<SqlCandidate>(cls)) return "sql";
  if (std::holds_alternative<Abstention>(cls)) return "abstention";
  return "unusable";
}

ChatResponse enrichment_call(LlmClient& llm, const std::string& model, const std::string& purpose,
                             std::string system, std::string message, std::vector<TranscriptEntry>* transcript) {
  ChatRequest request;
  request.model = model.empty() ? llm.default_model() : model;
  request.system = std::move(system);
  request.user_turns.push_back(std::move(message));
  TranscriptEntry entry{purpose, true, request, {}, std::nullopt, {}};
  try {
    ChatResponse response = llm.complete(request);
    entry.response = response.text;
    entry.latency = response.latency;
    if (transcript) transcript->push_back(std::move(entry));
    return response;
  } catch (const LlmError& e) {
    entry.error = e.what();
    if (transcript) transcript->push_back(std::move(entry));
    throw;
  }
}

}  // namespace

PipelineOutcome answer_question(const std::string& question, const std::optional<std::string>& question_id,
                                const PipelineContext& context, const PromptConfig& config,
                                const PipelineOptions& options) {
  PipelineOutcome outcome;
  outcome.question_id = question_id.value_or("");
  outcome.question = question;
  outcome.config = config;
  outcome.correction_loop = options.correction_loop;

  const AssembledPrompt prompt = build_prompt(question, question_id, context.schema, config, context.pools);
  outcome.example_ids_used = prompt.example_ids_used;
  outcome.stages.push_back({"prompt-built", "ok",
                            regime_name(config) + ", " + std::to_string(prompt.example_ids_used.size()) +
                                " example(s)"});

  Conversation conversation(context.llm, outcome, options.model, prompt.system_text);

  auto finish = [&](PipelineVerdict verdict) {
    outcome.verdict = std::move(verdict);
    outcome.stages.push_back({"verdict", verdict_name(outcome.verdict), ""});
  };

  std::string raw = conversation.send("initial", prompt.user_text);
  ModelOutputClass cls = classify_output(raw);
  outcome.stages.push_back({"classified", describe_class(cls), ""});

  if (std::holds_alternative<UnusableOutput>(cls)) {
    outcome.reprompts_used = 1;
    raw = conversation.send("reprompt", kRepromptMessage);
    cls = classify_output(raw);
    outcome.stages.push_back({"classified", describe_class(cls), ""});
    if (std::holds_alternative<UnusableOutput>(cls)) {
      finish(Unusable{raw});
      return outcome;
    }
  }

  if (std::holds_alternative<Abstention>(cls)) {
    finish(Abstained{raw});
  } else {
    std::string sql = std::get<SqlCandidate>(cls).sql;
    ExecResult result = context.executor.execute_sql(sql, options.limits);
    bool first_execution = true;
    auto record_execution = [&](const ExecResult& r) {
      const char* name = first_execution ? "executed" : "corrected";
      first_execution = false;
      if (const auto* table = std::get_if<ResultTable>(&r)) {
        outcome.stages.push_back({name, "ok", std::to_string(table->rows.size()) + " row(s)"});
      } else {
        outcome.stages.push_back({name, "error", std::get<ExecError>(r).message});
      }
    };
    record_execution(result);

    while (true) {
      if (auto* table = std::get_if<ResultTable>(&result)) {
        finish(Executed{sql, std::move(*table)});
        break;
      }
      const ExecError error = std::get<ExecError>(result);
      if (!options.correction_loop || outcome.corrections_used >= kMaxCorrections) {
        finish(DbFailed{sql, error});
        break;
      }
      ++outcome.corrections_used;
      raw = conversation.send("correction", kCorrectionPrefix + error.message);
      cls = classify_output(raw);
      outcome.stages.push_back({"classified", describe_class(cls), ""});
      if (std::holds_alternative<Abstention>(cls)) {
        finish(Abstained{raw});
        break;
      }
      if (const auto* candidate = std::get_if<SqlCandidate>(&cls)) {
        sql = candidate->sql;
        result = context.executor.execute_sql(sql, options.limits);
        record_execution(result);
      }
      // An unusable reply spends the correction; the previous error stands.
    }
  }

  if (options.ui_mode) {
    const std::size_t before = outcome.transcript.size();
    try {
      if (const auto* abstained = std::get_if<Abstained>(&outcome.verdict)) {
        outcome.explanation = explain_abstention(question, abstained->raw_output, context.schema, context.llm,
                                                 options.model, &outcome.transcript);
      } else if (const auto* executed = std::get_if<Executed>(&outcome.verdict)) {
        outcome.short_answer =
            summarize_result(question, executed->table, context.llm, options.model, &outcome.transcript);
      }
    } catch (const LlmError& e) {
      outcome.enrichment_error = e.what();
    }
    for (std::size_t i = before; i < outcome.transcript.size(); ++i) {
      const auto& t = outcome.transcript[i];
      outcome.stages.push_back({"llm-called", t.error ? "error" : "ok", t.purpose + (t.error ? ": " + *t.error : "")});
    }
  }
  return outcome;
}

std::string explain_abstention(const std::string& question, const std::string& raw_output,
                               const SchemaModel& schema, LlmClient& llm, const std::string& model,
                               std::vector<TranscriptEntry>* transcript) {
  std::ostringstream message;
  message << "A text-to-SQL system declined to answer the question below because it judged it "
             "unanswerable on this database.\n\n"
          << "Database schema:\n"
          << render_schema_prompt(schema) << "\n"
          << "Question: " << question << "\n"
          << "System output: " << raw_output << "\n\n"
          << "Explain in a few sentences why the question cannot be answered with a SQL query on this "
             "database, then suggest how the user could rephrase it so that it can be answered.";
  return enrichment_call(llm, model, "explain", "You help users of a database question answering system.",
                         message.str(), transcript)
      .text;
}

std::string summary_prompt(const std::string& question, const ResultTable& table) {
  std::ostringstream message;
  const std::size_t shown = std::min(table.rows.size(), kSummaryRowCap);
  message << "Question: " << question << "\n\n"
          << "Query result (" << shown << " of " << table.rows.size() << " row(s) shown"
          << (table.truncated ? ", result truncated" : "") << "):\n";
  for (std::size_t c = 0; c < table.columns.size(); ++c) message << (c ? " | " : "") << table.columns[c];
  message << "\n";
  for (std::size_t r = 0; r < shown; ++r) {
    for (std::size_t c = 0; c < table.rows[r].size(); ++c) {
      message << (c ? " | " : "") << cell_to_string(table.rows[r][c]);
    }
    message << "\n";
  }
  message << "\nAnswer the question in one or two sentences using only this result.";
  return message.str();
}

std::string summarize_result(const std::string& question, const ResultTable& table, LlmClient& llm,
                             const std::string& model, std::vector<TranscriptEntry>* transcript) {
  return enrichment_call(llm, model, "summarize", "You summarise database query results for end users.",
                         summary_prompt(question, table), transcript)
      .text;
}

}  // namespace naqsql
