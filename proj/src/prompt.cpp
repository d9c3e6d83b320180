#include "naqsql/prompt.hpp"

#include <regex>
#include <sstream>

#include "naqsql/error.hpp"
#include "naqsql/sqltext.hpp"

namespace naqsql {

using nlohmann::json;

std::string to_string(ExampleSelection selection) {
  switch (selection) {
    case ExampleSelection::None: return "none";
    case ExampleSelection::Answerable: return "aq";
    case ExampleSelection::Unanswerable: return "naq";
    case ExampleSelection::Both: return "both";
  }
  return "none";
}

ExampleSelection example_selection_from_string(const std::string& name) {
  if (name == "none") return ExampleSelection::None;
  if (name == "aq") return ExampleSelection::Answerable;
  if (name == "naq") return ExampleSelection::Unanswerable;
  if (name == "both") return ExampleSelection::Both;
  throw ConfigError("unknown example selection '" + name + "' (expected none, aq, naq or both)");
}

void PromptConfig::validate() const {
  if (shots != 0 && shots != 1 && shots != 3 && shots != 5) {
    throw ConfigError("shots must be 0, 1, 3 or 5 (got " + std::to_string(shots) + ")");
  }
}

ExampleSelection PromptConfig::selection() const {
  if (include_answerable_examples && include_unanswerable_examples) return ExampleSelection::Both;
  if (include_answerable_examples) return ExampleSelection::Answerable;
  if (include_unanswerable_examples) return ExampleSelection::Unanswerable;
  return ExampleSelection::None;
}

void PromptConfig::set_selection(ExampleSelection selection) {
  include_answerable_examples =
      selection == ExampleSelection::Answerable || selection == ExampleSelection::Both;
  include_unanswerable_examples =
      selection == ExampleSelection::Unanswerable || selection == ExampleSelection::Both;
}

PromptConfig parse_regime(const std::string& name) {
  static const std::regex re(R"(^(base|nar)?(?:\+?(aq|naq|both)([0-9]+))?$)");
  std::smatch m;
  if (name.empty() || !std::regex_match(name, m, re) || (!m[1].matched && !m[2].matched)) {
    throw ConfigError("unknown prompt regime '" + name +
                      "' (examples: base, nar, nar+aq3, nar+naq5, nar+both5, aq1)");
  }
  PromptConfig config;
  config.include_nar = m[1].matched && m[1].str() == "nar";
  if (m[2].matched) {
    if (m[1].matched && m[1].str() == "base") {
      throw ConfigError("regime 'base' takes no examples; drop the suffix or use the bare form (e.g. aq3)");
    }
    config.set_selection(example_selection_from_string(m[2].str()));
    config.shots = std::stoi(m[3].str());
    if (config.shots == 0) config.set_selection(ExampleSelection::None);
  }
  config.validate();
  return config;
}

std::string regime_name(const PromptConfig& config) {
  std::string name = config.include_nar ? "nar" : "";
  if (config.shots > 0 && config.selection() != ExampleSelection::None) {
    if (!name.empty()) name += "+";
    name += to_string(config.selection()) + std::to_string(config.shots);
  }
  return name.empty() ? "base" : name;
}

json prompt_config_to_json(const PromptConfig& config) {
  return {{"regime", regime_name(config)},
          {"shots", config.shots},
          {"nar", config.include_nar},
          {"examples", to_string(config.selection())},
          {"dialect", config.dialect}};
}

PromptConfig prompt_config_from_json(const json& j) {
  PromptConfig config;
  try {
    config.shots = j.at("shots").get<int>();
    config.include_nar = j.at("nar").get<bool>();
    config.set_selection(example_selection_from_string(j.at("examples").get<std::string>()));
    config.dialect = j.value("dialect", std::string("PostgreSQL"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("prompt config: ") + e.what());
  }
  config.validate();
  return config;
}

// ---------------------------------------------------------------------------

std::string role_instruction(const std::string& dialect) {
  return "You are an expert in natural language to SQL translation. Given a database schema and a "
         "question, write one syntactically correct " +
         dialect +
         " query that answers the question. Return only the SQL query, with no explanation, "
         "commentary or formatting around it.";
}

std::string nar_rules_text() {
  return "No-Answer Rules. Do not write SQL when the question cannot be answered faithfully from this "
         "database. Reply with exactly: unanswerable question\n"
         "Reply unanswerable question when:\n"
         "1. The question asks for an explanation, opinion or procedure that no SQL query can return.\n"
         "2. The question needs a column, table or data value that the schema does not contain.\n"
         "3. The question requires knowledge from outside this database or its domain.\n"
         "4. The question is ambiguous: several columns could be meant, a value could refer to "
         "several entities, it depends on context that was not given, or it implies a comparison "
         "without a clear operator or threshold.\n"
         "Otherwise return the SQL query only.";
}

std::string format_example(const QuestionItem& item) {
  if (item.answerable()) {
    if (!item.gold_sql || trim(*item.gold_sql).empty()) {
      throw ValidationError("answerable example '" + item.id + "' has no SQL");
    }
    return "[Q]: " + item.question + "\n[SQL]: " + *item.gold_sql;
  }
  return "[Q]: " + item.question + "\n[SQL]: " + std::string(kAbstentionMarker);
}

namespace {

std::vector<QuestionItem> retrieve(const std::string& question, const std::optional<std::string>& question_id,
                                   const ExampleStore* store, EmbeddingProvider* embedder, std::size_t k,
                                   const char* pool_name) {
  if (store == nullptr) throw RetrievalError(std::string("no ") + pool_name + " example pool configured");
  if (embedder == nullptr) throw RetrievalError("no embedding provider configured");
  try {
    const Vector query = embedder->embed_text(question);
    return top_k_similar(query, *store, k, question_id);
  } catch (const RetrievalError&) {
    throw;
  } catch (const Error& e) {
    throw RetrievalError(std::string(pool_name) + " example retrieval failed: " + e.what());
  }
}

}  // namespace

AssembledPrompt build_prompt(const std::string& question, const std::optional<std::string>& question_id,
                             const SchemaModel& schema, const PromptConfig& config, const ExamplePools& pools) {
  config.validate();
  AssembledPrompt prompt;

  std::ostringstream system;
  system << role_instruction(config.dialect) << "\n\n";
  if (config.include_nar) system << nar_rules_text() << "\n\n";
  system << "Database schema:\n" << render_schema_prompt(schema);
  prompt.system_text = system.str();

  std::ostringstream user;
  if (config.shots > 0) {
    const auto k = static_cast<std::size_t>(config.shots);
    if (config.include_answerable_examples) {
      for (const auto& item :
           retrieve(question, question_id, pools.answerable, pools.embedder, k, "answerable")) {
        user << format_example(item) << "\n\n";
        prompt.example_ids_used.push_back({Label::Answerable, item.id});
      }
    }
    if (config.include_unanswerable_examples) {
      for (const auto& item :
           retrieve(question, question_id, pools.unanswerable, pools.embedder, k, "unanswerable")) {
        user << format_example(item) << "\n\n";
        prompt.example_ids_used.push_back({Label::Unanswerable, item.id});
      }
    }
  }
  user << "# Return the SQL for the following Question\n[Q]: " << question << "\n[SQL]:";
  prompt.user_text = user.str();
  return prompt;
}

}  // namespace naqsql
