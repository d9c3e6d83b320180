#include "naqsql/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "naqsql/error.hpp"
#include "naqsql/llm.hpp"
#include "naqsql/sqltext.hpp"

namespace naqsql {

using nlohmann::json;

namespace {

struct CategoryInfo {
  NaqCategory category;
  std::string_view name;
  std::string_view definition;
};

constexpr std::array<CategoryInfo, 8> kCategories = {{
    {NaqCategory::NonSql, "NonSql",
     "The question asks for an explanation, opinion or procedure. No SELECT statement over any "
     "table could produce the answer, even though the topic may be relevant to the database."},
    {NaqCategory::ColumnsMissing, "ColumnsMissing",
     "The question needs an attribute that no column of the schema stores."},
    {NaqCategory::ValuesMissing, "ValuesMissing",
     "The relevant columns exist, but the question filters on a value that does not occur in the "
     "data."},
    {NaqCategory::OutOfDomain, "OutOfDomain",
     "Answering requires outside knowledge such as publications, events or other data sources that "
     "the database does not cover."},
    {NaqCategory::ColumnAmbiguous, "ColumnAmbiguous",
     "Several columns could each satisfy the request, and the question gives no way to pick one."},
    {NaqCategory::ValueAmbiguous, "ValueAmbiguous",
     "A value mentioned in the question can refer to several different entities or meanings in the "
     "data."},
    {NaqCategory::ContextualAmbiguous, "ContextualAmbiguous",
     "The question relies on context that was never given, for example a pronoun with no referent."},
    {NaqCategory::OperatorAmbiguous, "OperatorAmbiguous",
     "The question implies a comparison or threshold but leaves the operator or cut-off vague."},
}};

const CategoryInfo& info(NaqCategory category) {
  for (const auto& c : kCategories) {
    if (c.category == category) return c;
  }
  throw ValidationError("unknown category");
}

std::optional<std::string> optional_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

// "1. foo", "- foo", "* foo", "2) foo" -> "foo"
std::string strip_list_marker(std::string line) {
  line = trim(line);
  std::size_t i = 0;
  if (!line.empty() && (line[0] == '-' || line[0] == '*' || line[0] == '+')) {
    i = 1;
  } else {
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
      ++i;
    } else {
      i = 0;
    }
  }
  line = trim(std::string_view(line).substr(i));
  if (line.size() >= 2 && line.front() == '"' && line.back() == '"') line = line.substr(1, line.size() - 2);
  return trim(line);
}

}  // namespace

std::string_view to_string(NaqCategory category) { return info(category).name; }

NaqCategory naq_category_from_string(std::string_view name) {
  for (const auto& c : kCategories) {
    if (c.name == name) return c.category;
  }
  std::string legal;
  for (const auto& c : kCategories) {
    if (!legal.empty()) legal += ", ";
    legal += c.name;
  }
  throw ValidationError("unknown category '" + std::string(name) + "'; expected one of: " + legal);
}

std::string_view to_string(Label label) {
  return label == Label::Answerable ? "answerable" : "unanswerable";
}

void QuestionItem::validate() const {
  if (id.empty()) throw ValidationError("question item with empty id");
  if (trim(question).empty()) throw ValidationError("question item '" + id + "' has empty question text");
  if (label == Label::Answerable) {
    if (!gold_sql || trim(*gold_sql).empty()) {
      throw ValidationError("answerable item '" + id + "' has no gold_sql");
    }
    if (category) throw ValidationError("answerable item '" + id + "' must not carry a category");
  } else {
    if (!category) throw ValidationError("unanswerable item '" + id + "' has no category");
    if (gold_sql) throw ValidationError("unanswerable item '" + id + "' must not carry gold_sql");
  }
}

json item_to_json(const QuestionItem& item) {
  return {{"id", item.id},
          {"question", item.question},
          {"label", std::string(to_string(item.label))},
          {"gold_sql", item.gold_sql ? json(*item.gold_sql) : json(nullptr)},
          {"category", item.category ? json(std::string(to_string(*item.category))) : json(nullptr)}};
}

QuestionItem item_from_json(const json& j) {
  QuestionItem item;
  try {
    item.id = j.at("id").get<std::string>();
    item.question = j.at("question").get<std::string>();
    const auto label = j.at("label").get<std::string>();
    if (label == "answerable") {
      item.label = Label::Answerable;
    } else if (label == "unanswerable") {
      item.label = Label::Unanswerable;
    } else {
      throw ValidationError("item '" + item.id + "': label must be 'answerable' or 'unanswerable', got '" +
                            label + "'");
    }
    item.gold_sql = optional_string(j, "gold_sql");
    if (auto category = optional_string(j, "category")) item.category = naq_category_from_string(*category);
  } catch (const json::exception& e) {
    throw ParseError(std::string("dataset item: ") + e.what());
  }
  item.validate();
  return item;
}

std::vector<QuestionItem> parse_questions(const json& doc) {
  if (!doc.is_array()) throw ParseError("dataset must be a JSON array");
  std::vector<QuestionItem> items;
  std::unordered_set<std::string> ids;
  for (const auto& j : doc) {
    QuestionItem item = item_from_json(j);
    if (!ids.insert(item.id).second) throw ValidationError("duplicate question id '" + item.id + "'");
    items.push_back(std::move(item));
  }
  return items;
}

json serialize_questions(const std::vector<QuestionItem>& items) {
  json out = json::array();
  for (const auto& item : items) out.push_back(item_to_json(item));
  return out;
}

std::vector<QuestionItem> load_questions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("dataset " + path.string() + ": " + e.what());
  }
  return parse_questions(doc);
}

// ---------------------------------------------------------------------------

GoldResultCache build_gold_cache(const std::vector<QuestionItem>& items, Executor& executor,
                                 const ExecLimits& limits) {
  GoldResultCache cache;
  for (const auto& item : items) {
    if (!item.answerable()) continue;
    auto result = executor.execute_sql(*item.gold_sql, limits);
    GoldEntry entry;
    if (auto* table = std::get_if<ResultTable>(&result)) {
      entry.table = std::move(*table);
    } else {
      entry.error = std::get<ExecError>(result).message;
    }
    cache[item.id] = std::move(entry);
  }
  return cache;
}

json gold_cache_to_json(const GoldResultCache& cache) {
  json out = json::object();
  for (const auto& [id, entry] : cache) {
    json e;
    if (entry.table) {
      e = table_to_json(*entry.table);
    } else {
      e["columns"] = json::array();
      e["rows"] = json::array();
    }
    e["error"] = entry.error ? json(*entry.error) : json(nullptr);
    out[id] = std::move(e);
  }
  return out;
}

GoldResultCache gold_cache_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("gold cache must be a JSON object");
  GoldResultCache cache;
  for (const auto& [id, e] : j.items()) {
    GoldEntry entry;
    if (auto err = optional_string(e, "error")) {
      entry.error = std::move(err);
    } else {
      entry.table = table_from_json(e);
    }
    cache[id] = std::move(entry);
  }
  return cache;
}

void write_gold_cache(const GoldResultCache& cache, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write gold cache " + path.string());
  out << gold_cache_to_json(cache).dump(2) << "\n";
}

GoldResultCache load_gold_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open gold cache " + path.string());
  try {
    return gold_cache_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError("gold cache " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

std::string_view category_definition(NaqCategory category) { return info(category).definition; }

std::string naq_generation_prompt(const SchemaModel& schema, NaqCategory category, std::size_t n) {
  std::ostringstream out;
  out << "You help build a test set of questions that a text-to-SQL system must refuse to answer.\n"
      << "Below is the schema of the target database.\n\n"
      << render_schema_prompt(schema) << "\n"
      << "Category: " << to_string(category) << "\n"
      << "Definition: " << category_definition(category) << "\n\n"
      << "Write " << n << " realistic questions a domain user might ask that fall into this category "
      << "for the database above. Output one question per line with no numbering and no commentary.\n";
  return out.str();
}

NaqCandidates generate_naq_candidates(const SchemaModel& schema, NaqCategory category, std::size_t n,
                                      LlmClient& llm) {
  if (n == 0) throw ValidationError("candidate count must be at least 1");

  ChatRequest request;
  request.model = llm.default_model();
  request.system = "You write evaluation data for database question answering systems.";
  request.user_turns.push_back(naq_generation_prompt(schema, category, n));
  const ChatResponse response = llm.complete(std::move(request));

  NaqCandidates out{category, {}, true};
  std::set<std::string> seen;
  std::istringstream lines(response.text);
  std::string line;
  while (std::getline(lines, line) && out.questions.size() < n) {
    std::string candidate = strip_list_marker(line);
    if (candidate.empty()) continue;
    if (!seen.insert(to_lower(candidate)).second) continue;
    out.questions.push_back(std::move(candidate));
  }
  if (out.questions.empty()) {
    throw EmptyGeneration("model returned no usable candidates for category " + std::string(to_string(category)));
  }
  return out;
}

}  // namespace naqsql
