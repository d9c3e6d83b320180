#include "naqsql/service.hpp"

#include <chrono>
#include <fstream>
#include <regex>

#include <httplib.h>

#include "naqsql/error.hpp"
#include "naqsql/sqltext.hpp"

namespace naqsql {

using nlohmann::json;

namespace {

std::string public_verdict(const PipelineVerdict& verdict) {
  if (std::holds_alternative<Executed>(verdict)) return "sql";
  return verdict_name(verdict);
}

json error_body(const std::string& stage, const std::string& message) {
  return {{"error", message}, {"stage", stage}};
}

bool valid_transcript_id(const std::string& id) {
  static const std::regex re("^[A-Za-z0-9_-]{1,64}$");
  return std::regex_match(id, re);
}

PromptConfig request_config(const json& request, const PromptConfig& defaults) {
  if (!request.contains("config") || request["config"].is_null()) return defaults;
  const json& c = request["config"];
  if (c.is_string()) {
    PromptConfig config = parse_regime(c.get<std::string>());
    config.dialect = defaults.dialect;
    return config;
  }
  if (!c.is_object()) throw ValidationError("config must be a regime string or an object");
  PromptConfig config = defaults;
  try {
    if (c.contains("nar")) config.include_nar = c["nar"].get<bool>();
    if (c.contains("shots")) config.shots = c["shots"].get<int>();
    if (c.contains("examples")) config.set_selection(example_selection_from_string(c["examples"].get<std::string>()));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  } catch (const ParseError& e) {
    throw ValidationError(e.what());
  }
  config.validate();
  return config;
}

}  // namespace

AskResponse to_ask_response(const PipelineOutcome& outcome, const std::string& transcript_id) {
  AskResponse r;
  r.verdict = public_verdict(outcome.verdict);
  r.sql = verdict_sql(outcome.verdict);
  if (const auto* executed = std::get_if<Executed>(&outcome.verdict)) {
    const auto& table = executed->table;
    const std::size_t shown = std::min(table.rows.size(), kPreviewRowCap);
    r.columns = table.columns;
    r.rows = std::vector<std::vector<Cell>>(table.rows.begin(), table.rows.begin() + static_cast<long>(shown));
    r.truncated = table.truncated || shown < table.rows.size();
    r.short_answer = outcome.short_answer;
  } else if (std::holds_alternative<Abstained>(outcome.verdict)) {
    r.explanation = outcome.explanation ? *outcome.explanation : std::string(kNoExplanationNotice);
  } else if (const auto* failed = std::get_if<DbFailed>(&outcome.verdict)) {
    r.error = failed->error.message;
  }
  for (const auto& s : outcome.stages) r.stages.push_back({s.name, s.status, s.detail});
  r.transcript_id = transcript_id;
  return r;
}

json ask_response_to_json(const AskResponse& r) {
  auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
  json j = {{"verdict", r.verdict},
            {"sql", opt(r.sql)},
            {"short_answer", opt(r.short_answer)},
            {"explanation", opt(r.explanation)},
            {"error", opt(r.error)},
            {"truncated", r.truncated},
            {"transcript_id", r.transcript_id}};
  j["columns"] = r.columns ? json(*r.columns) : json(nullptr);
  if (r.rows) {
    json rows = json::array();
    for (const auto& row : *r.rows) {
      json cells = json::array();
      for (const auto& c : row) cells.push_back(cell_to_json(c));
      rows.push_back(std::move(cells));
    }
    j["rows"] = std::move(rows);
  } else {
    j["rows"] = nullptr;
  }
  json stages = json::array();
  for (const auto& s : r.stages) stages.push_back({{"name", s.name}, {"status", s.status}, {"detail", s.detail}});
  j["stages"] = std::move(stages);
  return j;
}

Service::Service(Runtime& runtime) : runtime_(runtime) {
  if (const auto& dir = runtime_.settings().transcripts_dir) std::filesystem::create_directories(*dir);
}

std::vector<std::string> Service::list_models() const { return runtime_.models(); }

json Service::health() {
  bool db = false;
  if (runtime_.has_executor()) {
    try {
      db = runtime_.executor().ping();
    } catch (const std::exception&) {
      db = false;
    }
  }
  bool llm = false;
  try {
    llm = runtime_.provider().probe();
  } catch (const std::exception&) {
    llm = false;
  }
  return {{"db", db ? "ok" : "fail"}, {"llm", llm ? "ok" : "fail"}, {"version", kServiceVersion}};
}

std::string Service::store_transcript(const PipelineOutcome& outcome) {
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  const std::string id = "t" + std::to_string(now) + "-" + std::to_string(counter_.fetch_add(1));
  json doc = outcome_to_json(outcome);
  doc["transcript_id"] = id;
  if (const auto& dir = runtime_.settings().transcripts_dir) {
    std::ofstream out(*dir / (id + ".json"), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write transcript " + id);
    out << doc.dump(2) << "\n";
  }
  std::lock_guard lock(mu_);
  transcripts_.emplace(id, std::move(doc));
  return id;
}

std::optional<json> Service::transcript(const std::string& id) const {
  if (!valid_transcript_id(id)) return std::nullopt;
  {
    std::lock_guard lock(mu_);
    if (auto it = transcripts_.find(id); it != transcripts_.end()) return it->second;
  }
  if (const auto& dir = runtime_.settings().transcripts_dir) {
    std::ifstream in(*dir / (id + ".json"));
    if (in) {
      try {
        return json::parse(in);
      } catch (const json::parse_error&) {
        return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

HttpReply Service::handle_ask(const json& request) {
  std::string stage = "validation";
  try {
    if (!request.is_object() || !request.contains("question") || !request["question"].is_string()) {
      return {400, error_body(stage, "question is required")};
    }
    const std::string question = trim(request["question"].get<std::string>());
    if (question.empty()) return {400, error_body(stage, "question is empty")};

    PipelineOptions options;
    options.ui_mode = true;
    options.correction_loop = runtime_.settings().correction_loop;
    options.limits = runtime_.settings().limits;
    if (request.contains("model") && !request["model"].is_null()) {
      const std::string model = request["model"].get<std::string>();
      const auto models = list_models();
      if (std::find(models.begin(), models.end(), model) == models.end()) {
        return {400, error_body(stage, "unknown model '" + model + "'")};
      }
      options.model = model;
    }
    const PromptConfig config = request_config(request, runtime_.settings().prompt);

    stage = "pipeline";
    const PipelineOutcome outcome = answer_question(question, std::nullopt, runtime_.context(), config, options);
    stage = "transcript";
    const std::string id = store_transcript(outcome);
    return {200, ask_response_to_json(to_ask_response(outcome, id))};
  } catch (const ValidationError& e) {
    return {400, error_body(stage, e.what())};
  } catch (const ConfigError& e) {
    return {400, error_body(stage, e.what())};
  } catch (const json::exception& e) {
    return {400, error_body(stage, e.what())};
  } catch (const LlmError& e) {
    return {502, error_body("llm", e.what())};
  } catch (const RetrievalError& e) {
    return {500, error_body("prompt", e.what())};
  } catch (const ConnectionError& e) {
    return {500, error_body("database", e.what())};
  } catch (const std::exception& e) {
    return {500, error_body(stage, e.what())};
  }
}

void Service::mount(httplib::Server& server) {
  auto send = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  server.Post("/api/ask", [this, send](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      send(res, 400, error_body("validation", std::string("invalid JSON: ") + e.what()));
      return;
    }
    const HttpReply reply = handle_ask(body);
    send(res, reply.status, reply.body);
  });
  server.Get("/api/models", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, 200, json{{"models", list_models()}});
  });
  server.Get("/api/health", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, 200, health());
  });
  server.Get(R"(/api/transcripts/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    if (auto doc = transcript(req.matches[1])) {
      send(res, 200, *doc);
    } else {
      send(res, 404, error_body("transcript", "no transcript '" + std::string(req.matches[1]) + "'"));
    }
  });
}

void serve(Service& service, const std::string& host, int port,
           const std::optional<std::filesystem::path>& static_dir) {
  httplib::Server server;
  service.mount(server);
  if (static_dir && !server.set_mount_point("/", static_dir->string())) {
    throw ConfigError("static directory " + static_dir->string() + " does not exist");
  }
  if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace naqsql
