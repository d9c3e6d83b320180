#include "naqsql/runtime.hpp"

#include <fstream>

#include "naqsql/error.hpp"

namespace naqsql {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Connection strings may carry a scheme prefix; only the path part is
// resolved against the settings directory.
std::string resolve_connection(const std::filesystem::path& base, const std::string& conn) {
  for (const std::string prefix : {"sqlite-dump:", "sqlite:"}) {
    if (conn.rfind(prefix, 0) == 0) return prefix + resolve(base, conn.substr(prefix.size())).string();
  }
  if (conn.find("://") != std::string::npos) return conn;
  return resolve(base, conn).string();
}

}  // namespace

Settings settings_from_json(const json& j, const std::filesystem::path& base_dir) {
  Settings s;
  try {
    s.schema = resolve(base_dir, j.at("schema").get<std::string>());
    s.database = resolve_connection(base_dir, j.at("database").get<std::string>());
    if (j.contains("seed_pool") && !j["seed_pool"].is_null()) {
      s.seed_pool = resolve(base_dir, j["seed_pool"].get<std::string>());
    }
    if (j.contains("naq_pool") && !j["naq_pool"].is_null()) {
      s.naq_pool = resolve(base_dir, j["naq_pool"].get<std::string>());
    }
    if (j.contains("embeddings") && !j["embeddings"].is_null()) {
      const auto& e = j["embeddings"];
      if (e.is_string()) {
        s.embeddings_file = resolve(base_dir, e.get<std::string>());
      } else {
        s.embeddings_endpoint = e.at("endpoint").get<std::string>();
        s.embeddings_model = e.value("model", s.embeddings_model);
      }
    }
    if (j.contains("llm")) {
      const auto& l = j["llm"];
      std::string provider = l.value("provider", s.llm);
      if (provider.rfind("scripted:", 0) == 0) provider = "scripted:" + resolve(base_dir, provider.substr(9)).string();
      s.llm = provider;
      s.model = l.value("model", s.model);
      s.llm_timeout = std::chrono::milliseconds(static_cast<long>(l.value("timeout_s", 120.0) * 1000));
      s.max_in_flight = l.value("max_in_flight", 4);
    }
    s.models = j.value("models", std::vector<std::string>{});
    if (j.contains("prompt")) {
      const auto& p = j["prompt"];
      if (p.contains("regime")) {
        s.prompt = parse_regime(p["regime"].get<std::string>());
      } else {
        s.prompt = prompt_config_from_json(p);
      }
      s.prompt.dialect = p.value("dialect", s.prompt.dialect);
    }
    s.correction_loop = j.value("correction_loop", true);
    if (j.contains("limits")) {
      const auto& l = j["limits"];
      s.limits.timeout = std::chrono::milliseconds(static_cast<long>(l.value("timeout_s", 30.0) * 1000));
      s.limits.max_rows = l.value("max_rows", std::size_t{10'000});
    }
    if (j.contains("transcripts_dir") && !j["transcripts_dir"].is_null()) {
      s.transcripts_dir = resolve(base_dir, j["transcripts_dir"].get<std::string>());
    }
    if (j.contains("static_dir") && !j["static_dir"].is_null()) {
      s.static_dir = resolve(base_dir, j["static_dir"].get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("settings: ") + e.what());
  }
  return s;
}

Settings load_settings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open settings file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("settings file " + path.string() + ": " + e.what());
  }
  return settings_from_json(j, std::filesystem::absolute(path).parent_path());
}

Runtime::Runtime(Settings settings) : settings_(std::move(settings)) {
  schema_ = load_schema(settings_.schema);

  try {
    executor_ = open_executor(settings_.database);
  } catch (const ConnectionError& e) {
    executor_error_ = e.what();
  }

  if (settings_.embeddings_file) {
    embedder_ = OfflineEmbeddings::from_file(*settings_.embeddings_file);
  } else if (settings_.embeddings_endpoint) {
    embedder_ = std::make_shared<HttpEmbeddings>(
        HttpEmbeddingOptions{*settings_.embeddings_endpoint, settings_.embeddings_model});
  }
  if (embedder_) {
    if (settings_.seed_pool) {
      answerable_pool_ = ExampleStore::build(Label::Answerable, load_questions(*settings_.seed_pool), *embedder_);
    }
    if (settings_.naq_pool) {
      unanswerable_pool_ =
          ExampleStore::build(Label::Unanswerable, load_questions(*settings_.naq_pool), *embedder_);
    }
  }

  HttpProviderOptions http;
  http.timeout = settings_.llm_timeout;
  provider_ = make_chat_provider(settings_.llm, http);
  llm_ = std::make_unique<LlmClient>(provider_, settings_.model, settings_.max_in_flight);
}

Executor& Runtime::executor() {
  if (!executor_) throw ConnectionError(executor_error_);
  return *executor_;
}

ExamplePools Runtime::pools() const {
  return ExamplePools{answerable_pool_ ? &*answerable_pool_ : nullptr,
                      unanswerable_pool_ ? &*unanswerable_pool_ : nullptr, embedder_.get()};
}

PipelineContext Runtime::context() { return PipelineContext{schema_, *llm_, pools(), executor()}; }

std::vector<std::string> Runtime::models() const {
  if (!settings_.models.empty()) return settings_.models;
  return {settings_.model};
}

}  // namespace naqsql
