#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "naqsql/executor.hpp"
#include "naqsql/llm.hpp"
#include "naqsql/pipeline.hpp"
#include "naqsql/prompt.hpp"
#include "naqsql/retriever.hpp"
#include "naqsql/schema.hpp"

namespace naqsql {

// Contents of the JSON settings file. Relative paths are resolved against
// the directory holding the file.
struct Settings {
  std::filesystem::path schema;
  std::string database;  // executor connection string
  std::optional<std::filesystem::path> seed_pool;
  std::optional<std::filesystem::path> naq_pool;

  std::optional<std::filesystem::path> embeddings_file;
  std::optional<std::string> embeddings_endpoint;
  std::string embeddings_model = "Alibaba-NLP/gte-Qwen2-1.5B-instruct";

  std::string llm = "http://localhost:11434/v1/chat/completions";  // or scripted:<path>
  std::string model = kDefaultModel;
  std::vector<std::string> models;
  std::chrono::milliseconds llm_timeout{120'000};
  std::ptrdiff_t max_in_flight = 4;

  PromptConfig prompt;
  bool correction_loop = true;
  ExecLimits limits;

  std::optional<std::filesystem::path> transcripts_dir;
  std::optional<std::filesystem::path> static_dir;
};

Settings settings_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
Settings load_settings(const std::filesystem::path& path);

// Everything a pipeline run needs, opened from Settings. A database that
// cannot be opened is recorded rather than thrown so health checks can
// report it.
class Runtime {
 public:
  explicit Runtime(Settings settings);

  const Settings& settings() const { return settings_; }
  const SchemaModel& schema() const { return schema_; }
  LlmClient& llm() { return *llm_; }
  ChatProvider& provider() { return *provider_; }

  bool has_executor() const { return executor_ != nullptr; }
  const std::string& executor_error() const { return executor_error_; }
  // Throws ConnectionError when the database could not be opened.
  Executor& executor();

  EmbeddingProvider* embedder() { return embedder_.get(); }
  ExamplePools pools() const;
  PipelineContext context();

  std::vector<std::string> models() const;

 private:
  Settings settings_;
  SchemaModel schema_;
  std::unique_ptr<Executor> executor_;
  std::string executor_error_;
  std::shared_ptr<EmbeddingProvider> embedder_;
  std::optional<ExampleStore> answerable_pool_;
  std::optional<ExampleStore> unanswerable_pool_;
  std::shared_ptr<ChatProvider> provider_;
  std::unique_ptr<LlmClient> llm_;
};

}  // namespace naqsql
