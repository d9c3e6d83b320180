#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "naqsql/dataset.hpp"
#include "naqsql/executor.hpp"
#include "naqsql/llm.hpp"
#include "naqsql/pipeline.hpp"
#include "naqsql/retriever.hpp"
#include "naqsql/schema.hpp"

namespace testenv {

std::filesystem::path fixture(const std::string& name);

// Fixture schema, a private copy of the fixture database and the two
// example pools over the offline embeddings.
struct FixtureEnv {
  FixtureEnv();

  naqsql::SchemaModel schema;
  naqsql::SqliteExecutor executor;
  std::shared_ptr<naqsql::OfflineEmbeddings> embedder;
  naqsql::ExampleStore seed_pool;
  naqsql::ExampleStore naq_pool;

  naqsql::ExamplePools pools() const;
};

struct ScriptedRun {
  std::shared_ptr<naqsql::ScriptedProvider> provider;
  naqsql::PipelineOutcome outcome;
};

ScriptedRun run_scripted(FixtureEnv& env, std::vector<std::string> script, const std::string& question,
                         const naqsql::PipelineOptions& options,
                         const naqsql::PromptConfig& config = naqsql::PromptConfig{});

struct Scenario {
  std::string name;
  std::vector<std::string> script;
  bool correction_loop = true;
  bool ui_mode = false;
  std::string verdict;
  int reprompts = 0;
  int corrections = 0;
  std::size_t transcript = 0;  // all calls, enrichment included
  std::size_t core_calls = 0;
};

std::vector<Scenario> state_machine_scenarios();

// Returns an empty string when the run matches the scenario, otherwise a
// description of the first mismatch.
std::string check_scenario(FixtureEnv& env, const Scenario& scenario);

// A temporary directory removed on destruction.
struct TempDir {
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::filesystem::path path;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace testenv
