#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "naqsql/pipeline.hpp"
#include "naqsql/runtime.hpp"

namespace httplib {
class Server;
}

namespace naqsql {

inline constexpr const char* kServiceVersion = "0.1.0";
inline constexpr std::size_t kPreviewRowCap = 200;
inline constexpr const char* kNoExplanationNotice =
    "The question was judged unanswerable for this database, but no explanation could be generated.";

struct StageView {
  std::string name;
  std::string status;
  std::string detail;
};

struct AskResponse {
  std::string verdict;  // sql | abstained | unusable | db_failed
  std::optional<std::string> sql;
  std::optional<std::vector<std::string>> columns;
  std::optional<std::vector<std::vector<Cell>>> rows;
  bool truncated = false;  // preview cut at kPreviewRowCap or result cut at the executor row cap
  std::optional<std::string> short_answer;
  std::optional<std::string> explanation;
  std::optional<std::string> error;  // db error message for db_failed
  std::vector<StageView> stages;
  std::string transcript_id;
};

AskResponse to_ask_response(const PipelineOutcome& outcome, const std::string& transcript_id);
nlohmann::json ask_response_to_json(const AskResponse& response);

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

class Service {
 public:
  explicit Service(Runtime& runtime);

  // Body: {question, model?, config?}; config is a regime string or
  // {nar, shots, examples}.
  HttpReply handle_ask(const nlohmann::json& request);
  std::vector<std::string> list_models() const;
  nlohmann::json health();
  std::optional<nlohmann::json> transcript(const std::string& id) const;

  void mount(httplib::Server& server);

 private:
  std::string store_transcript(const PipelineOutcome& outcome);

  Runtime& runtime_;
  mutable std::mutex mu_;
  std::map<std::string, nlohmann::json> transcripts_;
  std::atomic<std::uint64_t> counter_{0};
};

// Blocks serving HTTP until the process is stopped.
void serve(Service& service, const std::string& host, int port,
           const std::optional<std::filesystem::path>& static_dir);

}  // namespace naqsql
