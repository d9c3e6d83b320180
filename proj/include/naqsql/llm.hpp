#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

namespace naqsql {

inline constexpr const char* kDefaultModel = "llama3.3:70b";

struct ChatRequest {
  std::string model = kDefaultModel;
  std::string system;
  // The original prompt followed by any re-prompt / correction messages.
  std::vector<std::string> user_turns;
  // Model replies to all but the last user turn, so the conversation can be
  // replayed as alternating messages.
  std::vector<std::string> assistant_turns;
  double temperature = 0.0;

  // Throws ValidationError: no user turn, negative temperature, or an
  // assistant turn count other than user_turns - 1.
  void validate() const;
};

struct ChatResponse {
  std::string text;
  std::chrono::milliseconds latency{0};
  std::map<std::string, std::string> provider_meta;
};

nlohmann::json request_to_json(const ChatRequest& request);
// OpenAI-style `messages` array: system, then alternating user/assistant.
nlohmann::json to_chat_messages(const ChatRequest& request);

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  // Cheap reachability check used by health probes.
  virtual bool probe() = 0;
  virtual std::string name() const = 0;
};

// Replays a fixed list of responses, one per call, in order. Used by tests
// and by deterministic desk-scale evaluation runs.
class ScriptedProvider final : public ChatProvider {
 public:
  explicit ScriptedProvider(std::vector<std::string> responses);
  // JSON array of strings.
  static std::shared_ptr<ScriptedProvider> from_file(const std::filesystem::path& path);

  ChatResponse complete(const ChatRequest& request) override;
  bool probe() override { return true; }
  std::string name() const override { return "scripted"; }

  std::size_t call_count() const;
  std::size_t remaining() const;
  std::vector<ChatRequest> requests() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> responses_;
  std::size_t next_ = 0;
  std::vector<ChatRequest> seen_;
};

struct HttpProviderOptions {
  // Full URL of an OpenAI-compatible chat-completions route, e.g.
  // http://localhost:11434/v1/chat/completions
  std::string endpoint;
  std::chrono::milliseconds timeout{120'000};
  int max_retries = 2;
  std::chrono::milliseconds backoff_base{500};
  std::string api_key;
};

class HttpChatProvider final : public ChatProvider {
 public:
  explicit HttpChatProvider(HttpProviderOptions options);

  ChatResponse complete(const ChatRequest& request) override;
  bool probe() override;
  std::string name() const override { return "http"; }

  std::size_t attempts() const { return attempts_; }

 private:
  HttpProviderOptions options_;
  std::string base_;
  std::string path_;
  std::size_t attempts_ = 0;
};

// Shared front for every pipeline run: applies the default model name and
// caps the number of concurrent requests reaching the provider.
class LlmClient {
 public:
  explicit LlmClient(std::shared_ptr<ChatProvider> provider, std::string default_model = kDefaultModel,
                     std::ptrdiff_t max_in_flight = 4);

  ChatResponse complete(ChatRequest request);

  const std::string& default_model() const { return default_model_; }
  ChatProvider& provider() { return *provider_; }

 private:
  std::shared_ptr<ChatProvider> provider_;
  std::string default_model_;
  std::counting_semaphore<1024> in_flight_;
};

// "scripted:<path>" or an http:// endpoint URL.
std::shared_ptr<ChatProvider> make_chat_provider(const std::string& spec, const HttpProviderOptions& base = {});

}  // namespace naqsql
