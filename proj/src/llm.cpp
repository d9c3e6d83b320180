#include "naqsql/llm.hpp"

#include <algorithm>
#include <fstream>

#include "http_util.hpp"
#include "naqsql/error.hpp"

namespace naqsql {

using nlohmann::json;

void ChatRequest::validate() const {
  if (user_turns.empty()) throw ValidationError("chat request needs at least one user turn");
  if (temperature < 0.0) throw ValidationError("chat request temperature must be >= 0");
  if (assistant_turns.size() + 1 != user_turns.size()) {
    throw ValidationError("chat request must have exactly one assistant turn between user turns");
  }
}

json to_chat_messages(const ChatRequest& request) {
  json messages = json::array();
  if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
  for (std::size_t i = 0; i < request.user_turns.size(); ++i) {
    messages.push_back({{"role", "user"}, {"content", request.user_turns[i]}});
    if (i < request.assistant_turns.size()) {
      messages.push_back({{"role", "assistant"}, {"content", request.assistant_turns[i]}});
    }
  }
  return messages;
}

json request_to_json(const ChatRequest& request) {
  return {{"model", request.model},
          {"temperature", request.temperature},
          {"messages", to_chat_messages(request)}};
}

// ---------------------------------------------------------------------------

ScriptedProvider::ScriptedProvider(std::vector<std::string> responses) : responses_(std::move(responses)) {}

std::shared_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open LLM script " + path.string());
  try {
    return std::make_shared<ScriptedProvider>(json::parse(in).get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw ParseError("LLM script " + path.string() + " must be a JSON array of strings: " + e.what());
  }
}

ChatResponse ScriptedProvider::complete(const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  seen_.push_back(request);
  if (next_ >= responses_.size()) throw LlmError("script exhausted");
  ChatResponse response;
  response.text = responses_[next_++];
  response.provider_meta["provider"] = "scripted";
  response.provider_meta["index"] = std::to_string(next_ - 1);
  return response;
}

std::size_t ScriptedProvider::call_count() const {
  std::lock_guard lock(mutex_);
  return seen_.size();
}

std::size_t ScriptedProvider::remaining() const {
  std::lock_guard lock(mutex_);
  return responses_.size() - next_;
}

std::vector<ChatRequest> ScriptedProvider::requests() const {
  std::lock_guard lock(mutex_);
  return seen_;
}

// ---------------------------------------------------------------------------

HttpChatProvider::HttpChatProvider(HttpProviderOptions options) : options_(std::move(options)) {
  std::tie(base_, path_) = detail::split_url(options_.endpoint);
}

ChatResponse HttpChatProvider::complete(const ChatRequest& request) {
  json payload = request_to_json(request);
  payload["stream"] = false;

  detail::HttpRetryPolicy policy{options_.timeout, options_.max_retries, options_.backoff_base, options_.api_key};
  const auto started = std::chrono::steady_clock::now();
  const auto outcome = detail::post_json(base_, path_, payload, policy);
  attempts_ += static_cast<std::size_t>(outcome.attempts);

  switch (outcome.failure) {
    case detail::HttpFailure::None: break;
    case detail::HttpFailure::Timeout:
      throw TimeoutError("LLM endpoint " + options_.endpoint + " timed out after " +
                         std::to_string(outcome.attempts) + " attempt(s)");
    case detail::HttpFailure::Transport:
    case detail::HttpFailure::Status:
      throw LlmError("LLM endpoint " + options_.endpoint + " failed after " + std::to_string(outcome.attempts) +
                     " attempt(s): " + outcome.detail);
  }

  ChatResponse response;
  response.latency =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
  try {
    const json body = json::parse(outcome.body);
    if (body.contains("choices")) {
      response.text = body.at("choices").at(0).at("message").at("content").get<std::string>();
    } else {
      // Ollama's native /api/chat shape.
      response.text = body.at("message").at("content").get<std::string>();
    }
    if (body.contains("model") && body["model"].is_string()) {
      response.provider_meta["model"] = body["model"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw LlmError("LLM endpoint returned an unexpected body: " + std::string(e.what()));
  }
  response.provider_meta["provider"] = "http";
  response.provider_meta["attempts"] = std::to_string(outcome.attempts);
  return response;
}

bool HttpChatProvider::probe() { return detail::http_reachable(base_, std::chrono::milliseconds(3000)); }

// ---------------------------------------------------------------------------

LlmClient::LlmClient(std::shared_ptr<ChatProvider> provider, std::string default_model, std::ptrdiff_t max_in_flight)
    : provider_(std::move(provider)),
      default_model_(std::move(default_model)),
      in_flight_(std::clamp<std::ptrdiff_t>(max_in_flight, 1, 1024)) {
  if (!provider_) throw ConfigError("LLM client needs a provider");
}

ChatResponse LlmClient::complete(ChatRequest request) {
  if (request.model.empty()) request.model = default_model_;
  request.validate();
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& sem;
    ~Release() { sem.release(); }
  } release{in_flight_};
  const auto started = std::chrono::steady_clock::now();
  ChatResponse response = provider_->complete(request);
  if (response.latency.count() == 0) {
    response.latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
  }
  return response;
}

std::shared_ptr<ChatProvider> make_chat_provider(const std::string& spec, const HttpProviderOptions& base) {
  if (spec.rfind("scripted:", 0) == 0) return ScriptedProvider::from_file(spec.substr(9));
  HttpProviderOptions options = base;
  options.endpoint = spec;
  return std::make_shared<HttpChatProvider>(options);
}

}  // namespace naqsql
