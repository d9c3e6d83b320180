#pragma once

#include <chrono>
#include <string>
#include <utility>

#include <json.hpp>

namespace naqsql::detail {

// Splits "http://host:port/path" into ("http://host:port", "/path").
// Throws ConfigError for anything other than plain http.
std::pair<std::string, std::string> split_url(const std::string& url);

struct HttpRetryPolicy {
  std::chrono::milliseconds timeout{120'000};
  int max_retries = 2;
  std::chrono::milliseconds backoff_base{500};
  std::string bearer_token;
};

enum class HttpFailure { None, Timeout, Transport, Status };

struct HttpOutcome {
  HttpFailure failure = HttpFailure::None;
  int status = 0;
  std::string body;
  std::string detail;
  int attempts = 0;
};

// POSTs JSON, retrying transport errors, 429 and 5xx with exponential
// backoff. Other 4xx statuses are returned without retrying.
HttpOutcome post_json(const std::string& base, const std::string& path, const nlohmann::json& payload,
                      const HttpRetryPolicy& policy);

bool http_reachable(const std::string& base, std::chrono::milliseconds timeout);

}  // namespace naqsql::detail
