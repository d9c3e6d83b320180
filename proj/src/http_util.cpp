#include "http_util.hpp"

#include <httplib.h>

#include <thread>

#include "naqsql/error.hpp"

namespace naqsql::detail {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) {
    throw ConfigError("unsupported endpoint '" + url + "' (only http:// is supported)");
  }
  const std::size_t slash = url.find('/', scheme.size());
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

namespace {

void configure(httplib::Client& client, std::chrono::milliseconds timeout) {
  const auto secs = static_cast<time_t>(timeout.count() / 1000);
  const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
}

}  // namespace

HttpOutcome post_json(const std::string& base, const std::string& path, const nlohmann::json& payload,
                      const HttpRetryPolicy& policy) {
  httplib::Client client(base);
  configure(client, policy.timeout);
  httplib::Headers headers;
  if (!policy.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + policy.bearer_token);
  const std::string body = payload.dump();

  HttpOutcome outcome;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(policy.backoff_base * (1 << (attempt - 1)));
    ++outcome.attempts;
    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, body, "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - started;
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && elapsed >= policy.timeout * 9 / 10);
      outcome.failure = timed_out ? HttpFailure::Timeout : HttpFailure::Transport;
      outcome.detail = httplib::to_string(err);
      continue;
    }
    outcome.status = res->status;
    outcome.body = res->body;
    if (res->status >= 200 && res->status < 300) {
      outcome.failure = HttpFailure::None;
      outcome.detail.clear();
      return outcome;
    }
    outcome.failure = HttpFailure::Status;
    outcome.detail = "HTTP " + std::to_string(res->status);
    if (res->status != 429 && res->status < 500) return outcome;
  }
  return outcome;
}

bool http_reachable(const std::string& base, std::chrono::milliseconds timeout) {
  httplib::Client client(base);
  configure(client, timeout);
  auto res = client.Get("/");
  return static_cast<bool>(res);
}

}  // namespace naqsql::detail
