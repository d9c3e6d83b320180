#include <doctest.h>

#include <fstream>
#include <thread>

#include <httplib.h>

#include "naqsql/error.hpp"
#include "naqsql/runtime.hpp"
#include "naqsql/service.hpp"
#include "support/env.hpp"

using namespace naqsql;
using nlohmann::json;

namespace {

Settings fixture_settings(const testenv::TempDir& dir, const std::vector<std::string>& script) {
  const auto script_path = dir.path / "script.json";
  std::ofstream(script_path) << json(script).dump();
  Settings s;
  s.schema = testenv::fixture("oncomx_mini.schema.json");
  s.database = "sqlite-dump:" + testenv::fixture("oncomx_mini.sql").string();
  s.seed_pool = testenv::fixture("seed.json");
  s.naq_pool = testenv::fixture("naq.json");
  s.embeddings_file = testenv::fixture("embeddings.json");
  s.llm = "scripted:" + script_path.string();
  s.prompt = parse_regime("nar");
  s.prompt.dialect = "SQLite";
  return s;
}

std::size_t llm_stages(const json& body) {
  std::size_t n = 0;
  for (const auto& s : body["stages"]) n += s["name"] == "llm-called" ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("ask returns rows and a short answer") {
  testenv::TempDir dir;
  Runtime runtime(fixture_settings(dir, {"SELECT name FROM disease ORDER BY id", "There are six diseases."}));
  Service service(runtime);
  const HttpReply reply = service.handle_ask({{"question", "List the disease names."}});
  CHECK(reply.status == 200);
  const json& b = reply.body;
  CHECK(b["verdict"] == "sql");
  CHECK(b["sql"] == "SELECT name FROM disease ORDER BY id");
  CHECK(b["columns"] == json::array({"name"}));
  CHECK(b["rows"].size() == 6);
  CHECK(b["short_answer"] == "There are six diseases.");
  CHECK(b["truncated"] == false);
  CHECK(llm_stages(b) == 2);

  const auto doc = service.transcript(b["transcript_id"].get<std::string>());
  REQUIRE(doc);
  CHECK((*doc)["transcript"].size() == 2);
  CHECK(llm_stages(b) == (*doc)["transcript"].size());
}

TEST_CASE("ask abstains with an explanation or the fallback notice") {
  testenv::TempDir dir;
  {
    Runtime runtime(fixture_settings(dir, {"unanswerable question", "The schema has no drug table."}));
    Service service(runtime);
    const HttpReply reply = service.handle_ask({{"question", "Which approved drugs target the ERBB2 biomarker?"}});
    CHECK(reply.status == 200);
    CHECK(reply.body["verdict"] == "abstained");
    CHECK(reply.body["explanation"] == "The schema has no drug table.");
    CHECK(reply.body["rows"].is_null());
  }
  {
    Runtime runtime(fixture_settings(dir, {"unanswerable question"}));
    Service service(runtime);
    const HttpReply reply = service.handle_ask({{"question", "Which approved drugs target the ERBB2 biomarker?"}});
    CHECK(reply.status == 200);
    CHECK(reply.body["verdict"] == "abstained");
    CHECK(reply.body["explanation"] == kNoExplanationNotice);
  }
}

TEST_CASE("database failures report the last error") {
  testenv::TempDir dir;
  Runtime runtime(
      fixture_settings(dir, {"SELECT * FROM nope", "SELECT * FROM nope2", "SELECT * FROM nope3", "SELECT * FROM nope4"}));
  Service service(runtime);
  const HttpReply reply = service.handle_ask({{"question", "How many diseases are there?"}});
  CHECK(reply.status == 200);
  CHECK(reply.body["verdict"] == "db_failed");
  CHECK(reply.body["error"].get<std::string>().find("nope4") != std::string::npos);
}

TEST_CASE("request validation") {
  testenv::TempDir dir;
  Runtime runtime(fixture_settings(dir, {"SELECT 1"}));
  Service service(runtime);
  CHECK(service.handle_ask({{"question", ""}}).status == 400);
  CHECK(service.handle_ask({{"question", "   "}}).status == 400);
  CHECK(service.handle_ask(json::object()).status == 400);
  CHECK(service.handle_ask({{"question", 3}}).status == 400);
  CHECK(service.handle_ask({{"question", "q"}, {"model", "gpt-unknown"}}).status == 400);
  CHECK(service.handle_ask({{"question", "q"}, {"config", "nar+aq2"}}).status == 400);
  const HttpReply empty = service.handle_ask({{"question", ""}});
  CHECK(empty.body["stage"] == "validation");
}

TEST_CASE("unreachable LLM is a 502") {
  testenv::TempDir dir;
  Settings s = fixture_settings(dir, {});
  s.llm = "http://127.0.0.1:1/v1/chat/completions";
  s.llm_timeout = std::chrono::milliseconds(500);
  Runtime runtime(s);
  Service service(runtime);
  const HttpReply reply = service.handle_ask({{"question", "How many diseases are there?"}});
  CHECK(reply.status == 502);
  CHECK(reply.body["stage"] == "llm");
  CHECK(service.health()["llm"] == "fail");
}

TEST_CASE("models listing") {
  testenv::TempDir dir;
  {
    Runtime runtime(fixture_settings(dir, {}));
    CHECK(Service(runtime).list_models() == std::vector<std::string>{"llama3.3:70b"});
  }
  Settings s = fixture_settings(dir, {"SELECT 1", "One."});
  s.models = {"llama3.3:70b", "qwen2.5:72b"};
  Runtime runtime(s);
  Service service(runtime);
  CHECK(service.list_models() == s.models);
  const HttpReply reply = service.handle_ask({{"question", "One?"}, {"model", "qwen2.5:72b"}});
  CHECK(reply.status == 200);
  const auto doc = service.transcript(reply.body["transcript_id"].get<std::string>());
  REQUIRE(doc);
  CHECK((*doc)["transcript"][0]["request"]["model"] == "qwen2.5:72b");
}

TEST_CASE("health") {
  testenv::TempDir dir;
  {
    Runtime runtime(fixture_settings(dir, {}));
    const json h = Service(runtime).health();
    CHECK(h["db"] == "ok");
    CHECK(h["llm"] == "ok");
    CHECK(h["version"] == kServiceVersion);
  }
  Settings s = fixture_settings(dir, {"SELECT 1"});
  s.database = "sqlite:/nonexistent/oncomx.db";
  Runtime runtime(s);
  Service service(runtime);
  CHECK(service.health()["db"] == "fail");
  const HttpReply reply = service.handle_ask({{"question", "How many?"}});
  CHECK(reply.status == 500);
  CHECK(reply.body["stage"] == "database");
}

TEST_CASE("transcripts persist to the configured directory") {
  testenv::TempDir dir;
  Settings s = fixture_settings(dir, {"SELECT 1", "One."});
  s.transcripts_dir = dir.path;
  std::string id;
  {
    Runtime runtime(s);
    Service service(runtime);
    id = service.handle_ask({{"question", "One?"}}).body["transcript_id"];
    CHECK(std::filesystem::exists(dir.path / (id + ".json")));
    CHECK_FALSE(service.transcript("../../etc/passwd"));
    CHECK_FALSE(service.transcript("t-missing"));
  }
  Runtime runtime(s);
  Service fresh(runtime);
  const auto doc = fresh.transcript(id);
  REQUIRE(doc);
  CHECK((*doc)["transcript_id"] == id);
}

TEST_CASE("HTTP routes over loopback") {
  testenv::TempDir dir;
  Runtime runtime(fixture_settings(dir, {"SELECT count(*) AS n FROM disease", "Six."}));
  Service service(runtime);
  httplib::Server server;
  service.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/api/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["db"] == "ok");

  auto models = client.Get("/api/models");
  REQUIRE(models);
  CHECK(json::parse(models->body) == json{{"models", {"llama3.3:70b"}}});

  auto bad = client.Post("/api/ask", "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);

  auto ask = client.Post("/api/ask", json{{"question", "How many diseases are there?"}}.dump(), "application/json");
  REQUIRE(ask);
  CHECK(ask->status == 200);
  const json body = json::parse(ask->body);
  CHECK(body["verdict"] == "sql");
  CHECK(body["rows"] == json::array({json::array({6})}));
  CHECK(body["short_answer"] == "Six.");

  auto t = client.Get("/api/transcripts/" + body["transcript_id"].get<std::string>());
  REQUIRE(t);
  CHECK(t->status == 200);
  auto missing = client.Get("/api/transcripts/nothing-here");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  server.stop();
  thread.join();
}
