#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "relsynth/error.hpp"
#include "relsynth/llm/client.hpp"
#include "relsynth/llm/mock_endpoint.hpp"
#include "relsynth/llm/schema.hpp"
#include "relsynth/parallel.hpp"

using namespace relsynth;
using namespace relsynth::llm;

namespace {

// Answers each request with the next scripted (status, body) and records what it saw.
class ScriptedServer {
 public:
  explicit ScriptedServer(std::deque<std::pair<int, std::string>> script) : script_(std::move(script)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      bodies.push_back(req.body);
      auth.push_back(req.get_header_value("Authorization"));
      auto [status, body] = script_.empty() ? std::pair{500, std::string("exhausted")} : script_.front();
      if (!script_.empty()) script_.pop_front();
      res.status = status;
      res.set_content(body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  std::vector<std::string> bodies;
  std::vector<std::string> auth;

 private:
  httplib::Server server_;
  std::mutex mu_;
  std::deque<std::pair<int, std::string>> script_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion(const std::string& content, const std::string& finish = "stop") {
  return ojson{{"choices", ojson::array({{{"message", {{"role", "assistant"}, {"content", content}}},
                                          {"finish_reason", finish}}})},
               {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 5}}}}
      .dump();
}

EndpointConfig config_for(const std::string& url) {
  EndpointConfig c;
  c.url = url;
  c.backoff_ms = 1;
  c.timeout_s = 10;
  return c;
}

const ojson kSchema = ojson::parse(R"({"type": "object", "properties": {"sex": {"enum": ["F", "M"]}},
                                       "required": ["sex"], "additionalProperties": false})");

CompletionRequest entity_request(const std::string& prompt) {
  CompletionRequest r;
  r.messages = {{"user", prompt}};
  r.schema = kSchema;
  return r;
}

}  // namespace

TEST_CASE("client: request body asks for strict structured output") {
  EndpointConfig c;
  c.model = "m1";
  auto req = entity_request("hi");
  req.seed = 9;
  const auto body = build_request_body(c, req);
  CHECK(body["model"] == "m1");
  CHECK(body["messages"][0]["content"] == "hi");
  CHECK(body["temperature"] == 0.7);
  CHECK(body["seed"] == 9);
  CHECK(body["response_format"]["type"] == "json_schema");
  CHECK(body["response_format"]["json_schema"]["strict"] == true);
  CHECK(body["response_format"]["json_schema"]["schema"] == kSchema);
}

TEST_CASE("client: endpoint config parsing") {
  const auto c = EndpointConfig::from_json(R"({"url": "http://h:9/v1", "model": "x", "max_concurrency": 2})");
  CHECK(c.url == "http://h:9/v1");
  CHECK(c.max_concurrency == 2);
  CHECK(c.api_key_env == "RELSYNTH_API_KEY");
  CHECK_THROWS_AS(EndpointConfig::from_json("{"), ConfigError);
  CHECK_THROWS_AS(EndpointConfig::from_json(R"({"max_concurrency": 0})"), ConfigError);
}

TEST_CASE("client: mock echoes the first reference document") {
  MockEndpoint mock;
  const CompletionClient client(config_for(mock.url()));
  const auto res = client.complete(entity_request("Reference:\n{\"sex\": \"M\"}\nNow answer."));
  CHECK(ojson::parse(res.text) == ojson{{"sex", "M"}});
  CHECK(res.attempts == 1);
  // Without references the mock builds a minimal instance of the schema.
  const auto minimal = client.complete(entity_request("no references"));
  CHECK(ojson::parse(minimal.text).contains("sex"));
  CHECK(mock.entity_requests() == 2);
}

TEST_CASE("client: 429 twice then success") {
  MockOptions o;
  o.rate_limit_first = 2;
  MockEndpoint mock(o);
  const CompletionClient client(config_for(mock.url()));
  const auto res = client.complete(entity_request("{\"sex\": \"F\"}"));
  CHECK(res.attempts == 3);
  CHECK(ojson::parse(res.text)["sex"] == "F");
  CHECK(mock.requests() == 3);
}

TEST_CASE("client: error mapping") {
  SUBCASE("non-JSON content despite a schema") {
    MockOptions o;
    o.non_json_first = 1;
    MockEndpoint mock(o);
    CHECK_THROWS_AS(CompletionClient(config_for(mock.url())).complete(entity_request("x")), StructuredOutputError);
  }
  SUBCASE("schema refused") {
    MockOptions o;
    o.reject_schema = true;
    MockEndpoint mock(o);
    CHECK_THROWS_AS(CompletionClient(config_for(mock.url())).complete(entity_request("x")), SchemaRejectedError);
  }
  SUBCASE("endpoint down exhausts the retries") {
    MockOptions o;
    o.unavailable = true;
    MockEndpoint mock(o);
    CHECK_THROWS_AS(CompletionClient(config_for(mock.url())).complete(entity_request("x")), EndpointError);
    CHECK(mock.requests() == 3);
  }
  SUBCASE("nothing listening") {
    int port = 0;
    {
      MockEndpoint probe;
      port = probe.port();
    }
    CHECK_THROWS_AS(CompletionClient(config_for("http://127.0.0.1:" + std::to_string(port) + "/v1"))
                        .complete(entity_request("x")),
                    EndpointError);
  }
  SUBCASE("payload too large") {
    ScriptedServer s({{413, "{}"}});
    CHECK_THROWS_AS(CompletionClient(config_for(s.url())).complete(entity_request("x")), TokenLimitError);
  }
  SUBCASE("context length exceeded") {
    ScriptedServer s({{400, R"({"error": {"message": "This model's maximum context length is 4096 tokens"}})"}});
    CHECK_THROWS_AS(CompletionClient(config_for(s.url())).complete(entity_request("x")), TokenLimitError);
  }
  SUBCASE("truncated completion") {
    ScriptedServer s({{200, completion(R"({"sex": )", "length")}});
    CHECK_THROWS_AS(CompletionClient(config_for(s.url())).complete(entity_request("x")), TokenLimitError);
  }
  SUBCASE("other client errors are not retried") {
    ScriptedServer s({{404, "nope"}, {200, completion("{}")}});
    CHECK_THROWS_AS(CompletionClient(config_for(s.url())).complete(entity_request("x")), EndpointError);
    CHECK(s.bodies.size() == 1);
  }
}

TEST_CASE("client: usage, bearer token and retries on 5xx") {
  ScriptedServer s({{502, "bad gateway"}, {200, completion(R"({"sex": "M"})")}});
  auto cfg = config_for(s.url());
  cfg.api_key_env = "RELSYNTH_UNIT_TEST_KEY";
  ::setenv("RELSYNTH_UNIT_TEST_KEY", "sekret", 1);
  const auto res = CompletionClient(cfg).complete(entity_request("x"));
  ::unsetenv("RELSYNTH_UNIT_TEST_KEY");
  CHECK(res.text == R"({"sex": "M"})");
  CHECK(res.finish_reason == "stop");
  CHECK(res.usage.prompt == 12);
  CHECK(res.usage.completion == 5);
  CHECK(res.attempts == 2);
  REQUIRE(s.auth.size() == 2);
  CHECK(s.auth[1] == "Bearer sekret");
}

TEST_CASE("client: mock judge returns scripted scores") {
  MockOptions o;
  o.scores = {1, 2, 3, 4, 5};
  MockEndpoint mock(o);
  const CompletionClient client(config_for(mock.url()));
  CompletionRequest r;
  r.messages = {{"user", "judge this"}};
  r.schema = realism_score_schema();
  r.schema_name = "realism_score";
  for (int expected = 1; expected <= 5; ++expected) CHECK(ojson::parse(client.complete(r).text)["score"] == expected);
  CHECK(mock.score_requests() == 5);
}

TEST_CASE("parallel: run_bounded visits every index once and keeps errors per index") {
  std::vector<std::atomic<int>> hits(100);
  std::atomic<int> active{0}, peak{0};
  const auto errors = run_bounded(100, 3, [&](std::size_t i) {
    const int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    ++hits[i];
    std::this_thread::sleep_for(std::chrono::microseconds(200));
    --active;
    if (i % 10 == 0) throw std::runtime_error("boom");
  });
  for (const auto& h : hits) CHECK(h == 1);
  CHECK(peak <= 3);
  for (std::size_t i = 0; i < errors.size(); ++i) CHECK(static_cast<bool>(errors[i]) == (i % 10 == 0));
}
