#include "relsynth/llm/mock_endpoint.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "relsynth/error.hpp"

namespace relsynth::llm {

namespace {

using ojson = nlohmann::ordered_json;

bool type_allows(const ojson& type, const char* name) {
  if (type.is_string()) return type == name;
  if (type.is_array())
    for (const auto& t : type)
      if (t == name) return true;
  return false;
}

// Smallest document accepted by the entity schemas this project compiles.
ojson minimal_instance(const ojson& schema) {
  if (schema.contains("enum")) {
    for (const auto& v : schema["enum"])
      if (!v.is_null()) return v;
    return nullptr;
  }
  const ojson type = schema.value("type", ojson());
  if (type_allows(type, "object")) {
    ojson out = ojson::object();
    if (schema.contains("properties"))
      for (const auto& [k, v] : schema["properties"].items()) out[k] = minimal_instance(v);
    return out;
  }
  if (type_allows(type, "array")) return ojson::array();
  if (type_allows(type, "integer") || type_allows(type, "number")) return 0;
  if (type_allows(type, "string")) {
    const std::string pattern = schema.value("pattern", "");
    if (pattern.find("[0-9]{4}") != std::string::npos) return "2000-01-01 0:00";
    if (!pattern.empty()) return "0:00";
    return "";
  }
  return nullptr;
}

std::string first_reference(const std::string& prompt) {
  std::istringstream in(prompt);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() != '{') continue;
    const auto j = ojson::parse(line, nullptr, false);
    if (!j.is_discarded() && j.is_object()) return j.dump();
  }
  return {};
}

}  // namespace

struct MockEndpoint::Impl {
  MockOptions options;
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<std::size_t> requests{0};
  std::atomic<std::size_t> entity{0};
  std::atomic<std::size_t> score{0};
  std::atomic<std::size_t> entity_ok{0};
  std::mutex mu;
  std::map<std::string, std::size_t> seen;  // prompt -> answers so far

  void handle(const httplib::Request& req, httplib::Response& res) {
    const std::size_t n = requests++;
    auto reply_error = [&](int status, const std::string& message) {
      res.status = status;
      res.set_content(ojson{{"error", {{"message", message}}}}.dump(), "application/json");
    };
    if (options.unavailable || entity_ok.load() >= options.fail_after) return reply_error(503, "service unavailable");
    if (n < options.rate_limit_first) return reply_error(429, "rate limited");

    const auto body = ojson::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("messages")) return reply_error(400, "malformed request");
    std::string prompt;
    for (const auto& m : body["messages"])
      if (m.value("role", "") == "user") prompt = m.value("content", "");

    ojson schema;
    std::string schema_name;
    if (body.contains("response_format")) {
      const auto& js = body["response_format"].value("json_schema", ojson::object());
      schema = js.value("schema", ojson());
      schema_name = js.value("name", "");
      if (options.reject_schema) return reply_error(400, "response_format json_schema is not supported");
    }

    std::string content;
    if (schema_name == "realism_score") {
      const std::size_t k = score++;
      const int s = options.scores.empty() ? 3 : options.scores[k % options.scores.size()];
      content = ojson{{"reasoning", "mock verdict"}, {"score", s}}.dump();
    } else {
      ++entity;
      std::size_t answered = 0;
      {
        std::lock_guard lock(mu);
        answered = seen[prompt]++;
      }
      if (answered < options.non_json_first) {
        content = "this is not json";
      } else if (answered < options.non_json_first + options.invalid_first) {
        content = R"({"unexpected_field": true})";
      } else {
        content = first_reference(prompt);
        if (content.empty()) content = schema.is_null() ? "{}" : minimal_instance(schema).dump();
        ++entity_ok;
      }
    }
    const ojson out = {
        {"id", "mock-" + std::to_string(n)},
        {"object", "chat.completion"},
        {"model", body.value("model", "mock")},
        {"choices", ojson::array({{{"index", 0},
                                   {"message", {{"role", "assistant"}, {"content", content}}},
                                   {"finish_reason", "stop"}}})},
        {"usage",
         {{"prompt_tokens", prompt.size() / 4}, {"completion_tokens", content.size() / 4},
          {"total_tokens", (prompt.size() + content.size()) / 4}}}};
    res.set_content(out.dump(), "application/json");
  }
};

MockEndpoint::MockEndpoint(MockOptions options, int port) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->server.Post(R"(.*/chat/completions)",
                     [this](const httplib::Request& req, httplib::Response& res) { impl_->handle(req, res); });
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  } else {
    impl_->port = impl_->server.bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (impl_->port <= 0) throw EndpointError("mock endpoint: cannot bind a local port");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockEndpoint::~MockEndpoint() { stop(); }

int MockEndpoint::port() const { return impl_->port; }
std::string MockEndpoint::url() const { return "http://127.0.0.1:" + std::to_string(impl_->port) + "/v1"; }
std::size_t MockEndpoint::requests() const { return impl_->requests.load(); }
std::size_t MockEndpoint::entity_requests() const { return impl_->entity.load(); }
std::size_t MockEndpoint::score_requests() const { return impl_->score.load(); }

void MockEndpoint::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void MockEndpoint::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable() && impl_->thread.get_id() != std::this_thread::get_id()) impl_->thread.join();
}

}  // namespace relsynth::llm
