#include "relsynth/llm/client.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "relsynth/error.hpp"

namespace relsynth::llm {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host:port
  std::string path;    // base path without trailing slash
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  if (url.compare(0, scheme_end, "http") != 0) throw ConfigError("only http endpoints are supported: " + url);
  return out;
}

bool mentions(const std::string& body, std::initializer_list<const char*> words) {
  std::string lower(body);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return std::any_of(words.begin(), words.end(), [&](const char* w) { return lower.find(w) != std::string::npos; });
}

}  // namespace

EndpointConfig EndpointConfig::from_json(const std::string& text) {
  EndpointConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.url = j.value("url", c.url);
    c.model = j.value("model", c.model);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
    c.temperature = j.value("temperature", c.temperature);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.context_tokens = j.value("context_tokens", c.context_tokens);
    c.attempts = j.value("attempts", c.attempts);
    c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed endpoint config: ") + e.what());
  }
  if (c.max_concurrency == 0) throw ConfigError("max_concurrency must be at least 1");
  if (c.attempts < 1) throw ConfigError("attempts must be at least 1");
  split_url(c.url);
  return c;
}

EndpointConfig EndpointConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open endpoint config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

ojson build_request_body(const EndpointConfig& config, const CompletionRequest& request) {
  ojson messages = ojson::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  ojson body = {{"model", config.model},
                {"messages", std::move(messages)},
                {"temperature", request.temperature.value_or(config.temperature)},
                {"max_tokens", request.max_tokens.value_or(config.max_tokens)}};
  if (request.seed) body["seed"] = *request.seed;
  if (request.schema) {
    body["response_format"] = {
        {"type", "json_schema"},
        {"json_schema", {{"name", request.schema_name}, {"strict", true}, {"schema", *request.schema}}}};
  }
  return body;
}

struct CompletionClient::Impl {
  explicit Impl(std::size_t slots) : slots(static_cast<std::ptrdiff_t>(slots)) {}
  std::counting_semaphore<> slots;
};

CompletionClient::CompletionClient(EndpointConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>(std::max<std::size_t>(config_.max_concurrency, 1))) {
  split_url(config_.url);
}

CompletionClient::~CompletionClient() = default;

CompletionResponse CompletionClient::complete(const CompletionRequest& request) const {
  const auto url = split_url(config_.url);
  const std::string path = url.path + "/chat/completions";
  const std::string body = build_request_body(config_, request).dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  impl_->slots.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{impl_->slots};

  httplib::Client cli(url.origin);
  cli.set_connection_timeout(config_.timeout_s, 0);
  cli.set_read_timeout(config_.timeout_s, 0);
  cli.set_write_timeout(config_.timeout_s, 0);

  std::string last_error;
  for (int attempt = 1; attempt <= config_.attempts; ++attempt) {
    if (attempt > 1)
      std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms * (1 << std::min(attempt - 2, 10))));
    auto res = cli.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status == 413 || (res->status == 400 && mentions(res->body, {"context length", "context_length", "too many tokens", "maximum context"})))
      throw TokenLimitError("endpoint rejected the prompt as too long: " + res->body);
    if (res->status == 400 && request.schema && mentions(res->body, {"schema", "response_format"}))
      throw SchemaRejectedError("endpoint rejected the structured output schema: " + res->body);
    if (res->status != 200) throw EndpointError("HTTP " + std::to_string(res->status) + ": " + res->body);

    CompletionResponse out;
    out.attempts = attempt;
    try {
      const auto j = nlohmann::json::parse(res->body);
      const auto& choice = j.at("choices").at(0);
      const auto& content = choice.at("message").at("content");
      out.text = content.is_string() ? content.get<std::string>() : std::string();
      if (choice.contains("finish_reason") && choice["finish_reason"].is_string())
        out.finish_reason = choice["finish_reason"].get<std::string>();
      if (j.contains("usage") && j["usage"].is_object()) {
        out.usage.prompt = j["usage"].value("prompt_tokens", std::size_t{0});
        out.usage.completion = j["usage"].value("completion_tokens", std::size_t{0});
      }
    } catch (const nlohmann::json::exception& e) {
      throw EndpointError(std::string("malformed completion response: ") + e.what());
    }
    if (out.finish_reason == "length") throw TokenLimitError("completion truncated at max_tokens");
    if (request.schema && !nlohmann::json::accept(out.text))
      throw StructuredOutputError("endpoint returned content that is not JSON");
    return out;
  }
  throw EndpointError("endpoint unavailable after " + std::to_string(config_.attempts) + " attempts (" +
                      last_error + ")");
}

}  // namespace relsynth::llm
