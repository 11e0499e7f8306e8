#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace relsynth::llm {

using ojson = nlohmann::ordered_json;

/// Connection settings of an OpenAI-compatible chat-completions endpoint.
struct EndpointConfig {
  std::string url = "http://127.0.0.1:8000/v1";  // base; "/chat/completions" is appended
  std::string model = "default";
  std::string api_key_env = "RELSYNTH_API_KEY";  // bearer token source; unset means no header
  std::size_t max_concurrency = 4;
  double temperature = 0.7;
  std::size_t max_tokens = 2048;
  std::size_t context_tokens = 8192;  // prompt budget before references are dropped
  int attempts = 3;                   // per request, for transport errors, 429 and 5xx
  int backoff_ms = 250;
  int timeout_s = 300;

  static EndpointConfig from_json(const std::string& text);
  static EndpointConfig load(const std::filesystem::path& path);
};

struct ChatMessage {
  std::string role;
  std::string content;
};

struct CompletionRequest {
  std::vector<ChatMessage> messages;
  std::optional<ojson> schema;  // structured output schema
  std::string schema_name = "entity";
  std::optional<double> temperature;
  std::optional<std::size_t> max_tokens;
  std::optional<std::uint64_t> seed;
};

struct TokenUsage {
  std::size_t prompt = 0;
  std::size_t completion = 0;
};

struct CompletionResponse {
  std::string text;
  std::string finish_reason;
  TokenUsage usage;
  int attempts = 0;  // HTTP attempts spent, including retries
};

/// Request body for POST {url}/chat/completions.
ojson build_request_body(const EndpointConfig& config, const CompletionRequest& request);

/// Blocking client; safe to call from several threads, with at most
/// `max_concurrency` requests in flight per client.
class CompletionClient {
 public:
  explicit CompletionClient(EndpointConfig config);
  ~CompletionClient();
  CompletionClient(const CompletionClient&) = delete;
  CompletionClient& operator=(const CompletionClient&) = delete;

  const EndpointConfig& config() const { return config_; }

  /// Throws SchemaRejectedError when the server refuses the schema,
  /// TokenLimitError on truncation or context overflow, StructuredOutputError
  /// when a schema was requested but the content is not JSON, and
  /// EndpointError when retries are exhausted.
  CompletionResponse complete(const CompletionRequest& request) const;

 private:
  struct Impl;
  EndpointConfig config_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace relsynth::llm
