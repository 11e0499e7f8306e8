#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace relsynth::llm {

struct MockOptions {
  /// Scores handed out in turn to realism requests (schema "realism_score").
  std::vector<int> scores = {4};
  /// Entity requests: the first k answers to each distinct prompt are JSON that
  /// violates the schema.
  std::size_t invalid_first = 0;
  /// Entity requests: the first k answers to each distinct prompt are not JSON.
  std::size_t non_json_first = 0;
  /// The first k requests overall get HTTP 429.
  std::size_t rate_limit_first = 0;
  /// Answer every request with HTTP 503 (endpoint down).
  bool unavailable = false;
  /// Answer structured-output requests with HTTP 400 naming the schema.
  bool reject_schema = false;
  /// After this many successful entity answers, every request gets HTTP 503.
  std::size_t fail_after = static_cast<std::size_t>(-1);
};

/// In-process OpenAI-compatible endpoint for tests and offline runs.
///
/// Entity requests are answered by echoing the first reference document in the
/// prompt (a line that is a JSON object); without references a minimal
/// document is built from the schema. Realism requests get scripted scores.
class MockEndpoint {
 public:
  explicit MockEndpoint(MockOptions options = {}, int port = 0);
  ~MockEndpoint();
  MockEndpoint(const MockEndpoint&) = delete;
  MockEndpoint& operator=(const MockEndpoint&) = delete;

  int port() const;
  /// Base URL to put in an EndpointConfig ("http://127.0.0.1:<port>/v1").
  std::string url() const;
  std::size_t requests() const;
  std::size_t entity_requests() const;
  std::size_t score_requests() const;
  /// Blocks until stop() is called from another thread (for the CLI).
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace relsynth::llm
