#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "relsynth/dataset.hpp"
#include "relsynth/discretize.hpp"
#include "relsynth/llm/client.hpp"
#include "relsynth/llm/prompt.hpp"
#include "relsynth/llm/schema.hpp"
#include "relsynth/pgm.hpp"
#include "relsynth/similarity.hpp"

namespace relsynth {

/// Everything synthesis reads. References are drawn from `index`, whose
/// entity indices point into `source`.
struct SynthesisContext {
  const RelationalDataset& source;
  const DiscretizationSpec& spec;
  const DpBayesNet& net;
  const SimilarityIndex& index;
  const llm::PromptTemplate& prompt;
  const llm::CompletionClient& client;
};

struct SynthesisOptions {
  std::size_t samples = 0;          // m
  std::size_t references = 3;       // n, may be 0
  std::uint64_t seed = 0;           // master seed; the "sampling" substream is used
  std::size_t regenerations = 2;    // extra attempts after an invalid response
  std::size_t checkpoint_every = 50;
  std::filesystem::path out_dir;    // empty: nothing is written
  bool resume = false;
  /// Stop after this many samples are logged, as if the process were killed.
  std::optional<std::size_t> stop_after;
};

struct SampleRecord {
  std::size_t sample = 0;
  bool ok = false;
  std::vector<llm::ConditioningLine> conditioning;
  std::vector<std::string> references;  // entity keys, most similar first
  std::size_t attempts = 0;
  llm::TokenUsage usage;
  double wall_ms = 0.0;
  std::string response;  // last raw response text
  std::string error;     // reason for failure, empty when ok
  std::size_t clamped = 0;

  nlohmann::json to_json() const;
  static SampleRecord from_json(const nlohmann::json& j);
};

struct SynthesisResult {
  RelationalDataset dataset;
  std::vector<SampleRecord> log;  // in sample order
  std::size_t failed = 0;
  bool complete = true;  // false when stopped early
};

constexpr const char* kSynthesisLogName = "synthesis_log.jsonl";

/// Generates `samples` entities. Each sample is sampled from the network on
/// its own stream, paired with its top-n references, rendered, completed and
/// validated; invalid answers are regenerated up to `regenerations` times and
/// then dropped. Keys are minted in sample order. Endpoint failures abort after
/// the partial output is written.
SynthesisResult synthesize(const SynthesisContext& ctx, const SynthesisOptions& options);

/// Reads a synthesis log.
std::vector<SampleRecord> read_synthesis_log(const std::filesystem::path& path);

}  // namespace relsynth
