#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relsynth/dataset.hpp"
#include "relsynth/discretize.hpp"
#include "relsynth/llm/client.hpp"
#include "relsynth/llm/prompt.hpp"
#include "relsynth/similarity.hpp"

namespace relsynth {

enum class PairCategory { kIntraTable, kInterTable, kSequential };

std::string_view to_string(PairCategory c);

/// A pair of discretized features whose joint distribution is compared.
/// Intra-table pairs share a row; inter-table pairs join a child row to its
/// parent row; sequential pairs take `first` from a child row and `second`
/// from the sibling `lag` positions earlier under order-by.
struct ColumnPair {
  PairCategory category = PairCategory::kIntraTable;
  std::size_t first = 0;   // spec feature index
  std::size_t second = 0;  // spec feature index
  std::size_t lag = 0;
  std::string table;  // table the pair is reported under (the child for joins)

  std::string label(const DiscretizationSpec& spec) const;
};

/// Every intra-table, parent/child and lag-1/lag-2 sequential pair.
std::vector<ColumnPair> enumerate_pairs(const DatasetSchema& schema, const DiscretizationSpec& spec);

/// Joint code counts of a pair, row-major over (first, second), with unknown
/// codes included in the domains.
std::vector<double> joint_counts(const RelationalDataset& dataset, const DiscretizationSpec& spec,
                                 const ColumnPair& pair);

/// KL(P || Q) in nats after adding `alpha` to every cell of both histograms.
/// Throws DataError when P has no observations.
double smoothed_kl(std::span<const double> p_counts, std::span<const double> q_counts, double alpha = 0.5);

/// 1 / (1 + KL).
inline double kl_score(double kl) { return 1.0 / (1.0 + kl); }

struct PairScore {
  ColumnPair pair;
  double kl = 0.0;
  double score = 0.0;
};

struct KlReport {
  std::vector<PairScore> pairs;
  std::map<std::string, std::map<std::string, double>> per_table;  // category -> table -> mean score
  std::map<std::string, double> per_category;
  double aggregate = 0.0;
  std::size_t skipped = 0;  // pairs without original observations
};

KlReport kl_report(const RelationalDataset& original, const RelationalDataset& synthetic,
                   const DiscretizationSpec& spec, double alpha = 0.5);

struct Chi2Result {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// Chi-squared test of homogeneity between two count vectors over one domain.
Chi2Result chi2_homogeneity(std::span<const double> a, std::span<const double> b);

struct Chi2Report {
  std::vector<std::pair<std::string, Chi2Result>> columns;  // feature key -> result
  std::map<std::string, double> per_table;                  // mean P per table
  double aggregate = 0.0;                                   // mean over tables
};

Chi2Report chi2_report(const RelationalDataset& original, const RelationalDataset& synthetic,
                       const DiscretizationSpec& spec);

struct RealismReport {
  double mean = 0.0;
  std::array<std::size_t, 5> histogram{};  // counts of scores 1..5
  std::size_t scored = 0;
  std::size_t skipped = 0;
  std::vector<std::string> candidates;  // entity keys in evaluation order
  std::vector<std::string> references;  // distinct reference keys used
};

struct RealismContext {
  const RelationalDataset& source;  // holds the reference entities of `index`
  const DiscretizationSpec& spec;
  const SimilarityIndex& index;
  const llm::PromptTemplate& prompt;
  const llm::CompletionClient& client;
  std::size_t references = 3;
  std::size_t validation_retries = 1;
};

/// Asks the judge to score each of `candidates` (entities of `dataset`),
/// showing the top-n similar training entities as references.
RealismReport realism_report(const RealismContext& ctx, const RelationalDataset& dataset,
                             std::span<const std::size_t> candidates);

struct MetricsReport {
  KlReport kl;
  Chi2Report chi2;
  std::optional<RealismReport> realism;
  std::optional<RealismReport> baseline;
  std::string against;

  nlohmann::json to_json(const DiscretizationSpec& spec) const;
  std::string to_csv(const DiscretizationSpec& spec) const;
};

}  // namespace relsynth
