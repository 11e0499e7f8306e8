#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relsynth/analytics.hpp"

namespace relsynth {

enum class Mechanism { kExponential, kLaplace };

struct NoiseInvocation {
  Mechanism mechanism = Mechanism::kLaplace;
  double epsilon = 0.0;
  double sensitivity = 0.0;
  std::string target;  // feature key the invocation served
};

/// Ledger of every privacy mechanism invocation of one fit.
struct NoiseAccount {
  std::vector<NoiseInvocation> invocations;
  /// Left-to-right sum of the spent budgets.
  double total() const;
};

struct PgmConfig {
  double epsilon = 2.0;
  std::size_t degree = 3;
  double structure_share = 0.5;
  std::size_t cell_cap = 1'000'000;
  /// Test-only: skip all noise and select parent sets by argmax (epsilon is
  /// treated as infinite).
  bool noise_disabled = false;
  /// Overrides the mutual-information sensitivity used by the exponential mechanism.
  std::optional<double> mi_sensitivity;
};

/// Sensitivity bound of empirical mutual information (bits) for N records:
/// log2(N)/N + (N-1)/N * log2(N/(N-1)).
double default_mi_sensitivity(std::size_t n);

/// Empirical mutual information in bits between column `x` and the joint of
/// `parents` over the analytics rows.
double mutual_information(const AnalyticsTable& table, std::size_t x, std::span<const std::size_t> parents);

struct BayesNode {
  std::size_t column = 0;             // analytics column
  std::vector<std::size_t> parents;   // analytics columns, all earlier in node order
  std::size_t domain = 0;
  std::vector<double> cpt;            // parent configuration major, `domain` entries per row

  std::size_t parent_configurations() const { return domain == 0 ? 0 : cpt.size() / domain; }
  std::span<const double> distribution(std::size_t parent_config) const {
    return {cpt.data() + parent_config * domain, domain};
  }
};

class DpBayesNet {
 public:
  std::vector<std::string> feature_keys;  // per analytics column
  std::vector<std::size_t> domain_sizes;  // per analytics column
  std::vector<BayesNode> nodes;           // in node order
  double epsilon = 0.0;
  double structure_share = 0.5;
  std::size_t degree = 0;
  bool noise_disabled = false;
  NoiseAccount account;
  std::string spec_hash;

  std::size_t column_count() const { return domain_sizes.size(); }
  /// Mixed-radix index of the parents' codes in `row`.
  std::size_t parent_configuration(const BayesNode& node, std::span<const std::uint32_t> row) const;

  /// Ancestral sampling; row i draws from its own stream derived from `seed`.
  std::vector<AnalyticsRow> sample(std::size_t m, std::uint64_t seed) const;
  AnalyticsRow sample_row(std::uint64_t seed, std::size_t index) const;

  std::string to_json() const;
  static DpBayesNet from_json(const std::string& text);
};

DpBayesNet fit_network(const AnalyticsTable& analytics, const DiscretizationSpec& spec, const PgmConfig& config,
                       std::uint64_t seed);

/// Per-column marginal probabilities over each column's domain.
std::vector<std::vector<double>> single_column_histograms(const AnalyticsTable& analytics);

}  // namespace relsynth
