#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "relsynth/analytics.hpp"

namespace relsynth {

/// Rarity-weighted match score between analytics rows, plus brute-force top-n
/// retrieval over the training rows.
class SimilarityIndex {
 public:
  /// `histograms` are the per-column marginals of `train`. `zero_cap` replaces
  /// 1/p for matches on values of probability zero; defaults to 2N.
  SimilarityIndex(std::vector<std::vector<double>> histograms, AnalyticsTable train,
                  std::optional<double> zero_cap = std::nullopt);

  const AnalyticsTable& train() const { return train_; }
  const std::vector<std::vector<double>>& histograms() const { return histograms_; }
  std::size_t size() const { return train_.row_count(); }
  double zero_cap() const { return zero_cap_; }

  /// Sum over columns of [a_i == b_i] / p_i(a_i).
  double score(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) const;
  /// Score of `a` against training row `row`.
  double score_row(std::span<const std::uint32_t> a, std::size_t row) const;

  /// Training row positions of the n best matches, by descending score with
  /// ties going to the lower position.
  std::vector<std::size_t> top_n_rows(std::span<const std::uint32_t> conditioning, std::size_t n) const;
  /// Same, mapped to the source entity indices of the training rows.
  std::vector<std::size_t> top_n_similar(std::span<const std::uint32_t> conditioning, std::size_t n) const;

  /// Total number of row-score evaluations performed so far.
  std::uint64_t evaluations() const { return evaluations_.load(); }

 private:
  void check_layout(std::size_t width) const;

  std::vector<std::vector<double>> histograms_;
  std::vector<std::vector<double>> weights_;  // 1/p per column and code, capped
  AnalyticsTable train_;
  double zero_cap_ = 0.0;
  mutable std::atomic<std::uint64_t> evaluations_{0};
};

}  // namespace relsynth
