#include "relsynth/similarity.hpp"

#include <algorithm>
#include <numeric>

#include "relsynth/error.hpp"

namespace relsynth {

SimilarityIndex::SimilarityIndex(std::vector<std::vector<double>> histograms, AnalyticsTable train,
                                 std::optional<double> zero_cap)
    : histograms_(std::move(histograms)), train_(std::move(train)) {
  if (histograms_.size() != train_.column_count())
    throw ConfigError("similarity: histogram count does not match the analytics layout");
  for (std::size_t c = 0; c < histograms_.size(); ++c)
    if (histograms_[c].size() != train_.domain_sizes[c])
      throw ConfigError("similarity: histogram length does not match the column domain");
  const double n = static_cast<double>(std::max<std::size_t>(train_.row_count(), 1));
  zero_cap_ = zero_cap.value_or(2.0 * n);  // 1 / p_min with p_min = 1 / (2N)
  weights_.resize(histograms_.size());
  for (std::size_t c = 0; c < histograms_.size(); ++c) {
    weights_[c].reserve(histograms_[c].size());
    for (double p : histograms_[c]) weights_[c].push_back(p > 0.0 ? 1.0 / p : zero_cap_);
  }
}

void SimilarityIndex::check_layout(std::size_t width) const {
  if (width != histograms_.size())
    throw ConfigError("similarity: row has " + std::to_string(width) + " columns, index expects " +
                      std::to_string(histograms_.size()));
}

double SimilarityIndex::score(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) const {
  check_layout(a.size());
  check_layout(b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) continue;
    s += a[i] < weights_[i].size() ? weights_[i][a[i]] : zero_cap_;
  }
  return s;
}

double SimilarityIndex::score_row(std::span<const std::uint32_t> a, std::size_t row) const {
  evaluations_.fetch_add(1, std::memory_order_relaxed);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != train_.codes[i][row]) continue;
    s += a[i] < weights_[i].size() ? weights_[i][a[i]] : zero_cap_;
  }
  return s;
}

std::vector<std::size_t> SimilarityIndex::top_n_rows(std::span<const std::uint32_t> conditioning,
                                                     std::size_t n) const {
  check_layout(conditioning.size());
  const std::size_t rows = train_.row_count();
  if (n < 1 || n > rows)
    throw ConfigError("top-n: n = " + std::to_string(n) + " outside [1, " + std::to_string(rows) + "]");
  std::vector<double> scores(rows);
  for (std::size_t r = 0; r < rows; ++r) scores[r] = score_row(conditioning, r);
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t x, std::size_t y) { return scores[x] > scores[y] || (scores[x] == scores[y] && x < y); });
  order.resize(n);
  return order;
}

std::vector<std::size_t> SimilarityIndex::top_n_similar(std::span<const std::uint32_t> conditioning,
                                                        std::size_t n) const {
  auto rows = top_n_rows(conditioning, n);
  for (auto& r : rows) r = train_.entities[r];
  return rows;
}

}  // namespace relsynth
