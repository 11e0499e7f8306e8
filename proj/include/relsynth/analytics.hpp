#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relsynth/dataset.hpp"
#include "relsynth/discretize.hpp"

namespace relsynth {

using AnalyticsRow = std::vector<std::uint32_t>;

/// One row per entity: the entity's main-table features, the features of the
/// selected row of every descendant table and one count feature per child
/// table. Columns follow tree order (a child's count after its features).
struct AnalyticsTable {
  std::vector<std::size_t> features;              // spec feature indices
  std::vector<std::size_t> domain_sizes;
  std::vector<std::vector<std::uint32_t>> codes;  // column-major
  std::vector<std::size_t> entities;              // source entity index per row
  std::vector<std::vector<std::size_t>> raw_counts;  // per count column, pre-discretization

  std::size_t row_count() const { return entities.size(); }
  std::size_t column_count() const { return features.size(); }
  AnalyticsRow row(std::size_t r) const;

  /// CSV with one column per feature key; cells are codes or decoded labels.
  std::string to_csv(const DiscretizationSpec& spec, bool labels) const;
};

/// Flattens the listed entities. Sequential children contribute their first row
/// under order-by; other children their lowest-index row.
AnalyticsTable build_analytics(const RelationalDataset& dataset, std::span<const std::size_t> entities,
                               const DiscretizationSpec& spec);
AnalyticsTable build_analytics(const RelationalDataset& dataset, const HoldoutSplit& split,
                               const DiscretizationSpec& spec);
/// All entities of `dataset`.
AnalyticsTable build_analytics(const RelationalDataset& dataset, const DiscretizationSpec& spec);

}  // namespace relsynth
