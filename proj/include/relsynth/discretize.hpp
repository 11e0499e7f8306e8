#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "relsynth/dataset.hpp"

namespace relsynth {

enum class BinStrategy {
  kIdentity,         // categorical: one code per observed category
  kIntegerIdentity,  // integers: one code per value in [lower, upper]
  kEqualWidth,
  kQuantile,
  kDate,       // day number of a datetime, equal-width bins
  kTimeOfDay,  // seconds since midnight, fixed-width clock bins
};

std::string_view to_string(BinStrategy s);
BinStrategy bin_strategy_from_string(std::string_view text);

/// Which part of a source column a feature encodes. Datetime columns yield a
/// date and a time feature; every child table yields a count feature.
enum class Component { kValue, kDate, kTime, kCount };

struct FeatureId {
  std::string table;
  std::string column;  // empty for count features
  Component component = Component::kValue;

  /// "table.column", "table.column:date", "table.column:time", "table#count".
  std::string key() const;
  static FeatureId parse(std::string_view key);
  friend bool operator==(const FeatureId&, const FeatureId&) = default;
};

/// Fitted encoding of one feature. Codes are laid out as
/// [null code if has_null] + value codes; a categorical feature additionally
/// owns the reserved unknown code `domain_size()` that only `encode` emits.
struct FeatureEncoding {
  FeatureId id;
  ColumnKind kind = ColumnKind::kCategorical;
  BinStrategy strategy = BinStrategy::kIdentity;
  std::size_t bin_count = 1;
  bool has_null = false;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<double> edges;             // interior boundaries, strictly increasing
  std::vector<std::string> categories;   // kIdentity only
  std::vector<std::string> labels;       // one per code
  int decimals = 1;                      // formatting precision of range labels

  std::size_t domain_size() const { return labels.size(); }
  bool has_unknown() const { return strategy == BinStrategy::kIdentity; }
  std::uint32_t unknown_code() const { return static_cast<std::uint32_t>(domain_size()); }
  std::optional<std::uint32_t> null_code() const;
  std::uint32_t value_offset() const { return has_null ? 1U : 0U; }

  /// Code for a numeric value (already decomposed for date/time components).
  std::uint32_t encode_number(double value) const;
  /// Code of a category, or nullopt when it was never seen during fitting.
  std::optional<std::uint32_t> encode_category(std::string_view category) const;

  /// Human-readable value of a code; throws DataError outside the domain.
  std::string decode_label(std::uint32_t code) const;
  /// Lower/upper bound of a range code (date codes in days, time codes in seconds).
  std::pair<double, double> bin_range(std::uint32_t code) const;
  /// A value that encodes back to `code`: bin midpoint, the integer, etc.
  double representative(std::uint32_t code) const;

  std::unordered_map<std::string, std::uint32_t> category_index;  // rebuilt on load
  void rebuild_index();
};

/// Smallest of 8/16/32 bits able to hold codes 0..domain-1.
int code_width_bits(std::size_t domain_size);

struct ColumnStrategy {
  std::optional<BinStrategy> strategy;
  std::optional<std::size_t> bins;
};

struct StrategyConfig {
  std::size_t default_bins = 20;
  std::size_t time_bins = 24;
  std::size_t count_identity_max = 20;
  BinStrategy default_numeric = BinStrategy::kEqualWidth;
  std::map<std::string, ColumnStrategy> columns;  // keyed by "table.column" or a count key

  static StrategyConfig from_json(const std::string& text);
};

class DiscretizationSpec {
 public:
  DiscretizationSpec() = default;
  explicit DiscretizationSpec(std::vector<FeatureEncoding> features);

  const std::vector<FeatureEncoding>& features() const { return features_; }
  const FeatureEncoding& feature(std::size_t i) const { return features_[i]; }
  std::optional<std::size_t> find(const FeatureId& id) const;
  std::size_t index(const FeatureId& id) const;
  /// Value features (no counts) of a table in column order.
  std::vector<std::size_t> table_features(std::string_view table) const;
  /// Count feature of a child table.
  std::optional<std::size_t> count_feature(std::string_view child_table) const;

  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  std::string to_json() const;
  static DiscretizationSpec from_json(const std::string& text);
  /// Stable 64-bit hash of the serialized spec, hex encoded.
  std::string hash() const;

 private:
  std::vector<FeatureEncoding> features_;
  std::vector<std::string> warnings_;
};

/// Fits encodings for every non-key column of every table plus one count
/// feature per child table. Only `dataset` (the training partition) is read.
DiscretizationSpec fit_discretization(const RelationalDataset& dataset, const StrategyConfig& config = {});

/// Column-major code matrix of one table's value features.
struct EncodedTable {
  std::vector<std::size_t> features;  // spec feature indices
  std::vector<std::vector<std::uint32_t>> codes;
  std::vector<std::size_t> domain_sizes;
  std::vector<int> widths;
  std::vector<std::size_t> unknown_counts;
  std::size_t rows = 0;
};

/// Code of one cell for a value feature of `table` (unknown categories map to
/// the unknown code and bump `unknown` when given).
std::uint32_t encode_cell(const FeatureEncoding& f, const csv::Cell& cell, std::optional<double> value,
                          std::size_t* unknown = nullptr);

EncodedTable encode(const RelationalDataset& dataset, std::string_view table, const DiscretizationSpec& spec);

}  // namespace relsynth
