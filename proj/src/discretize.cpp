#include "relsynth/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "relsynth/error.hpp"
#include "relsynth/random.hpp"
#include "relsynth/timefmt.hpp"

namespace relsynth {

using json = nlohmann::json;

namespace {

constexpr const char* kRangeDash = "–";
constexpr const char* kNullLabel = "none";

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string format_integer(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(std::llround(v)));
  return buf;
}

// Value of a datetime/time cell as seen by the given component.
double component_value(const FeatureEncoding& f, double v) {
  switch (f.id.component) {
    case Component::kDate: return std::floor(v / timefmt::kSecondsPerDay);
    case Component::kTime: {
      if (f.kind == ColumnKind::kTimeOfDay) return v;
      return v - std::floor(v / timefmt::kSecondsPerDay) * timefmt::kSecondsPerDay;
    }
    default: return v;
  }
}

}  // namespace

std::string_view to_string(BinStrategy s) {
  switch (s) {
    case BinStrategy::kIdentity: return "identity";
    case BinStrategy::kIntegerIdentity: return "integer_identity";
    case BinStrategy::kEqualWidth: return "equal_width";
    case BinStrategy::kQuantile: return "quantile";
    case BinStrategy::kDate: return "date";
    case BinStrategy::kTimeOfDay: return "time_of_day";
  }
  return "?";
}

BinStrategy bin_strategy_from_string(std::string_view text) {
  if (text == "identity") return BinStrategy::kIdentity;
  if (text == "integer_identity") return BinStrategy::kIntegerIdentity;
  if (text == "equal_width") return BinStrategy::kEqualWidth;
  if (text == "quantile") return BinStrategy::kQuantile;
  if (text == "date") return BinStrategy::kDate;
  if (text == "time_of_day") return BinStrategy::kTimeOfDay;
  throw ConfigError("unknown binning strategy '" + std::string(text) + "'");
}

std::string FeatureId::key() const {
  switch (component) {
    case Component::kValue: return table + "." + column;
    case Component::kDate: return table + "." + column + ":date";
    case Component::kTime: return table + "." + column + ":time";
    case Component::kCount: return table + "#count";
  }
  return table;
}

FeatureId FeatureId::parse(std::string_view key) {
  FeatureId id;
  if (const auto hash = key.find('#'); hash != std::string_view::npos) {
    id.table = std::string(key.substr(0, hash));
    id.component = Component::kCount;
    return id;
  }
  const auto dot = key.find('.');
  if (dot == std::string_view::npos) throw ConfigError("malformed feature key '" + std::string(key) + "'");
  id.table = std::string(key.substr(0, dot));
  auto rest = key.substr(dot + 1);
  if (rest.ends_with(":date")) {
    id.component = Component::kDate;
    rest.remove_suffix(5);
  } else if (rest.ends_with(":time")) {
    id.component = Component::kTime;
    rest.remove_suffix(5);
  }
  id.column = std::string(rest);
  return id;
}

std::optional<std::uint32_t> FeatureEncoding::null_code() const {
  if (has_null) return 0U;
  return std::nullopt;
}

std::uint32_t FeatureEncoding::encode_number(double value) const {
  const std::size_t n_values = domain_size() - value_offset();
  std::size_t v = 0;
  if (strategy == BinStrategy::kIntegerIdentity) {
    const double clamped = std::clamp(std::round(value), lower, upper);
    v = static_cast<std::size_t>(clamped - lower);
  } else {
    v = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
  }
  if (n_values == 0) throw DataError("feature '" + id.key() + "' has no value codes");
  v = std::min(v, n_values - 1);
  return static_cast<std::uint32_t>(v + value_offset());
}

std::optional<std::uint32_t> FeatureEncoding::encode_category(std::string_view category) const {
  const auto it = category_index.find(std::string(category));
  if (it == category_index.end()) return std::nullopt;
  return it->second;
}

std::string FeatureEncoding::decode_label(std::uint32_t code) const {
  if (code >= domain_size()) {
    if (has_unknown() && code == unknown_code()) return "unknown";
    throw DataError("code " + std::to_string(code) + " outside the domain of '" + id.key() + "'");
  }
  return labels[code];
}

std::pair<double, double> FeatureEncoding::bin_range(std::uint32_t code) const {
  if (code < value_offset() || code >= domain_size())
    throw DataError("code " + std::to_string(code) + " has no range in '" + id.key() + "'");
  const std::size_t i = code - value_offset();
  if (strategy == BinStrategy::kIntegerIdentity) return {lower + i, lower + i};
  const double lo = i == 0 ? lower : edges[i - 1];
  const double hi = i == edges.size() ? upper : edges[i];
  return {lo, hi};
}

double FeatureEncoding::representative(std::uint32_t code) const {
  const auto [lo, hi] = bin_range(code);
  if (strategy == BinStrategy::kIntegerIdentity) return lo;
  return 0.5 * (lo + hi);
}

void FeatureEncoding::rebuild_index() {
  category_index.clear();
  for (std::size_t i = 0; i < categories.size(); ++i)
    category_index.emplace(categories[i], static_cast<std::uint32_t>(i + value_offset()));
}

int code_width_bits(std::size_t domain_size) {
  if (domain_size <= 256) return 8;
  if (domain_size <= 65536) return 16;
  return 32;
}

StrategyConfig StrategyConfig::from_json(const std::string& text) {
  StrategyConfig cfg;
  try {
    const auto doc = json::parse(text);
    cfg.default_bins = doc.value("default_bins", cfg.default_bins);
    cfg.time_bins = doc.value("time_bins", cfg.time_bins);
    cfg.count_identity_max = doc.value("count_identity_max", cfg.count_identity_max);
    if (doc.contains("default_numeric"))
      cfg.default_numeric = bin_strategy_from_string(doc.at("default_numeric").get<std::string>());
    if (doc.contains("columns")) {
      for (const auto& [key, jc] : doc.at("columns").items()) {
        ColumnStrategy cs;
        if (jc.contains("strategy")) cs.strategy = bin_strategy_from_string(jc.at("strategy").get<std::string>());
        if (jc.contains("bins")) cs.bins = jc.at("bins").get<std::size_t>();
        cfg.columns[key] = cs;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed strategy config: ") + e.what());
  }
  if (cfg.default_bins == 0 || cfg.time_bins == 0) throw ConfigError("bin counts must be positive");
  return cfg;
}

DiscretizationSpec::DiscretizationSpec(std::vector<FeatureEncoding> features) : features_(std::move(features)) {
  for (auto& f : features_) f.rebuild_index();
}

std::optional<std::size_t> DiscretizationSpec::find(const FeatureId& id) const {
  for (std::size_t i = 0; i < features_.size(); ++i)
    if (features_[i].id == id) return i;
  return std::nullopt;
}

std::size_t DiscretizationSpec::index(const FeatureId& id) const {
  if (auto i = find(id)) return *i;
  throw ConfigError("discretization has no feature '" + id.key() + "'");
}

std::vector<std::size_t> DiscretizationSpec::table_features(std::string_view table) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < features_.size(); ++i)
    if (features_[i].id.table == table && features_[i].id.component != Component::kCount) out.push_back(i);
  return out;
}

std::optional<std::size_t> DiscretizationSpec::count_feature(std::string_view child_table) const {
  return find(FeatureId{std::string(child_table), "", Component::kCount});
}

std::string DiscretizationSpec::to_json() const {
  json doc;
  doc["features"] = json::array();
  for (const auto& f : features_) {
    json jf{{"key", f.id.key()},
            {"kind", std::string(to_string(f.kind))},
            {"strategy", std::string(to_string(f.strategy))},
            {"bin_count", f.bin_count},
            {"has_null", f.has_null},
            {"lower", f.lower},
            {"upper", f.upper},
            {"edges", f.edges},
            {"categories", f.categories},
            {"labels", f.labels},
            {"decimals", f.decimals},
            {"domain_size", f.domain_size()},
            {"width", code_width_bits(f.domain_size())}};
    doc["features"].push_back(std::move(jf));
  }
  doc["warnings"] = warnings_;
  return doc.dump(2) + "\n";
}

DiscretizationSpec DiscretizationSpec::from_json(const std::string& text) {
  std::vector<FeatureEncoding> features;
  std::vector<std::string> warnings;
  try {
    const auto doc = json::parse(text);
    for (const auto& jf : doc.at("features")) {
      FeatureEncoding f;
      f.id = FeatureId::parse(jf.at("key").get<std::string>());
      f.kind = column_kind_from_string(jf.at("kind").get<std::string>());
      f.strategy = bin_strategy_from_string(jf.at("strategy").get<std::string>());
      f.bin_count = jf.at("bin_count").get<std::size_t>();
      f.has_null = jf.at("has_null").get<bool>();
      f.lower = jf.at("lower").get<double>();
      f.upper = jf.at("upper").get<double>();
      f.edges = jf.at("edges").get<std::vector<double>>();
      f.categories = jf.at("categories").get<std::vector<std::string>>();
      f.labels = jf.at("labels").get<std::vector<std::string>>();
      f.decimals = jf.at("decimals").get<int>();
      features.push_back(std::move(f));
    }
    if (doc.contains("warnings")) warnings = doc.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed discretization spec: ") + e.what());
  }
  DiscretizationSpec spec(std::move(features));
  spec.warnings_ = std::move(warnings);
  return spec;
}

std::string DiscretizationSpec::hash() const {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json())));
  return buf;
}

namespace {

// Number of decimals that keeps every boundary label distinct.
int choose_decimals(const FeatureEncoding& f) {
  std::vector<double> bounds{f.lower};
  bounds.insert(bounds.end(), f.edges.begin(), f.edges.end());
  bounds.push_back(f.upper);
  double min_gap = std::abs(f.upper - f.lower);
  for (std::size_t i = 1; i < bounds.size(); ++i)
    if (bounds[i] > bounds[i - 1]) min_gap = std::min(min_gap, bounds[i] - bounds[i - 1]);
  int d = 1;
  if (min_gap > 0.0) d = std::max(1, static_cast<int>(std::ceil(-std::log10(min_gap))) + 1);
  for (; d < 12; ++d) {
    std::set<std::string> seen;
    bool distinct = true;
    for (double b : bounds) distinct &= seen.insert(format_fixed(b, d)).second;
    if (distinct || bounds.size() <= 2) break;
  }
  return d;
}

void build_labels(FeatureEncoding& f) {
  f.labels.clear();
  if (f.has_null) f.labels.emplace_back(kNullLabel);
  switch (f.strategy) {
    case BinStrategy::kIdentity:
      for (const auto& c : f.categories) f.labels.push_back(c);
      break;
    case BinStrategy::kIntegerIdentity:
      for (double v = f.lower; v <= f.upper; v += 1.0) f.labels.push_back(format_integer(v));
      break;
    case BinStrategy::kTimeOfDay:
      for (std::size_t i = 0; i <= f.edges.size(); ++i)
        f.labels.push_back(timefmt::format_clock(i == 0 ? f.lower : f.edges[i - 1]));
      break;
    case BinStrategy::kDate:
      for (std::size_t i = 0; i <= f.edges.size(); ++i) {
        const double lo = i == 0 ? f.lower : f.edges[i - 1];
        const double hi = i == f.edges.size() ? f.upper : f.edges[i];
        const auto lo_day = static_cast<std::int64_t>(std::ceil(lo));
        const auto hi_day = static_cast<std::int64_t>(std::floor(hi));
        f.labels.push_back(lo_day >= hi_day ? timefmt::format_date(lo_day)
                                            : timefmt::format_date(lo_day) + kRangeDash + timefmt::format_date(hi_day));
      }
      break;
    case BinStrategy::kEqualWidth:
    case BinStrategy::kQuantile:
      f.decimals = choose_decimals(f);
      for (std::size_t i = 0; i <= f.edges.size(); ++i) {
        const double lo = i == 0 ? f.lower : f.edges[i - 1];
        const double hi = i == f.edges.size() ? f.upper : f.edges[i];
        f.labels.push_back(format_fixed(lo, f.decimals) + kRangeDash + format_fixed(hi, f.decimals));
      }
      break;
  }
}

std::vector<double> equal_width_edges(double lo, double hi, std::size_t bins) {
  std::vector<double> edges;
  for (std::size_t i = 1; i < bins; ++i) edges.push_back(lo + static_cast<double>(i) * (hi - lo) / static_cast<double>(bins));
  return edges;
}

// Linear-interpolation quantiles, deduplicated and kept strictly inside (lo, hi).
std::vector<double> quantile_edges(std::vector<double> values, std::size_t bins) {
  std::sort(values.begin(), values.end());
  const double lo = values.front();
  const double hi = values.back();
  std::vector<double> edges;
  for (std::size_t i = 1; i < bins; ++i) {
    const double h = static_cast<double>(values.size() - 1) * static_cast<double>(i) / static_cast<double>(bins);
    const auto below = static_cast<std::size_t>(std::floor(h));
    const std::size_t above = std::min(below + 1, values.size() - 1);
    const double q = values[below] + (h - static_cast<double>(below)) * (values[above] - values[below]);
    if (q > lo && q < hi && (edges.empty() || q > edges.back())) edges.push_back(q);
  }
  return edges;
}

void fit_numeric(FeatureEncoding& f, const std::vector<double>& values, DiscretizationSpec& spec) {
  if (values.empty()) {
    f.lower = f.upper = 0.0;
    f.edges.clear();
    f.has_null = true;
    if (f.strategy == BinStrategy::kTimeOfDay) f.upper = timefmt::kSecondsPerDay;
    if (f.strategy != BinStrategy::kTimeOfDay) return;
  }
  if (f.strategy == BinStrategy::kTimeOfDay) {
    f.lower = 0.0;
    f.upper = timefmt::kSecondsPerDay;
    f.edges = equal_width_edges(0.0, timefmt::kSecondsPerDay, f.bin_count);
    return;
  }
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  f.lower = *mn;
  f.upper = *mx;
  if (f.strategy == BinStrategy::kIntegerIdentity) {
    f.lower = std::round(f.lower);
    f.upper = std::round(f.upper);
    return;
  }
  if (f.lower == f.upper) {
    if (f.bin_count > 1)
      spec.add_warning("feature '" + f.id.key() + "' has a single distinct value; collapsed to one bin");
    f.edges.clear();
    return;
  }
  if (f.strategy == BinStrategy::kQuantile)
    f.edges = quantile_edges(values, f.bin_count);
  else
    f.edges = equal_width_edges(f.lower, f.upper, f.bin_count);
}

}  // namespace

DiscretizationSpec fit_discretization(const RelationalDataset& dataset, const StrategyConfig& config) {
  DiscretizationSpec spec;
  std::vector<FeatureEncoding> features;
  const auto& schema = dataset.schema();

  const auto column_override = [&](const std::string& key) -> const ColumnStrategy* {
    const auto it = config.columns.find(key);
    return it == config.columns.end() ? nullptr : &it->second;
  };

  for (std::size_t t = 0; t < schema.tables.size(); ++t) {
    const auto& ts = schema.tables[t];
    const auto& table = dataset.table(t);
    const bool is_child = t != 0;
    for (std::size_t c = 0; c < ts.columns.size(); ++c) {
      const auto& col = ts.columns[c];
      if (col.kind == ColumnKind::kKey) continue;
      const std::string col_key = ts.name + "." + col.name;
      const ColumnStrategy* ov = column_override(col_key);

      std::vector<FeatureEncoding> made;
      FeatureEncoding base;
      base.id = FeatureId{ts.name, col.name, Component::kValue};
      base.kind = col.kind;
      // Child columns are null-coded in the analytics table when an entity has no rows.
      base.has_null = col.nullable || is_child;

      switch (col.kind) {
        case ColumnKind::kCategorical: {
          base.strategy = BinStrategy::kIdentity;
          std::set<std::string> cats;
          for (std::size_t r = 0; r < table.row_count(); ++r)
            if (const auto& cell = table.cell(r, c)) cats.insert(*cell);
          base.categories.assign(cats.begin(), cats.end());
          base.bin_count = base.categories.size();
          if (base.categories.empty()) base.has_null = true;
          made.push_back(std::move(base));
          break;
        }
        case ColumnKind::kContinuous:
        case ColumnKind::kInteger: {
          base.strategy = ov && ov->strategy ? *ov->strategy : config.default_numeric;
          base.bin_count = ov && ov->bins ? *ov->bins : config.default_bins;
          made.push_back(std::move(base));
          break;
        }
        case ColumnKind::kTimeOfDay: {
          base.strategy = BinStrategy::kTimeOfDay;
          base.bin_count = ov && ov->bins ? *ov->bins : config.time_bins;
          made.push_back(std::move(base));
          break;
        }
        case ColumnKind::kDatetime: {
          FeatureEncoding date = base;
          date.id.component = Component::kDate;
          date.strategy = BinStrategy::kDate;
          date.bin_count = ov && ov->bins ? *ov->bins : config.default_bins;
          const auto* tov = column_override(col_key + ":time");
          FeatureEncoding time = base;
          time.id.component = Component::kTime;
          time.strategy = BinStrategy::kTimeOfDay;
          time.bin_count = tov && tov->bins ? *tov->bins : config.time_bins;
          made.push_back(std::move(date));
          made.push_back(std::move(time));
          break;
        }
        case ColumnKind::kKey: break;
      }
      for (auto& f : made) {
        if (f.strategy != BinStrategy::kIdentity) {
          if (f.bin_count == 0) throw ConfigError("feature '" + f.id.key() + "': bin count must be positive");
          std::vector<double> values;
          for (std::size_t r = 0; r < table.row_count(); ++r)
            if (const auto v = table.value(r, c)) values.push_back(component_value(f, *v));
          fit_numeric(f, values, spec);
        }
        build_labels(f);
        features.push_back(std::move(f));
      }
    }
  }

  // Count features: number of child rows per parent row.
  for (std::size_t t = 1; t < schema.tables.size(); ++t) {
    const auto& ts = schema.tables[t];
    const auto* rel = schema.parent_of(ts.name);
    const auto& parent = dataset.table(rel->parent);
    std::vector<double> counts;
    counts.reserve(parent.row_count());
    for (std::size_t p = 0; p < parent.row_count(); ++p)
      counts.push_back(static_cast<double>(dataset.child_rows(ts.name, p).size()));
    FeatureEncoding f;
    f.id = FeatureId{ts.name, "", Component::kCount};
    f.kind = ColumnKind::kInteger;
    const double max_count = counts.empty() ? 0.0 : *std::max_element(counts.begin(), counts.end());
    const ColumnStrategy* ov = column_override(f.id.key());
    if (ov && ov->strategy)
      f.strategy = *ov->strategy;
    else
      f.strategy = max_count <= static_cast<double>(config.count_identity_max) ? BinStrategy::kIntegerIdentity
                                                                               : BinStrategy::kQuantile;
    f.bin_count = ov && ov->bins ? *ov->bins : config.default_bins;
    if (counts.empty()) counts.push_back(0.0);
    fit_numeric(f, counts, spec);
    if (f.strategy == BinStrategy::kIntegerIdentity) f.lower = 0.0;
    f.has_null = false;
    build_labels(f);
    features.push_back(std::move(f));
  }

  auto warnings = spec.warnings();
  spec = DiscretizationSpec(std::move(features));
  for (auto& w : warnings) spec.add_warning(std::move(w));
  return spec;
}

std::uint32_t encode_cell(const FeatureEncoding& f, const csv::Cell& cell, std::optional<double> value,
                          std::size_t* unknown) {
  if (!cell) {
    if (auto nc = f.null_code()) return *nc;
    throw DataError("null value for non-nullable feature '" + f.id.key() + "'");
  }
  if (f.strategy == BinStrategy::kIdentity) {
    if (auto code = f.encode_category(*cell)) return *code;
    if (unknown) ++*unknown;
    return f.unknown_code();
  }
  if (!value) value = parse_cell_value(f.kind, *cell);
  if (!value) throw DataError("cannot parse '" + *cell + "' for feature '" + f.id.key() + "'");
  return f.encode_number(component_value(f, *value));
}

EncodedTable encode(const RelationalDataset& dataset, std::string_view table, const DiscretizationSpec& spec) {
  const auto& ts = dataset.schema().table(table);
  const auto& tab = dataset.table(table);
  EncodedTable out;
  out.features = spec.table_features(table);
  out.rows = tab.row_count();
  out.codes.resize(out.features.size());
  out.unknown_counts.assign(out.features.size(), 0);
  for (std::size_t j = 0; j < out.features.size(); ++j) {
    const auto& f = spec.feature(out.features[j]);
    const auto c = ts.column_index(f.id.column);
    out.domain_sizes.push_back(f.domain_size());
    out.widths.push_back(code_width_bits(f.domain_size()));
    auto& codes = out.codes[j];
    codes.resize(out.rows);
    for (std::size_t r = 0; r < out.rows; ++r) codes[r] = encode_cell(f, tab.cell(r, c), tab.value(r, c), &out.unknown_counts[j]);
  }
  return out;
}

}  // namespace relsynth
