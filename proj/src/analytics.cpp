#include "relsynth/analytics.hpp"

#include <numeric>
#include <optional>

#include "relsynth/csv.hpp"
#include "relsynth/error.hpp"

namespace relsynth {

AnalyticsRow AnalyticsTable::row(std::size_t r) const {
  AnalyticsRow out(codes.size());
  for (std::size_t c = 0; c < codes.size(); ++c) out[c] = codes[c][r];
  return out;
}

std::string AnalyticsTable::to_csv(const DiscretizationSpec& spec, bool labels) const {
  csv::Document doc;
  for (auto f : features) doc.header.push_back(spec.feature(f).id.key());
  doc.rows.resize(row_count());
  for (std::size_t r = 0; r < row_count(); ++r) {
    for (std::size_t c = 0; c < features.size(); ++c) {
      const auto code = codes[c][r];
      doc.rows[r].emplace_back(labels ? spec.feature(features[c]).decode_label(code) : std::to_string(code));
    }
  }
  return csv::format(doc);
}

AnalyticsTable build_analytics(const RelationalDataset& dataset, std::span<const std::size_t> entities,
                               const DiscretizationSpec& spec) {
  const auto& schema = dataset.schema();
  const std::size_t n_tables = schema.tables.size();

  struct Column {
    std::size_t table;
    std::optional<std::size_t> source_column;  // nullopt for count columns
    std::size_t feature;
  };
  std::vector<Column> layout;
  for (std::size_t t = 0; t < n_tables; ++t) {
    const auto& ts = schema.tables[t];
    for (auto f : spec.table_features(ts.name)) layout.push_back({t, ts.column_index(spec.feature(f).id.column), f});
    if (t != 0) {
      const auto cf = spec.count_feature(ts.name);
      if (!cf) throw ConfigError("discretization lacks a count feature for '" + ts.name + "'");
      layout.push_back({t, std::nullopt, *cf});
    }
  }

  AnalyticsTable out;
  for (const auto& col : layout) {
    out.features.push_back(col.feature);
    out.domain_sizes.push_back(spec.feature(col.feature).domain_size());
  }
  out.codes.assign(layout.size(), std::vector<std::uint32_t>(entities.size()));
  out.entities.assign(entities.begin(), entities.end());
  std::size_t n_counts = 0;
  for (const auto& col : layout) n_counts += !col.source_column;
  out.raw_counts.assign(n_counts, std::vector<std::size_t>(entities.size()));

  // parent table index per table
  std::vector<std::size_t> parent(n_tables, 0);
  for (std::size_t t = 1; t < n_tables; ++t)
    parent[t] = schema.table_index(schema.parent_of(schema.tables[t].name)->parent);

  std::vector<std::optional<std::size_t>> selected(n_tables);
  std::vector<std::size_t> counts(n_tables, 0);
  for (std::size_t i = 0; i < entities.size(); ++i) {
    selected[0] = entities[i];
    for (std::size_t t = 1; t < n_tables; ++t) {
      selected[t].reset();
      counts[t] = 0;
      if (const auto p = selected[parent[t]]) {
        const auto& rows = dataset.child_rows(schema.tables[t].name, *p);
        counts[t] = rows.size();
        if (!rows.empty()) selected[t] = rows.front();
      }
    }
    std::size_t count_col = 0;
    for (std::size_t c = 0; c < layout.size(); ++c) {
      const auto& col = layout[c];
      const auto& f = spec.feature(col.feature);
      if (!col.source_column) {
        out.raw_counts[count_col++][i] = counts[col.table];
        out.codes[c][i] = f.encode_number(static_cast<double>(counts[col.table]));
        continue;
      }
      const auto& row = selected[col.table];
      if (!row) {
        out.codes[c][i] = f.null_code().value_or(0);
        continue;
      }
      const auto& tab = dataset.table(col.table);
      out.codes[c][i] = encode_cell(f, tab.cell(*row, *col.source_column), tab.value(*row, *col.source_column));
    }
  }
  return out;
}

AnalyticsTable build_analytics(const RelationalDataset& dataset, const HoldoutSplit& split,
                               const DiscretizationSpec& spec) {
  return build_analytics(dataset, split.train, spec);
}

AnalyticsTable build_analytics(const RelationalDataset& dataset, const DiscretizationSpec& spec) {
  std::vector<std::size_t> all(dataset.entity_count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return build_analytics(dataset, all, spec);
}

}  // namespace relsynth
