#pragma once

// Random relational datasets with random schemas, for property tests.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "relsynth/dataset.hpp"
#include "relsynth/random.hpp"
#include "relsynth/timefmt.hpp"

namespace relsynth::testing {

struct RandomDatasetOptions {
  std::size_t min_entities = 5;
  std::size_t max_entities = 60;
  std::size_t max_tables = 3;
  std::size_t max_columns = 3;
  std::size_t max_children = 3;
};

inline std::string random_cell(Rng& rng, ColumnKind kind) {
  char buf[64];
  switch (kind) {
    case ColumnKind::kCategorical: {
      static const char* cats[] = {"alpha", "beta", "gamma", "delta", "epsilon"};
      return cats[rng.below(5)];
    }
    case ColumnKind::kContinuous:
      std::snprintf(buf, sizeof buf, "%.2f", rng.uniform() * 100.0 - 20.0);
      return buf;
    case ColumnKind::kInteger: return std::to_string(static_cast<int>(rng.below(40)) - 5);
    case ColumnKind::kDatetime:
      return timefmt::format_datetime(static_cast<double>(timefmt::days_from_civil(2020, 1, 1) + rng.below(900)) *
                                          timefmt::kSecondsPerDay +
                                      static_cast<double>(rng.below(1440)) * 60.0);
    case ColumnKind::kTimeOfDay:
      std::snprintf(buf, sizeof buf, "%u:%02u", static_cast<unsigned>(rng.below(24)),
                    static_cast<unsigned>(rng.below(60)));
      return buf;
    case ColumnKind::kKey: break;
  }
  return {};
}

inline RelationalDataset random_dataset(Rng& rng, const RandomDatasetOptions& o = {}) {
  DatasetSchema schema;
  const std::size_t n_tables = 1 + rng.below(o.max_tables);
  std::vector<std::size_t> parent(n_tables, 0);
  static const ColumnKind kinds[] = {ColumnKind::kCategorical, ColumnKind::kContinuous, ColumnKind::kInteger,
                                     ColumnKind::kDatetime, ColumnKind::kTimeOfDay};
  for (std::size_t t = 0; t < n_tables; ++t) {
    TableSchema ts;
    ts.name = "t" + std::to_string(t);
    ts.primary_key = "id";
    ts.csv_path = ts.name + ".csv";
    ts.columns.push_back({"id", ColumnKind::kKey, false});
    if (t > 0) {
      parent[t] = rng.below(t);  // earlier tables only, so tree order holds
      ts.columns.push_back({"parent_id", ColumnKind::kKey, false});
    }
    const std::size_t n_cols = 1 + rng.below(o.max_columns);
    for (std::size_t c = 0; c < n_cols; ++c)
      ts.columns.push_back({"c" + std::to_string(c), kinds[rng.below(5)], rng.uniform() < 0.2});
    schema.tables.push_back(std::move(ts));
  }
  schema.main_table = "t0";
  // Reorder into depth-first tree order as the loader would.
  for (std::size_t t = 1; t < n_tables; ++t) {
    Relationship r;
    r.child = schema.tables[t].name;
    r.parent = schema.tables[parent[t]].name;
    r.foreign_key = "parent_id";
    const double u = rng.uniform();
    r.kind = u < 0.5 ? RelationKind::kSequential : (u < 0.8 ? RelationKind::kAssociative : RelationKind::kIndependent);
    if (r.kind == RelationKind::kSequential) r.order_by = schema.tables[t].columns.back().name;
    schema.relationships.push_back(r);
  }
  {
    std::vector<std::size_t> order;
    auto visit = [&](auto&& self, std::size_t t) -> void {
      order.push_back(t);
      for (std::size_t c = 1; c < n_tables; ++c)
        if (parent[c] == t) self(self, c);
    };
    visit(visit, 0);
    std::vector<TableSchema> sorted;
    std::vector<std::size_t> new_parent(n_tables);
    for (auto t : order) sorted.push_back(schema.tables[t]);
    schema.tables = std::move(sorted);
    std::vector<std::size_t> position(n_tables);
    for (std::size_t i = 0; i < n_tables; ++i) position[order[i]] = i;
    for (std::size_t t = 0; t < n_tables; ++t) new_parent[position[t]] = position[parent[t]];
    parent = new_parent;
  }

  std::vector<std::vector<std::vector<csv::Cell>>> cols(n_tables);
  std::vector<std::size_t> rows(n_tables, 0);
  for (std::size_t t = 0; t < n_tables; ++t) cols[t].resize(schema.tables[t].columns.size());
  auto add_row = [&](std::size_t t, const std::optional<std::string>& parent_key) {
    const auto& ts = schema.tables[t];
    const std::string key = std::to_string(++rows[t]);
    for (std::size_t c = 0; c < ts.columns.size(); ++c) {
      const auto& col = ts.columns[c];
      if (col.name == "id") cols[t][c].emplace_back(key);
      else if (col.name == "parent_id") cols[t][c].push_back(parent_key);
      else if (col.nullable && rng.uniform() < 0.15) cols[t][c].emplace_back(std::nullopt);
      else cols[t][c].emplace_back(random_cell(rng, col.kind));
    }
    return key;
  };
  auto grow = [&](auto&& self, std::size_t t, const std::string& key) -> void {
    for (std::size_t c = 1; c < n_tables; ++c) {
      if (parent[c] != t) continue;
      const std::size_t k = rng.below(o.max_children + 1);
      for (std::size_t i = 0; i < k; ++i) self(self, c, add_row(c, key));
    }
  };
  const std::size_t n = o.min_entities + rng.below(o.max_entities - o.min_entities + 1);
  for (std::size_t e = 0; e < n; ++e) grow(grow, 0, add_row(0, std::nullopt));

  std::vector<Table> tables;
  for (std::size_t t = 0; t < n_tables; ++t) tables.emplace_back(schema.tables[t], std::move(cols[t]));
  return RelationalDataset(std::move(schema), std::move(tables));
}

}  // namespace relsynth::testing
