#include "relsynth/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "relsynth/error.hpp"
#include "relsynth/random.hpp"
#include "relsynth/timefmt.hpp"

namespace relsynth {

using json = nlohmann::json;

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kCategorical: return "categorical";
    case ColumnKind::kContinuous: return "continuous";
    case ColumnKind::kInteger: return "integer";
    case ColumnKind::kDatetime: return "datetime";
    case ColumnKind::kTimeOfDay: return "time";
    case ColumnKind::kKey: return "key";
  }
  return "?";
}

ColumnKind column_kind_from_string(std::string_view text) {
  if (text == "categorical") return ColumnKind::kCategorical;
  if (text == "continuous" || text == "numeric") return ColumnKind::kContinuous;
  if (text == "integer") return ColumnKind::kInteger;
  if (text == "datetime" || text == "date") return ColumnKind::kDatetime;
  if (text == "time" || text == "time_of_day") return ColumnKind::kTimeOfDay;
  if (text == "key") return ColumnKind::kKey;
  throw ConfigError("unknown column kind '" + std::string(text) + "'");
}

std::string_view to_string(RelationKind kind) {
  switch (kind) {
    case RelationKind::kSequential: return "sequential";
    case RelationKind::kAssociative: return "associative";
    case RelationKind::kIndependent: return "independent";
  }
  return "?";
}

RelationKind relation_kind_from_string(std::string_view text) {
  if (text == "sequential") return RelationKind::kSequential;
  if (text == "associative") return RelationKind::kAssociative;
  if (text == "independent") return RelationKind::kIndependent;
  throw ConfigError("unknown relationship kind '" + std::string(text) + "'");
}

std::optional<std::size_t> TableSchema::find_column(std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == column) return i;
  return std::nullopt;
}

std::size_t TableSchema::column_index(std::string_view column) const {
  if (auto i = find_column(column)) return *i;
  throw ConfigError("table '" + name + "' has no column '" + std::string(column) + "'");
}

std::size_t DatasetSchema::table_index(std::string_view name) const {
  for (std::size_t i = 0; i < tables.size(); ++i)
    if (tables[i].name == name) return i;
  throw ConfigError("unknown table '" + std::string(name) + "'");
}

const TableSchema& DatasetSchema::table(std::string_view name) const { return tables[table_index(name)]; }

const Relationship* DatasetSchema::parent_of(std::string_view table) const {
  for (const auto& r : relationships)
    if (r.child == table) return &r;
  return nullptr;
}

std::vector<const Relationship*> DatasetSchema::children_of(std::string_view table) const {
  std::vector<const Relationship*> out;
  for (const auto& r : relationships)
    if (r.parent == table) out.push_back(&r);
  return out;
}

std::size_t DatasetSchema::depth(std::string_view table) const {
  std::size_t d = 0;
  for (const Relationship* r = parent_of(table); r != nullptr; r = parent_of(r->parent)) ++d;
  return d;
}

std::optional<double> parse_cell_value(ColumnKind kind, std::string_view text) {
  switch (kind) {
    case ColumnKind::kContinuous:
    case ColumnKind::kInteger: {
      double v = 0.0;
      const auto* first = text.data();
      const auto* last = text.data() + text.size();
      if (first != last && *first == '+') ++first;
      const auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) return std::nullopt;
      if (kind == ColumnKind::kInteger && v != std::floor(v)) return std::nullopt;
      return v;
    }
    case ColumnKind::kDatetime: return timefmt::parse_datetime(text);
    case ColumnKind::kTimeOfDay: return timefmt::parse_time_of_day(text);
    default: return std::nullopt;
  }
}

Table::Table(const TableSchema& schema, std::vector<std::vector<csv::Cell>> columns)
    : rows_(columns.empty() ? 0 : columns.front().size()), cells_(std::move(columns)) {
  if (cells_.size() != schema.columns.size())
    throw DataError("table '" + schema.name + "': column count mismatch");
  values_.resize(cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const auto& spec = schema.columns[c];
    if (cells_[c].size() != rows_) throw DataError("table '" + schema.name + "': ragged columns");
    values_[c].resize(rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
      const auto& cell = cells_[c][r];
      if (!cell) {
        if (!spec.nullable)
          throw DataError("table '" + schema.name + "' column '" + spec.name + "' row " + std::to_string(r) +
                          ": null in non-nullable column");
        continue;
      }
      if (is_numeric_like(spec.kind)) {
        values_[c][r] = parse_cell_value(spec.kind, *cell);
        if (!values_[c][r])
          throw DataError("table '" + schema.name + "' column '" + spec.name + "' row " + std::to_string(r) +
                          ": cannot parse '" + *cell + "' as " + std::string(to_string(spec.kind)));
      }
    }
  }
}

Table Table::select_rows(const TableSchema& schema, std::span<const std::size_t> rows) const {
  std::vector<std::vector<csv::Cell>> cols(cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    cols[c].reserve(rows.size());
    for (auto r : rows) cols[c].push_back(cells_[c][r]);
  }
  return Table(schema, std::move(cols));
}

namespace {

void validate_schema(DatasetSchema& schema) {
  std::set<std::string> names;
  for (const auto& t : schema.tables) {
    if (!names.insert(t.name).second) throw ConfigError("duplicate table '" + t.name + "'");
    std::set<std::string> cols;
    for (const auto& c : t.columns)
      if (!cols.insert(c.name).second) throw ConfigError("table '" + t.name + "': duplicate column '" + c.name + "'");
    const auto pk = t.find_column(t.primary_key);
    if (t.primary_key.empty() || !pk) throw ConfigError("table '" + t.name + "': primary key column missing");
    if (t.columns[*pk].kind != ColumnKind::kKey)
      throw ConfigError("table '" + t.name + "': primary key '" + t.primary_key + "' must have kind key");
  }
  if (!names.count(schema.main_table)) throw ConfigError("main table '" + schema.main_table + "' is not declared");

  for (const auto& r : schema.relationships) {
    if (!names.count(r.child) || !names.count(r.parent))
      throw ConfigError("relationship " + r.child + " -> " + r.parent + " names an unknown table");
    const auto& child = schema.table(r.child);
    const auto fk = child.find_column(r.foreign_key);
    if (!fk) throw ConfigError("relationship " + r.child + " -> " + r.parent + ": foreign key column '" +
                               r.foreign_key + "' missing");
    if (child.columns[*fk].kind != ColumnKind::kKey)
      throw ConfigError("foreign key '" + r.child + "." + r.foreign_key + "' must have kind key");
    if (r.kind == RelationKind::kSequential) {
      if (!r.order_by) throw ConfigError("sequential relationship " + r.child + " -> " + r.parent + " has no order_by");
      const auto ob = child.find_column(*r.order_by);
      if (!ob) throw ConfigError("order_by column '" + *r.order_by + "' missing in '" + r.child + "'");
      if (child.columns[*ob].kind == ColumnKind::kKey)
        throw ConfigError("order_by column '" + *r.order_by + "' cannot be a key");
    }
  }

  // Every table must reach the main table by following unique parent links.
  std::map<std::string, int> parent_count;
  for (const auto& r : schema.relationships) ++parent_count[r.child];
  for (const auto& t : schema.tables) {
    std::set<std::string> seen{t.name};
    std::string cur = t.name;
    while (const Relationship* r = schema.parent_of(cur)) {
      if (!seen.insert(r->parent).second)
        throw ConfigError("cyclic relationship graph through table '" + r->parent + "'");
      cur = r->parent;
    }
  }
  for (const auto& [table, n] : parent_count) {
    if (n > 1) throw ConfigError("table '" + table + "' has more than one parent relationship");
    if (table == schema.main_table) throw ConfigError("main table cannot be a child");
  }
  for (const auto& t : schema.tables)
    if (t.name != schema.main_table && !parent_count.count(t.name))
      throw ConfigError("table '" + t.name + "' is not connected to the main table");

  // Reorder tables: main first, then depth-first by declaration order.
  std::vector<TableSchema> ordered;
  const auto visit = [&](auto&& self, const std::string& name) -> void {
    ordered.push_back(schema.table(name));
    for (const auto* r : schema.children_of(name)) self(self, r->child);
  };
  visit(visit, schema.main_table);
  schema.tables = std::move(ordered);
}

}  // namespace

DatasetSchema parse_schema_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  DatasetSchema schema;
  try {
    schema.main_table = doc.at("main_table").get<std::string>();
    for (const auto& jt : doc.at("tables")) {
      TableSchema t;
      t.name = jt.at("name").get<std::string>();
      t.primary_key = jt.value("primary_key", std::string());
      t.csv_path = jt.value("path", t.name + ".csv");
      for (const auto& jc : jt.at("columns")) {
        ColumnSpec c;
        c.name = jc.at("name").get<std::string>();
        c.kind = column_kind_from_string(jc.at("kind").get<std::string>());
        c.nullable = jc.value("nullable", false);
        t.columns.push_back(std::move(c));
      }
      schema.tables.push_back(std::move(t));
    }
    if (doc.contains("relationships")) {
      for (const auto& jr : doc.at("relationships")) {
        Relationship r;
        r.child = jr.at("child").get<std::string>();
        r.parent = jr.at("parent").get<std::string>();
        r.foreign_key = jr.at("foreign_key").get<std::string>();
        r.kind = relation_kind_from_string(jr.value("kind", std::string("associative")));
        if (jr.contains("order_by") && !jr.at("order_by").is_null()) r.order_by = jr.at("order_by").get<std::string>();
        schema.relationships.push_back(std::move(r));
      }
    }
    if (doc.contains("templates"))
      for (const auto& [role, path] : doc.at("templates").items()) schema.templates[role] = path.get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  validate_schema(schema);
  return schema;
}

std::string schema_to_json(const DatasetSchema& schema) {
  json doc;
  doc["main_table"] = schema.main_table;
  doc["tables"] = json::array();
  for (const auto& t : schema.tables) {
    json jt{{"name", t.name}, {"path", t.csv_path}, {"primary_key", t.primary_key}, {"columns", json::array()}};
    for (const auto& c : t.columns) {
      json jc{{"name", c.name}, {"kind", std::string(to_string(c.kind))}};
      if (c.nullable) jc["nullable"] = true;
      jt["columns"].push_back(std::move(jc));
    }
    doc["tables"].push_back(std::move(jt));
  }
  doc["relationships"] = json::array();
  for (const auto& r : schema.relationships) {
    json jr{{"child", r.child},
            {"parent", r.parent},
            {"foreign_key", r.foreign_key},
            {"kind", std::string(to_string(r.kind))}};
    if (r.order_by) jr["order_by"] = *r.order_by;
    doc["relationships"].push_back(std::move(jr));
  }
  if (!schema.templates.empty()) doc["templates"] = schema.templates;
  return doc.dump(2) + "\n";
}

RelationalDataset::RelationalDataset(DatasetSchema schema, std::vector<Table> tables)
    : schema_(std::move(schema)), tables_(std::move(tables)) {
  if (tables_.size() != schema_.tables.size()) throw DataError("table count does not match schema");
  {
    // Validation may reorder tables into tree order; keep the data aligned.
    auto checked = schema_;
    validate_schema(checked);
    std::vector<Table> ordered;
    ordered.reserve(tables_.size());
    for (const auto& ts : checked.tables) ordered.push_back(std::move(tables_[schema_.table_index(ts.name)]));
    tables_ = std::move(ordered);
    schema_ = std::move(checked);
  }
  const std::size_t n_tables = tables_.size();
  parent_row_.assign(n_tables, {});
  children_.assign(n_tables, {});

  std::vector<std::unordered_map<std::string, std::size_t>> pk_index(n_tables);
  for (std::size_t t = 0; t < n_tables; ++t) {
    const auto& ts = schema_.tables[t];
    const auto pk = ts.column_index(ts.primary_key);
    auto& index = pk_index[t];
    for (std::size_t r = 0; r < tables_[t].row_count(); ++r) {
      const auto& key = tables_[t].cell(r, pk);
      if (!key) throw DataError("table '" + ts.name + "' row " + std::to_string(r) + ": null primary key");
      if (!index.emplace(*key, r).second)
        throw DataError("table '" + ts.name + "': duplicate primary key '" + *key + "'");
    }
    for (const auto& c : ts.columns) {
      if (c.kind != ColumnKind::kKey) continue;
      const auto ci = ts.column_index(c.name);
      for (std::size_t r = 0; r < tables_[t].row_count(); ++r)
        if (!tables_[t].cell(r, ci))
          throw DataError("table '" + ts.name + "' column '" + c.name + "': null key value");
    }
  }

  for (std::size_t t = 1; t < n_tables; ++t) {
    const auto& ts = schema_.tables[t];
    const Relationship* rel = schema_.parent_of(ts.name);
    const auto p = schema_.table_index(rel->parent);
    const auto fk = ts.column_index(rel->foreign_key);
    auto& parents = parent_row_[t];
    parents.resize(tables_[t].row_count());
    children_[t].assign(tables_[p].row_count(), {});
    for (std::size_t r = 0; r < tables_[t].row_count(); ++r) {
      const auto& key = *tables_[t].cell(r, fk);
      const auto it = pk_index[p].find(key);
      if (it == pk_index[p].end())
        throw DataError("dangling foreign key: table '" + ts.name + "' column '" + rel->foreign_key + "' value '" +
                        key + "' has no row in '" + rel->parent + "'");
      parents[r] = it->second;
      children_[t][it->second].push_back(r);
    }
    if (rel->kind == RelationKind::kSequential) {
      const auto ob = ts.column_index(*rel->order_by);
      const auto kind = ts.columns[ob].kind;
      const auto& tab = tables_[t];
      const auto less = [&](std::size_t a, std::size_t b) {
        const auto& ca = tab.cell(a, ob);
        const auto& cb = tab.cell(b, ob);
        if (!ca || !cb) return ca.has_value() && !cb.has_value();  // nulls last
        if (is_numeric_like(kind)) return *tab.value(a, ob) < *tab.value(b, ob);
        return *ca < *cb;
      };
      for (auto& rows : children_[t]) std::stable_sort(rows.begin(), rows.end(), less);
    }
  }
}

const std::string& RelationalDataset::entity_key(std::size_t entity) const {
  return *tables_[0].cell(entity, schema_.tables[0].column_index(schema_.tables[0].primary_key));
}

const std::vector<std::size_t>& RelationalDataset::child_rows(std::string_view child_table,
                                                              std::size_t parent_row) const {
  return children_[schema_.table_index(child_table)].at(parent_row);
}

const std::vector<std::size_t>& RelationalDataset::parent_rows(std::string_view child_table) const {
  return parent_row_[schema_.table_index(child_table)];
}

std::size_t RelationalDataset::entity_of(std::string_view table, std::size_t row) const {
  std::string cur(table);
  while (const Relationship* r = schema_.parent_of(cur)) {
    row = parent_row_[schema_.table_index(cur)][row];
    cur = r->parent;
  }
  return row;
}

RelationalDataset RelationalDataset::subset(std::span<const std::size_t> entities) const {
  const std::size_t n_tables = tables_.size();
  std::vector<std::vector<std::size_t>> keep(n_tables);
  keep[0].assign(entities.begin(), entities.end());
  // Tables are in tree order, so parents are finalized before their children.
  for (std::size_t t = 1; t < n_tables; ++t) {
    const auto p = schema_.table_index(schema_.parent_of(schema_.tables[t].name)->parent);
    std::vector<char> parent_kept(tables_[p].row_count(), 0);
    for (auto r : keep[p]) parent_kept[r] = 1;
    for (std::size_t r = 0; r < tables_[t].row_count(); ++r)
      if (parent_kept[parent_row_[t][r]]) keep[t].push_back(r);
  }
  std::vector<Table> out;
  out.reserve(n_tables);
  for (std::size_t t = 0; t < n_tables; ++t) out.push_back(tables_[t].select_rows(schema_.tables[t], keep[t]));
  return RelationalDataset(schema_, std::move(out));
}

RelationalDataset load_dataset(const std::filesystem::path& config_path) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open dataset config: " + config_path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  DatasetSchema schema = parse_schema_json(ss.str());
  const auto base = config_path.parent_path();
  std::vector<Table> tables;
  for (const auto& ts : schema.tables) {
    const auto doc = csv::read_file(base / ts.csv_path);
    std::vector<std::vector<csv::Cell>> cols(ts.columns.size());
    for (std::size_t c = 0; c < ts.columns.size(); ++c) {
      const auto it = std::find(doc.header.begin(), doc.header.end(), ts.columns[c].name);
      if (it == doc.header.end())
        throw DataError("table '" + ts.name + "': csv has no column '" + ts.columns[c].name + "'");
      const auto h = static_cast<std::size_t>(it - doc.header.begin());
      cols[c].reserve(doc.rows.size());
      for (const auto& row : doc.rows) cols[c].push_back(row[h]);
    }
    if (doc.header.size() != ts.columns.size())
      throw DataError("table '" + ts.name + "': csv has undeclared columns");
    tables.emplace_back(ts, std::move(cols));
  }
  return RelationalDataset(std::move(schema), std::move(tables));
}

void save_dataset(const RelationalDataset& dataset, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  DatasetSchema schema = dataset.schema();
  for (std::size_t t = 0; t < schema.tables.size(); ++t) {
    auto& ts = schema.tables[t];
    ts.csv_path = ts.name + ".csv";
    csv::Document doc;
    for (const auto& c : ts.columns) doc.header.push_back(c.name);
    const auto& table = dataset.table(t);
    doc.rows.resize(table.row_count());
    for (std::size_t r = 0; r < table.row_count(); ++r) {
      doc.rows[r].reserve(table.column_count());
      for (std::size_t c = 0; c < table.column_count(); ++c) doc.rows[r].push_back(table.cell(r, c));
    }
    csv::write_file(out_dir / ts.csv_path, doc);
  }
  schema.templates.clear();
  std::ofstream out(out_dir / "config.json", std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + (out_dir / "config.json").string());
  out << schema_to_json(schema);
}

HoldoutSplit split_holdout(const RelationalDataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
  const std::size_t n = dataset.entity_count();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  const auto n_holdout = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  HoldoutSplit split;
  split.fraction = fraction;
  split.holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_holdout));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_holdout), order.end());
  std::sort(split.holdout.begin(), split.holdout.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

}  // namespace relsynth
