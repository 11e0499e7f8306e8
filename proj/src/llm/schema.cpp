#include "relsynth/llm/schema.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include "relsynth/error.hpp"
#include "relsynth/timefmt.hpp"

namespace relsynth::llm {

const char* const kDatetimePattern =
    "^[0-9]{4}-(0[1-9]|1[0-2])-(0[1-9]|[12][0-9]|3[01])([ T]([01]?[0-9]|2[0-3]):[0-5][0-9](:[0-5][0-9])?)?$";
const char* const kTimePattern = "^([01]?[0-9]|2[0-3]):[0-5][0-9](:[0-5][0-9])?$";

namespace {

bool is_key_column(const TableSchema& t, const ColumnSpec& c) { return c.kind == ColumnKind::kKey || c.name == t.primary_key; }

ojson nullable_type(const char* type, bool nullable) {
  if (!nullable) return type;
  return ojson::array({type, "null"});
}

ojson column_schema(const TableSchema& t, const ColumnSpec& c, const DiscretizationSpec& spec) {
  ojson s = ojson::object();
  switch (c.kind) {
    case ColumnKind::kCategorical: {
      ojson values = ojson::array();
      if (auto i = spec.find({t.name, c.name, Component::kValue}))
        for (const auto& cat : spec.feature(*i).categories) values.push_back(cat);
      if (c.nullable) values.push_back(nullptr);
      s["enum"] = std::move(values);
      break;
    }
    case ColumnKind::kContinuous:
    case ColumnKind::kInteger: {
      s["type"] = nullable_type(c.kind == ColumnKind::kInteger ? "integer" : "number", c.nullable);
      // The fitted range is advisory: out-of-range values are clamped on parse.
      if (auto i = spec.find({t.name, c.name, Component::kValue})) {
        const auto& f = spec.feature(*i);
        char buf[96];
        std::snprintf(buf, sizeof buf, "typical range %g to %g", f.lower, f.upper);
        s["description"] = buf;
      }
      break;
    }
    case ColumnKind::kDatetime:
      s["type"] = nullable_type("string", c.nullable);
      s["pattern"] = kDatetimePattern;
      s["description"] = "YYYY-MM-DD H:MM";
      break;
    case ColumnKind::kTimeOfDay:
      s["type"] = nullable_type("string", c.nullable);
      s["pattern"] = kTimePattern;
      s["description"] = "H:MM";
      break;
    case ColumnKind::kKey: break;
  }
  return s;
}

ojson table_schema(const DatasetSchema& ds, const TableSchema& t, const DiscretizationSpec& spec) {
  ojson props = ojson::object();
  ojson required = ojson::array();
  for (const auto& c : t.columns) {
    if (is_key_column(t, c)) continue;
    props[c.name] = column_schema(t, c, spec);
    required.push_back(c.name);
  }
  for (const auto* rel : ds.children_of(t.name)) {
    props[rel->child] = {{"type", "array"}, {"items", table_schema(ds, ds.table(rel->child), spec)}};
    required.push_back(rel->child);
  }
  return {{"type", "object"}, {"properties", std::move(props)}, {"required", std::move(required)},
          {"additionalProperties", false}};
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_integer(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
  return buf;
}

// Start of the clock bin holding `seconds_of_day`, or the value itself when the
// feature is missing.
double clock_bin_start(const DiscretizationSpec& spec, const FeatureId& id, double seconds_of_day) {
  const auto i = spec.find(id);
  if (!i) return seconds_of_day;
  const auto& f = spec.feature(*i);
  return f.bin_range(f.encode_number(seconds_of_day)).first;
}

ojson cell_to_json(const Table& table, std::size_t row, std::size_t col, const TableSchema& t,
                   const DiscretizationSpec& spec) {
  const auto& c = t.columns[col];
  const auto& cell = table.cell(row, col);
  if (!cell) return nullptr;
  const auto v = table.value(row, col);
  switch (c.kind) {
    case ColumnKind::kCategorical: return *cell;
    case ColumnKind::kContinuous: return *v;
    case ColumnKind::kInteger: return static_cast<std::int64_t>(std::llround(*v));
    case ColumnKind::kTimeOfDay:
      return timefmt::format_clock(clock_bin_start(spec, {t.name, c.name, Component::kTime}, *v));
    case ColumnKind::kDatetime: {
      const double day = std::floor(*v / timefmt::kSecondsPerDay);
      const double tod = *v - day * timefmt::kSecondsPerDay;
      const double start = clock_bin_start(spec, {t.name, c.name, Component::kTime}, tod);
      return timefmt::format_date(static_cast<std::int64_t>(day)) + " " + timefmt::format_clock(start);
    }
    case ColumnKind::kKey: break;
  }
  return nullptr;
}

ojson row_to_json(const RelationalDataset& ds, std::size_t table_index, std::size_t row,
                  const DiscretizationSpec& spec) {
  const auto& t = ds.schema().tables[table_index];
  const auto& table = ds.table(table_index);
  ojson out = ojson::object();
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (is_key_column(t, t.columns[c])) continue;
    out[t.columns[c].name] = cell_to_json(table, row, c, t, spec);
  }
  for (const auto* rel : ds.schema().children_of(t.name)) {
    ojson items = ojson::array();
    const auto child = ds.schema().table_index(rel->child);
    for (std::size_t r : ds.child_rows(rel->child, row)) items.push_back(row_to_json(ds, child, r, spec));
    out[rel->child] = std::move(items);
  }
  return out;
}

struct Parser {
  const DatasetSchema& schema;
  const DiscretizationSpec& spec;
  KeyMinter& keys;
  ParsedEntity out;

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw SchemaViolation(path + ": " + what);
  }

  csv::Cell value(const TableSchema& t, const ColumnSpec& c, const ojson& v, const std::string& path) {
    if (v.is_null()) {
      if (!c.nullable) fail(path, "null in a non-nullable field");
      return std::nullopt;
    }
    switch (c.kind) {
      case ColumnKind::kCategorical: {
        if (!v.is_string()) fail(path, "expected a category string");
        const auto s = v.get<std::string>();
        const auto i = spec.find({t.name, c.name, Component::kValue});
        if (!i || !spec.feature(*i).encode_category(s)) fail(path, "'" + s + "' is not an allowed category");
        return s;
      }
      case ColumnKind::kContinuous:
      case ColumnKind::kInteger: {
        if (!v.is_number()) fail(path, "expected a number");
        double x = v.get<double>();
        const bool integer = c.kind == ColumnKind::kInteger;
        if (integer && v.is_number_float() && x != std::floor(x)) fail(path, "expected an integer");
        if (auto i = spec.find({t.name, c.name, Component::kValue})) {
          const auto& f = spec.feature(*i);
          const double y = std::clamp(x, f.lower, f.upper);
          if (y != x) {
            ++out.clamped;
            x = integer ? std::round(y) : y;
          }
        }
        return integer ? format_integer(x) : format_number(x);
      }
      case ColumnKind::kDatetime: {
        if (!v.is_string()) fail(path, "expected a datetime string");
        auto s = v.get<std::string>();
        const auto parsed = timefmt::parse_datetime(s);
        if (!parsed) fail(path, "'" + s + "' is not a datetime");
        return s;
      }
      case ColumnKind::kTimeOfDay: {
        if (!v.is_string()) fail(path, "expected a time string");
        auto s = v.get<std::string>();
        if (!timefmt::parse_time_of_day(s)) fail(path, "'" + s + "' is not a time of day");
        return s;
      }
      case ColumnKind::kKey: break;
    }
    return std::nullopt;
  }

  void row(std::size_t table_index, const ojson& obj, const std::optional<std::string>& parent_key,
           const std::string& path) {
    const auto& t = schema.tables[table_index];
    if (!obj.is_object()) fail(path, "expected an object");
    const auto* up = schema.parent_of(t.name);
    const auto children = schema.children_of(t.name);
    std::set<std::string> expected;
    std::vector<csv::Cell> cells(t.columns.size());
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      const auto& col = t.columns[c];
      if (col.name == t.primary_key) {
        cells[c] = keys.mint(t.name + "." + col.name);
      } else if (up && col.name == up->foreign_key) {
        cells[c] = parent_key;
      } else if (col.kind == ColumnKind::kKey) {
        cells[c] = keys.mint(t.name + "." + col.name);
      } else {
        expected.insert(col.name);
        const auto it = obj.find(col.name);
        if (it == obj.end()) fail(path, "missing field '" + col.name + "'");
        cells[c] = value(t, col, *it, path + "." + col.name);
      }
    }
    for (const auto* rel : children) {
      expected.insert(rel->child);
      if (!obj.contains(rel->child)) fail(path, "missing field '" + rel->child + "'");
    }
    for (const auto& item : obj.items())
      if (!expected.count(item.key())) fail(path, "unexpected field '" + item.key() + "'");
    const std::string key = *cells[t.column_index(t.primary_key)];
    out.tables[table_index].push_back(std::move(cells));
    for (const auto* rel : children) {
      const auto& arr = obj.at(rel->child);
      const std::string child_path = path + "." + rel->child;
      if (!arr.is_array()) fail(child_path, "expected an array");
      const auto ci = schema.table_index(rel->child);
      for (std::size_t i = 0; i < arr.size(); ++i)
        row(ci, arr[i], key, child_path + "[" + std::to_string(i) + "]");
    }
  }
};

}  // namespace

EntityJsonSchema compile_schema(const DatasetSchema& schema, const DiscretizationSpec& spec) {
  return {table_schema(schema, schema.table(schema.main_table), spec)};
}

ojson realism_score_schema() {
  return {{"type", "object"},
          {"properties", {{"reasoning", {{"type", "string"}}}, {"score", {{"type", "integer"}, {"enum", {1, 2, 3, 4, 5}}}}}},
          {"required", ojson::array({"reasoning", "score"})},
          {"additionalProperties", false}};
}

ojson entity_to_json(const RelationalDataset& dataset, std::size_t entity, const DiscretizationSpec& spec) {
  return row_to_json(dataset, 0, entity, spec);
}

ParsedEntity parse_sample(std::string_view text, const DatasetSchema& schema, const DiscretizationSpec& spec,
                          KeyMinter& keys) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw SchemaViolation(std::string("response is not JSON: ") + e.what());
  }
  Parser p{schema, spec, keys, {}};
  p.out.tables.resize(schema.tables.size());
  p.row(schema.table_index(schema.main_table), doc, std::nullopt, "$");
  return std::move(p.out);
}

DatasetBuilder::DatasetBuilder(const DatasetSchema& schema) : schema_(schema) {
  columns_.resize(schema_.tables.size());
  for (std::size_t t = 0; t < schema_.tables.size(); ++t) columns_[t].resize(schema_.tables[t].columns.size());
}

void DatasetBuilder::add(ParsedEntity entity) {
  for (std::size_t t = 0; t < entity.tables.size(); ++t)
    for (auto& row : entity.tables[t])
      for (std::size_t c = 0; c < row.size(); ++c) columns_[t][c].push_back(std::move(row[c]));
  ++entities_;
}

RelationalDataset DatasetBuilder::build() const {
  std::vector<Table> tables;
  tables.reserve(schema_.tables.size());
  for (std::size_t t = 0; t < schema_.tables.size(); ++t) tables.emplace_back(schema_.tables[t], columns_[t]);
  return RelationalDataset(schema_, std::move(tables));
}

}  // namespace relsynth::llm
