#pragma once

// Small hand-written datasets for unit tests.

#include <string>
#include <vector>

#include "relsynth/dataset.hpp"

namespace relsynth::testing {

/// Row-major text rows to a table; an empty string is a null cell.
inline Table make_table(const TableSchema& ts, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::vector<csv::Cell>> cols(ts.columns.size());
  for (const auto& row : rows)
    for (std::size_t c = 0; c < ts.columns.size(); ++c) {
      if (row[c].empty()) cols[c].emplace_back(std::nullopt);
      else cols[c].emplace_back(row[c]);
    }
  return Table(ts, std::move(cols));
}

inline TableSchema person_schema() {
  return {"person", "id", {{"id", ColumnKind::kKey}, {"sex", ColumnKind::kCategorical}, {"age", ColumnKind::kInteger}},
          "person.csv"};
}

inline TableSchema visit_schema() {
  return {"visit",
          "id",
          {{"id", ColumnKind::kKey},
           {"person_id", ColumnKind::kKey},
           {"date", ColumnKind::kDatetime},
           {"ward", ColumnKind::kCategorical, true}},
          "visit.csv"};
}

inline DatasetSchema person_visit_schema(RelationKind kind = RelationKind::kSequential) {
  DatasetSchema s;
  s.main_table = "person";
  s.tables = {person_schema(), visit_schema()};
  Relationship r{"visit", "person", "person_id", kind, std::nullopt};
  if (kind == RelationKind::kSequential) r.order_by = "date";
  s.relationships.push_back(r);
  return s;
}

/// person(3 rows) with visit(5 rows): person 1 has three visits stored out of
/// date order, person 2 has two, person 3 has none.
inline RelationalDataset person_visit_dataset() {
  const auto s = person_visit_schema();
  std::vector<Table> tables;
  tables.push_back(make_table(s.tables[0], {{"1", "M", "40"}, {"2", "F", "70"}, {"3", "F", "25"}}));
  tables.push_back(make_table(s.tables[1], {{"10", "1", "2020-03-05 10:00", "icu"},
                                            {"11", "1", "2020-01-02 4:30", "ward"},
                                            {"12", "2", "2021-06-01", ""},
                                            {"13", "1", "2020-02-10 23:15", "er"},
                                            {"14", "2", "2021-07-01 12:00", "ward"}}));
  return RelationalDataset(s, std::move(tables));
}

}  // namespace relsynth::testing

#include <filesystem>

namespace relsynth::testing {

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("relsynth_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace relsynth::testing
