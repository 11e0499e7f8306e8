#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relsynth/csv.hpp"

namespace relsynth {

enum class ColumnKind { kCategorical, kContinuous, kInteger, kDatetime, kTimeOfDay, kKey };

std::string_view to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view text);

/// True for kinds whose cells carry a parsed numeric value.
constexpr bool is_numeric_like(ColumnKind k) {
  return k == ColumnKind::kContinuous || k == ColumnKind::kInteger || k == ColumnKind::kDatetime ||
         k == ColumnKind::kTimeOfDay;
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kCategorical;
  bool nullable = false;
};

enum class RelationKind { kSequential, kAssociative, kIndependent };

std::string_view to_string(RelationKind kind);
RelationKind relation_kind_from_string(std::string_view text);

struct Relationship {
  std::string child;
  std::string parent;
  std::string foreign_key;  // column of the child holding the parent's primary key
  RelationKind kind = RelationKind::kAssociative;
  std::optional<std::string> order_by;  // required iff sequential
};

struct TableSchema {
  std::string name;
  std::string primary_key;
  std::vector<ColumnSpec> columns;
  std::string csv_path;  // relative to the config file

  std::optional<std::size_t> find_column(std::string_view column) const;
  std::size_t column_index(std::string_view column) const;
};

/// Tables are kept in tree order: the main table first, then each child after
/// its parent (depth first, in declaration order).
struct DatasetSchema {
  std::string main_table;
  std::vector<TableSchema> tables;
  std::vector<Relationship> relationships;
  std::map<std::string, std::string> templates;  // role -> path relative to config

  std::size_t table_index(std::string_view name) const;
  const TableSchema& table(std::string_view name) const;
  /// Relationship where `table` is the child; nullptr for the main table.
  const Relationship* parent_of(std::string_view table) const;
  std::vector<const Relationship*> children_of(std::string_view table) const;
  /// Depth of a table in the relationship tree (main table = 0).
  std::size_t depth(std::string_view table) const;
};

/// Column-major table of text cells. Numeric-like columns additionally keep the
/// parsed value of each non-null cell.
class Table {
 public:
  Table() = default;
  Table(const TableSchema& schema, std::vector<std::vector<csv::Cell>> columns);

  std::size_t row_count() const { return rows_; }
  std::size_t column_count() const { return cells_.size(); }
  const csv::Cell& cell(std::size_t row, std::size_t column) const { return cells_[column][row]; }
  std::optional<double> value(std::size_t row, std::size_t column) const { return values_[column][row]; }
  const std::vector<csv::Cell>& column(std::size_t column) const { return cells_[column]; }

  /// Rows selected in the given order.
  Table select_rows(const TableSchema& schema, std::span<const std::size_t> rows) const;

 private:
  std::size_t rows_ = 0;
  std::vector<std::vector<csv::Cell>> cells_;
  std::vector<std::vector<std::optional<double>>> values_;
};

/// Parses a cell of the given kind; nullopt when the text does not parse.
std::optional<double> parse_cell_value(ColumnKind kind, std::string_view text);

/// A validated, indexed relational dataset. Immutable after construction.
class RelationalDataset {
 public:
  /// Validates and indexes; throws DataError / ConfigError on violations.
  RelationalDataset(DatasetSchema schema, std::vector<Table> tables);

  const DatasetSchema& schema() const { return schema_; }
  const Table& table(std::string_view name) const { return tables_[schema_.table_index(name)]; }
  const Table& table(std::size_t index) const { return tables_[index]; }
  const Table& main() const { return tables_[0]; }

  /// Number of rows of the main table.
  std::size_t entity_count() const { return tables_[0].row_count(); }
  /// Primary key text of main-table row `entity`.
  const std::string& entity_key(std::size_t entity) const;

  /// Child rows (of `child_table`) attached to `parent_row`, ordered by order-by
  /// for sequential relationships and by row index otherwise.
  const std::vector<std::size_t>& child_rows(std::string_view child_table, std::size_t parent_row) const;
  /// Parent row index for every row of a non-main table.
  const std::vector<std::size_t>& parent_rows(std::string_view child_table) const;
  /// Main-table row that a row of any table belongs to.
  std::size_t entity_of(std::string_view table, std::size_t row) const;

  /// Sub-dataset holding the given entities and all of their descendant rows.
  /// Entity order follows `entities`; descendant rows keep their relative order.
  RelationalDataset subset(std::span<const std::size_t> entities) const;

 private:
  DatasetSchema schema_;
  std::vector<Table> tables_;
  std::vector<std::vector<std::size_t>> parent_row_;               // per table
  std::vector<std::vector<std::vector<std::size_t>>> children_;    // per table: parent row -> rows
};

/// Reads the JSON config and every CSV it names.
RelationalDataset load_dataset(const std::filesystem::path& config_path);
/// Builds the schema from a parsed config document (paths untouched).
DatasetSchema parse_schema_json(const std::string& json_text);
std::string schema_to_json(const DatasetSchema& schema);
/// Writes `<table>.csv` per table and `config.json` into `out_dir`.
void save_dataset(const RelationalDataset& dataset, const std::filesystem::path& out_dir);

struct HoldoutSplit {
  std::vector<std::size_t> train;    // sorted entity indices
  std::vector<std::size_t> holdout;  // sorted entity indices
  double fraction = 0.0;
};

/// Entity-level split; |holdout| = round(fraction * N).
HoldoutSplit split_holdout(const RelationalDataset& dataset, double fraction, std::uint64_t seed);

}  // namespace relsynth
