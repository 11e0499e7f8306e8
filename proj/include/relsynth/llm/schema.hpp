#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "relsynth/dataset.hpp"
#include "relsynth/discretize.hpp"

namespace relsynth::llm {

using ojson = nlohmann::ordered_json;

/// Regular expressions (ECMAScript) matching the accepted datetime and clock strings.
extern const char* const kDatetimePattern;
extern const char* const kTimePattern;

/// JSON Schema for one entity: main-table fields as properties and each child
/// table as an array-of-objects property, recursively. Key columns are omitted.
struct EntityJsonSchema {
  ojson document;
  std::string dump() const { return document.dump(); }
};

EntityJsonSchema compile_schema(const DatasetSchema& schema, const DiscretizationSpec& spec);

/// Schema of a realism verdict: {"reasoning": string, "score": 1..5}.
ojson realism_score_schema();

/// The entity with human-readable values: categories as strings, numbers as
/// numbers, datetimes as "YYYY-MM-DD H:MM" and clock times as "H:MM", with
/// times shown at the start of their clock bin.
ojson entity_to_json(const RelationalDataset& dataset, std::size_t entity, const DiscretizationSpec& spec);

/// Allocates fresh sequential keys ("1", "2", ...) per "table.column" slot.
class KeyMinter {
 public:
  std::string mint(const std::string& slot) { return std::to_string(next_[slot]++ + 1); }

 private:
  std::map<std::string, std::uint64_t> next_;
};

/// Rows recovered from a generated entity, per table in schema order; each row
/// holds one cell per schema column.
struct ParsedEntity {
  std::vector<std::vector<std::vector<csv::Cell>>> tables;
  std::size_t clamped = 0;  // numeric values pulled back into the fitted range
};

/// Validates `text` against the dataset structure (the same rules the compiled
/// schema states) and converts it to relational rows with freshly minted keys.
/// Throws SchemaViolation on any mismatch.
ParsedEntity parse_sample(std::string_view text, const DatasetSchema& schema, const DiscretizationSpec& spec,
                          KeyMinter& keys);

/// Accumulates parsed entities into a dataset with the given schema.
class DatasetBuilder {
 public:
  explicit DatasetBuilder(const DatasetSchema& schema);
  void add(ParsedEntity entity);
  std::size_t entity_count() const { return entities_; }
  RelationalDataset build() const;

 private:
  DatasetSchema schema_;
  std::vector<std::vector<std::vector<csv::Cell>>> columns_;  // per table, column-major
  std::size_t entities_ = 0;
};

}  // namespace relsynth::llm
