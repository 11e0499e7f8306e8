#include <doctest.h>

#include <algorithm>

#include "relsynth/analytics.hpp"
#include "relsynth/error.hpp"
#include "relsynth/llm/schema.hpp"
#include "relsynth/toy.hpp"
#include "support/builders.hpp"
#include "support/random_dataset.hpp"
#include "support/schema_oracle.hpp"

using namespace relsynth;
using namespace relsynth::testing;
using relsynth::llm::ojson;

namespace {

DiscretizationSpec person_visit_spec() {
  StrategyConfig cfg;
  cfg.columns["person.age"] = {BinStrategy::kEqualWidth, 5};
  return fit_discretization(person_visit_dataset(), cfg);
}

// Encoded rows of every table, sorted, so row order does not matter.
std::vector<std::vector<std::vector<std::uint32_t>>> encoded_tables(const RelationalDataset& ds,
                                                                    const DiscretizationSpec& spec) {
  std::vector<std::vector<std::vector<std::uint32_t>>> out;
  for (const auto& ts : ds.schema().tables) {
    const auto enc = encode(ds, ts.name, spec);
    std::vector<std::vector<std::uint32_t>> rows(enc.rows);
    for (std::size_t r = 0; r < enc.rows; ++r)
      for (const auto& col : enc.codes) rows[r].push_back(col[r]);
    std::sort(rows.begin(), rows.end());
    out.push_back(std::move(rows));
  }
  return out;
}

}  // namespace

TEST_CASE("schema: categorical enums and child arrays") {
  const auto ds = person_visit_dataset();
  const auto doc = llm::compile_schema(ds.schema(), person_visit_spec()).document;
  CHECK(doc["additionalProperties"] == false);
  CHECK(doc["properties"]["sex"]["enum"] == ojson::array({"F", "M"}));
  CHECK(!doc["properties"].contains("id"));
  const auto& visit = doc["properties"]["visit"];
  CHECK(visit["type"] == "array");
  CHECK(visit["items"]["properties"]["ward"]["enum"] == ojson::array({"er", "icu", "ward", nullptr}));
  CHECK(!visit["items"]["properties"].contains("person_id"));
  CHECK(doc["required"] == ojson::array({"sex", "age", "visit"}));
}

TEST_CASE("schema: depth-two trees nest arrays in arrays") {
  const auto toy = generate_toy({50, 1});
  const auto doc = llm::compile_schema(toy.schema(), fit_discretization(toy)).document;
  const auto& transfer = doc["properties"]["admission"]["items"]["properties"]["transfer"];
  CHECK(transfer["type"] == "array");
  CHECK(transfer["items"]["type"] == "object");
}

TEST_CASE("schema: generic validator accepts a conforming sample and rejects a missing field") {
  const auto ds = person_visit_dataset();
  const auto doc = llm::compile_schema(ds.schema(), person_visit_spec()).document;
  auto good = ojson::parse(R"({"sex": "F", "age": 33, "visit": [{"date": "2020-05-01 9:00", "ward": null}]})");
  CHECK(schema_accepts(doc, good));
  auto missing = good;
  missing.erase("age");
  CHECK_FALSE(schema_accepts(doc, missing));
  auto bad_enum = good;
  bad_enum["sex"] = "X";
  CHECK_FALSE(schema_accepts(doc, bad_enum));
}

TEST_CASE("schema: entity rendering") {
  const auto ds = person_visit_dataset();
  const auto spec = person_visit_spec();
  const auto e = llm::entity_to_json(ds, 0, spec);
  REQUIRE(e["visit"].size() == 3);
  // The 4:30 visit falls in the 4:00 clock bin and is shown at its start.
  CHECK(e["visit"][0]["date"] == "2020-01-02 4:00");
  CHECK(e["visit"][0]["ward"] == "ward");
  CHECK(llm::entity_to_json(ds, 1, spec)["visit"].size() == 2);
  CHECK(llm::entity_to_json(ds, 2, spec)["visit"].empty());
}

TEST_CASE("parse_sample: rows, keys and validation") {
  const auto ds = person_visit_dataset();
  const auto spec = person_visit_spec();
  llm::KeyMinter keys;
  const auto text = R"({"sex": "M", "age": 45, "visit": [{"date": "2020-01-01 4:10", "ward": "icu"},
                                                         {"date": "2020-01-03", "ward": null}]})";
  const auto parsed = llm::parse_sample(text, ds.schema(), spec, keys);
  REQUIRE(parsed.tables.size() == 2);
  CHECK(parsed.tables[0].size() == 1);
  REQUIRE(parsed.tables[1].size() == 2);
  CHECK(parsed.tables[0][0][0] == "1");
  CHECK(parsed.tables[1][0][0] == "1");
  CHECK(parsed.tables[1][1][0] == "2");
  CHECK(parsed.tables[1][1][1] == "1");  // foreign key to the minted person
  CHECK(!parsed.tables[1][1][3]);
  CHECK(parsed.clamped == 0);

  // Age 45 lands in the bin an edge scan over the fitted edges picks.
  const auto& age = spec.feature(spec.index({"person", "age"}));
  std::uint32_t expected = 0;
  for (double edge : age.edges) expected += 45.0 >= edge;
  CHECK(age.encode_number(*parse_cell_value(ColumnKind::kInteger, *parsed.tables[0][0][2])) == expected);

  const auto second = llm::parse_sample(text, ds.schema(), spec, keys);
  CHECK(second.tables[0][0][0] == "2");
  CHECK(second.tables[1][0][0] == "3");
}

TEST_CASE("parse_sample: rejections and clamping") {
  const auto ds = person_visit_dataset();
  const auto spec = person_visit_spec();
  llm::KeyMinter keys;
  auto parse = [&](const char* text) { return llm::parse_sample(text, ds.schema(), spec, keys); };
  CHECK_THROWS_AS(parse(R"({"sex": "X", "age": 45, "visit": []})"), SchemaViolation);
  CHECK_THROWS_AS(parse(R"({"sex": "M", "visit": []})"), SchemaViolation);
  CHECK_THROWS_AS(parse(R"({"sex": "M", "age": 45, "visit": [], "extra": 1})"), SchemaViolation);
  CHECK_THROWS_AS(parse(R"({"sex": "M", "age": 4.5, "visit": []})"), SchemaViolation);
  CHECK_THROWS_AS(parse(R"({"sex": "M", "age": 45, "visit": [{"date": "2020-13-01", "ward": "icu"}]})"),
                  SchemaViolation);
  CHECK_THROWS_AS(parse(R"({"sex": "M", "age": null, "visit": []})"), SchemaViolation);
  CHECK_THROWS_AS(parse("not json"), SchemaViolation);
  CHECK_NOTHROW(parse(R"({"sex": "M", "age": 45.0, "visit": []})"));

  const auto clamped = parse(R"({"sex": "M", "age": 500, "visit": []})");
  CHECK(clamped.clamped == 1);
  const auto& age = spec.feature(spec.index({"person", "age"}));
  CHECK(*parse_cell_value(ColumnKind::kInteger, *clamped.tables[0][0][2]) == age.upper);
}

TEST_CASE("parse_sample property: render then parse round-trips codes and agrees with the validator") {
  Rng rng(61);
  for (int trial = 0; trial < 40; ++trial) {
    const auto ds = random_dataset(rng);
    const auto spec = fit_discretization(ds);
    const auto schema = llm::compile_schema(ds.schema(), spec).document;
    llm::KeyMinter keys;
    llm::DatasetBuilder builder(ds.schema());
    for (std::size_t e = 0; e < ds.entity_count(); ++e) {
      const auto doc = llm::entity_to_json(ds, e, spec);
      CHECK(schema_accepts(schema, doc));
      builder.add(llm::parse_sample(doc.dump(), ds.schema(), spec, keys));
    }
    const auto rebuilt = builder.build();
    CHECK(encoded_tables(rebuilt, spec) == encoded_tables(ds, spec));
    CHECK(build_analytics(rebuilt, spec).codes == build_analytics(ds, spec).codes);
  }
}
