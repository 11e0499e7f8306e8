#include <doctest.h>

#include <tuple>

#include "relsynth/analytics.hpp"
#include "support/builders.hpp"
#include "support/random_dataset.hpp"

using namespace relsynth;
using namespace relsynth::testing;

namespace {

// Brute-force first row of `table` under `parent_row`: scans every row, orders
// sequential children by (null last, value, row index), others by row index.
std::optional<std::size_t> first_child(const RelationalDataset& ds, std::size_t t, std::size_t parent_row) {
  const auto& schema = ds.schema();
  const auto& ts = schema.tables[t];
  const auto* rel = schema.parent_of(ts.name);
  const auto& parents = ds.parent_rows(ts.name);
  const auto& tab = ds.table(t);
  std::optional<std::size_t> best;
  auto key = [&](std::size_t r) {
    if (rel->kind != RelationKind::kSequential) return std::tuple<int, double, std::string, std::size_t>{0, 0.0, "", r};
    const auto ob = ts.column_index(*rel->order_by);
    const auto& cell = tab.cell(r, ob);
    if (!cell) return std::tuple<int, double, std::string, std::size_t>{1, 0.0, "", r};
    const bool numeric = is_numeric_like(ts.columns[ob].kind);
    return std::tuple<int, double, std::string, std::size_t>{0, numeric ? *tab.value(r, ob) : 0.0,
                                                            numeric ? "" : *cell, r};
  };
  for (std::size_t r = 0; r < tab.row_count(); ++r)
    if (parents[r] == parent_row && (!best || key(r) < key(*best))) best = r;
  return best;
}

std::size_t count_children(const RelationalDataset& ds, std::size_t t, std::size_t parent_row) {
  std::size_t n = 0;
  for (auto p : ds.parent_rows(ds.schema().tables[t].name)) n += p == parent_row;
  return n;
}

std::size_t column_of(const AnalyticsTable& a, const DiscretizationSpec& spec, const FeatureId& id) {
  const auto f = spec.index(id);
  for (std::size_t c = 0; c < a.features.size(); ++c)
    if (a.features[c] == f) return c;
  FAIL("feature not in analytics table");
  return 0;
}

}  // namespace

TEST_CASE("analytics: first sequential child is selected and children are counted") {
  const auto ds = person_visit_dataset();
  const auto spec = fit_discretization(ds);
  const auto a = build_analytics(ds, spec);
  REQUIRE(a.row_count() == 3);
  const auto ward = column_of(a, spec, {"visit", "ward"});
  const auto count = column_of(a, spec, {"visit", "", Component::kCount});
  const auto& wf = spec.feature(a.features[ward]);
  // Person 1: earliest visit is row 1 (2020-01-02, ward), three visits.
  CHECK(wf.decode_label(a.codes[ward][0]) == "ward");
  CHECK(a.raw_counts[0][0] == 3);
  CHECK(spec.feature(a.features[count]).decode_label(a.codes[count][0]) == "3");
  // Person 2: earliest visit has a null ward.
  CHECK(a.codes[ward][1] == *wf.null_code());
  // Person 3: no visits, every visit column null-coded and count 0.
  for (std::size_t c = 0; c < a.column_count(); ++c) {
    const auto& f = spec.feature(a.features[c]);
    if (f.id.table != "visit" || f.id.component == Component::kCount) continue;
    CHECK(a.codes[c][2] == *f.null_code());
  }
  CHECK(a.raw_counts[0][2] == 0);
}

TEST_CASE("analytics: two-entity dataset equals a hand-built join") {
  const auto full = person_visit_dataset();
  const std::vector<std::size_t> two{0, 1};
  const auto ds = full.subset(two);
  const auto spec = fit_discretization(ds);
  const auto a = build_analytics(ds, spec);
  // Join every entity with every visit row and keep the earliest by date.
  const auto& visits = ds.table("visit");
  for (std::size_t e = 0; e < 2; ++e) {
    std::optional<std::size_t> first;
    std::size_t n = 0;
    for (std::size_t r = 0; r < visits.row_count(); ++r) {
      if (*visits.cell(r, 1) != ds.entity_key(e)) continue;
      ++n;
      if (!first || *visits.value(r, 2) < *visits.value(*first, 2)) first = r;
    }
    REQUIRE(first);
    for (std::size_t c = 0; c < a.column_count(); ++c) {
      const auto& f = spec.feature(a.features[c]);
      std::uint32_t expected = 0;
      if (f.id.component == Component::kCount) {
        expected = f.encode_number(static_cast<double>(n));
      } else if (f.id.table == "person") {
        const auto col = ds.schema().tables[0].column_index(f.id.column);
        expected = encode_cell(f, ds.main().cell(e, col), ds.main().value(e, col));
      } else {
        const auto col = ds.schema().tables[1].column_index(f.id.column);
        expected = encode_cell(f, visits.cell(*first, col), visits.value(*first, col));
      }
      CHECK(a.codes[c][e] == expected);
    }
  }
}

TEST_CASE("analytics property: counts match a brute-force group-by") {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const auto ds = random_dataset(rng);
    const auto spec = fit_discretization(ds);
    const auto a = build_analytics(ds, spec);
    const auto& schema = ds.schema();
    const std::size_t n_tables = schema.tables.size();
    for (std::size_t e = 0; e < ds.entity_count(); ++e) {
      std::vector<std::optional<std::size_t>> selected(n_tables);
      selected[0] = e;
      std::size_t count_col = 0;
      for (std::size_t t = 1; t < n_tables; ++t) {
        const auto p = schema.table_index(schema.parent_of(schema.tables[t].name)->parent);
        std::size_t expected = 0;
        if (selected[p]) {
          expected = count_children(ds, t, *selected[p]);
          selected[t] = first_child(ds, t, *selected[p]);
        }
        CHECK(a.raw_counts[count_col++][e] == expected);
      }
    }
  }
}

TEST_CASE("analytics property: identical inputs give identical tables") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ds = random_dataset(rng);
    const auto spec = fit_discretization(ds);
    const auto a = build_analytics(ds, spec);
    const auto b = build_analytics(ds, spec);
    CHECK(a.codes == b.codes);
    CHECK(a.to_csv(spec, true) == b.to_csv(spec, true));
  }
}
