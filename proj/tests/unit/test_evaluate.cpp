#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "relsynth/error.hpp"
#include "relsynth/evaluate.hpp"
#include "relsynth/llm/mock_endpoint.hpp"
#include "relsynth/model.hpp"
#include "relsynth/toy.hpp"
#include "support/builders.hpp"
#include "support/random_dataset.hpp"

using namespace relsynth;
using namespace relsynth::testing;

namespace {

DatasetSchema parent_child(RelationKind kind) {
  DatasetSchema s;
  s.main_table = "p";
  s.tables.push_back(
      {"p", "id", {{"id", ColumnKind::kKey}, {"a", ColumnKind::kCategorical}, {"b", ColumnKind::kCategorical}}, "p.csv"});
  s.tables.push_back({"c",
                      "id",
                      {{"id", ColumnKind::kKey},
                       {"pid", ColumnKind::kKey},
                       {"x", ColumnKind::kCategorical},
                       {"y", ColumnKind::kInteger}},
                      "c.csv"});
  Relationship r{"c", "p", "pid", kind, std::nullopt};
  if (kind == RelationKind::kSequential) r.order_by = "y";
  s.relationships.push_back(r);
  return s;
}

RelationalDataset parent_child_data(RelationKind kind) {
  const auto s = parent_child(kind);
  std::vector<Table> t;
  t.push_back(make_table(s.tables[0], {{"1", "u", "v"}, {"2", "w", "v"}}));
  t.push_back(make_table(s.tables[1], {{"1", "1", "k", "3"}, {"2", "1", "k", "1"}, {"3", "2", "m", "2"}}));
  return RelationalDataset(s, std::move(t));
}

std::size_t count_category(const std::vector<ColumnPair>& pairs, PairCategory c) {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [&](auto& p) { return p.category == c; }));
}

// Direct chi-squared statistic of a 2 x k contingency table.
double chi2_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = std::accumulate(a.begin(), a.end(), 0.0), nb = std::accumulate(b.begin(), b.end(), 0.0);
  double stat = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double col = a[i] + b[i];
    if (col == 0) continue;
    const double ea = col * na / (na + nb), eb = col * nb / (na + nb);
    stat += (a[i] - ea) * (a[i] - ea) / ea + (b[i] - eb) * (b[i] - eb) / eb;
  }
  return stat;
}

// Re-draws a fraction of the non-key cells uniformly from the column's distinct values.
RelationalDataset corrupt(const RelationalDataset& ds, double fraction, Rng& rng) {
  std::vector<Table> tables;
  for (std::size_t t = 0; t < ds.schema().tables.size(); ++t) {
    const auto& ts = ds.schema().tables[t];
    std::vector<std::vector<csv::Cell>> cols;
    for (std::size_t c = 0; c < ts.columns.size(); ++c) {
      auto col = ds.table(t).column(c);
      if (ts.columns[c].kind != ColumnKind::kKey) {
        std::set<std::string> distinct;
        for (const auto& cell : col)
          if (cell) distinct.insert(*cell);
        const std::vector<std::string> values(distinct.begin(), distinct.end());
        for (auto& cell : col)
          if (cell && rng.uniform() < fraction) cell = values[rng.below(values.size())];
      }
      cols.push_back(std::move(col));
    }
    tables.emplace_back(ts, std::move(cols));
  }
  return RelationalDataset(ds.schema(), std::move(tables));
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace

TEST_CASE("evaluate: pair enumeration") {
  SUBCASE("single table with three columns") {
    DatasetSchema s;
    s.main_table = "t";
    s.tables.push_back({"t",
                        "id",
                        {{"id", ColumnKind::kKey},
                         {"a", ColumnKind::kCategorical},
                         {"b", ColumnKind::kContinuous},
                         {"c", ColumnKind::kInteger}},
                        "t.csv"});
    std::vector<Table> t;
    t.push_back(make_table(s.tables[0], {{"1", "x", "1.5", "2"}, {"2", "y", "0.5", "3"}}));
    const RelationalDataset ds(s, std::move(t));
    const auto pairs = enumerate_pairs(ds.schema(), fit_discretization(ds));
    CHECK(pairs.size() == 3);
    CHECK(count_category(pairs, PairCategory::kIntraTable) == 3);
  }
  SUBCASE("associative parent and child with two columns each") {
    const auto ds = parent_child_data(RelationKind::kAssociative);
    const auto pairs = enumerate_pairs(ds.schema(), fit_discretization(ds));
    CHECK(count_category(pairs, PairCategory::kInterTable) == 4);
    CHECK(count_category(pairs, PairCategory::kIntraTable) == 2);
    CHECK(count_category(pairs, PairCategory::kSequential) == 0);
  }
  SUBCASE("sequential child with two columns") {
    const auto ds = parent_child_data(RelationKind::kSequential);
    const auto pairs = enumerate_pairs(ds.schema(), fit_discretization(ds));
    CHECK(count_category(pairs, PairCategory::kSequential) == 2 * (2 * 2));
    std::size_t lag1 = 0, lag2 = 0;
    for (const auto& p : pairs) (p.lag == 1 ? lag1 : lag2) += p.category == PairCategory::kSequential;
    CHECK(lag1 == 4);
    CHECK(lag2 == 4);
  }
}

TEST_CASE("evaluate: smoothed KL and its score") {
  const std::vector<double> p{3, 1, 0, 4};
  CHECK(smoothed_kl(p, p) == 0.0);
  CHECK(kl_score(0.0) == 1.0);
  CHECK(kl_score(1.0) == 0.5);
  const std::vector<double> q{1, 1, 5, 1};
  // Hand computation with 0.5 added to each cell: P = (3.5, 1.5, 0.5, 4.5)/10, Q = (1.5, 1.5, 5.5, 1.5)/10.
  const double expected = 0.35 * std::log(3.5 / 1.5) + 0.15 * std::log(1.0) + 0.05 * std::log(0.5 / 5.5) +
                          0.45 * std::log(4.5 / 1.5);
  CHECK(smoothed_kl(p, q) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(smoothed_kl(p, q) != doctest::Approx(smoothed_kl(q, p)));
  const std::vector<double> empty{0, 0, 0, 0};
  CHECK_THROWS_AS(smoothed_kl(empty, q), DataError);
}

TEST_CASE("evaluate: chi-squared homogeneity") {
  const std::vector<double> same{10, 20, 30};
  auto r = chi2_homogeneity(same, same);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);

  const std::vector<double> a{50, 50}, b{100, 0};
  r = chi2_homogeneity(a, b);
  CHECK(r.statistic == doctest::Approx(chi2_statistic(a, b)));
  CHECK(r.statistic == doctest::Approx(200.0 / 3.0));
  CHECK(r.df == 1.0);
  CHECK(r.p_value < 1e-10);

  // With df = 2 the survival function is exp(-x / 2).
  const std::vector<double> c{10, 20, 30}, d{20, 20, 20};
  r = chi2_homogeneity(c, d);
  CHECK(r.df == 2.0);
  CHECK(r.p_value == doctest::Approx(std::exp(-chi2_statistic(c, d) / 2.0)).epsilon(1e-9));

  const std::vector<double> single_a{7}, single_b{3};
  CHECK(chi2_homogeneity(single_a, single_b).p_value == 1.0);
  const std::vector<double> none{0, 0};
  CHECK(chi2_homogeneity(none, none).p_value == 1.0);
  CHECK(chi2_homogeneity(a, none).p_value == 0.0);
}

TEST_CASE("evaluate: aggregation tree") {
  const auto orig = generate_toy({200, 1});
  const auto other = generate_toy({200, 2});
  const auto spec = fit_discretization(orig);
  const auto kl = kl_report(orig, other, spec);
  // Category means are means over tables; the aggregate is the mean over categories.
  double sum = 0.0;
  for (const auto& [cat, tables] : kl.per_table) {
    double t = 0.0;
    for (const auto& [name, v] : tables) t += v;
    CHECK(kl.per_category.at(cat) == doctest::Approx(t / static_cast<double>(tables.size())));
    sum += kl.per_category.at(cat);
  }
  CHECK(kl.aggregate == doctest::Approx(sum / static_cast<double>(kl.per_category.size())));
  CHECK(kl.per_category.size() == 3);

  const auto chi = chi2_report(orig, other, spec);
  double per_table = 0.0;
  for (const auto& [t, v] : chi.per_table) per_table += v;
  CHECK(chi.per_table.size() == 3);
  CHECK(chi.aggregate == doctest::Approx(per_table / 3.0));

  // No sequential relationships: two categories only.
  const auto assoc = parent_child_data(RelationKind::kAssociative);
  const auto r = kl_report(assoc, assoc, fit_discretization(assoc));
  CHECK(r.per_category.size() == 2);
  CHECK(r.per_category.count(std::string(to_string(PairCategory::kSequential))) == 0);
}

TEST_CASE("evaluate property: self-comparison scores exactly one") {
  Rng rng(91);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ds = random_dataset(rng);
    const auto spec = fit_discretization(ds);
    const auto kl = kl_report(ds, ds, spec);
    // Without any pair the aggregate is undefined rather than a score.
    if (enumerate_pairs(ds.schema(), spec).empty()) CHECK(std::isnan(kl.aggregate));
    else CHECK(kl.aggregate == 1.0);
    CHECK(chi2_report(ds, ds, spec).aggregate == 1.0);
  }
}

TEST_CASE("evaluate property: KL direction is original against synthetic") {
  const auto orig = generate_toy({150, 3});
  const auto synth = generate_toy({60, 4});
  const auto spec = fit_discretization(orig);
  const auto rep = kl_report(orig, synth, spec);
  REQUIRE(!rep.pairs.empty());
  for (const auto& ps : rep.pairs) {
    const auto p = joint_counts(orig, spec, ps.pair);
    const auto q = joint_counts(synth, spec, ps.pair);
    CHECK(ps.kl == doctest::Approx(smoothed_kl(p, q)));
  }
}

TEST_CASE("evaluate property: corrupting more cells does not raise the chi-squared aggregate") {
  const auto orig = generate_toy({400, 1});
  const auto base = generate_toy({400, 2});
  const auto spec = fit_discretization(orig);
  const std::vector<double> levels{0.0, 0.1, 0.2, 0.4, 0.8};
  std::vector<double> means(levels.size(), 0.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    for (std::size_t l = 0; l < levels.size(); ++l) {
      Rng rng(1000 + seed);
      means[l] += chi2_report(orig, corrupt(base, levels[l], rng), spec).aggregate / 10.0;
    }
  CHECK(spearman(levels, means) <= 0.0);
  CHECK(means.front() > means.back());
}

TEST_CASE("evaluate: realism with the mock judge") {
  const auto data = generate_toy({200, 5});
  FitOptions fo;
  fo.seed = 2;
  const auto model = fit_model(data, fo);
  const auto index = make_similarity_index(data, model);
  const auto tpl = llm::PromptTemplate::parse(toy_evaluation_template(), llm::PromptKind::kEvaluation);
  auto judge = [&](std::vector<int> scores, std::span<const std::size_t> candidates, std::size_t* calls = nullptr) {
    llm::MockOptions mo;
    mo.scores = std::move(scores);
    llm::MockEndpoint mock(mo);
    llm::EndpointConfig ec;
    ec.url = mock.url();
    ec.max_concurrency = 1;  // scripted scores in candidate order
    const llm::CompletionClient client(ec);
    const RealismContext ctx{data, model.spec, index, tpl, client};
    auto rep = realism_report(ctx, data, candidates);
    if (calls) *calls = mock.score_requests();
    return rep;
  };

  const std::vector<std::size_t> five{0, 1, 2, 3, 4};
  const auto constant = judge({4}, five);
  CHECK(constant.mean == 4.0);
  CHECK(constant.scored == 5);
  CHECK(constant.histogram[3] == 5);

  std::size_t calls = 0;
  const auto cycle = judge({1, 2, 3, 4, 5}, five, &calls);
  CHECK(cycle.mean == 3.0);
  for (auto h : cycle.histogram) CHECK(h == 1);
  CHECK(calls == 5);

  // Hold-out baseline: candidates are held-out entities, references come from train only.
  const std::vector<std::size_t> hold(model.split.holdout.begin(), model.split.holdout.begin() + 5);
  const auto baseline = judge({4}, hold);
  std::set<std::string> train_keys, hold_keys;
  for (auto e : model.split.train) train_keys.insert(data.entity_key(e));
  for (auto e : hold) hold_keys.insert(data.entity_key(e));
  for (const auto& k : baseline.candidates) CHECK(hold_keys.count(k) == 1);
  for (const auto& k : baseline.references) {
    CHECK(train_keys.count(k) == 1);
    CHECK(hold_keys.count(k) == 0);
  }
}

TEST_CASE("evaluate: report serialization") {
  const auto orig = generate_toy({100, 1});
  const auto spec = fit_discretization(orig);
  MetricsReport rep;
  rep.against = "all";
  rep.kl = kl_report(orig, orig, spec);
  rep.chi2 = chi2_report(orig, orig, spec);
  const auto j = rep.to_json(spec);
  CHECK(j["kl"]["aggregate"] == 1.0);
  CHECK(j["chi2"]["aggregate"] == 1.0);
  const auto csv = rep.to_csv(spec);
  CHECK(csv.find("kl") != std::string::npos);
}
