#include "relsynth/evaluate.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include <boost/math/special_functions/gamma.hpp>

#include "relsynth/analytics.hpp"
#include "relsynth/csv.hpp"
#include "relsynth/error.hpp"
#include "relsynth/llm/schema.hpp"
#include "relsynth/parallel.hpp"

namespace relsynth {

using nlohmann::json;

std::string_view to_string(PairCategory c) {
  switch (c) {
    case PairCategory::kIntraTable: return "intra_table";
    case PairCategory::kInterTable: return "inter_table";
    case PairCategory::kSequential: return "sequential";
  }
  return "?";
}

std::string ColumnPair::label(const DiscretizationSpec& spec) const {
  std::string s = spec.feature(first).id.key() + " ~ " + spec.feature(second).id.key();
  if (category == PairCategory::kSequential) s += " @lag" + std::to_string(lag);
  return s;
}

std::vector<ColumnPair> enumerate_pairs(const DatasetSchema& schema, const DiscretizationSpec& spec) {
  std::vector<ColumnPair> out;
  for (const auto& t : schema.tables) {
    const auto fs = spec.table_features(t.name);
    for (std::size_t i = 0; i < fs.size(); ++i)
      for (std::size_t j = i + 1; j < fs.size(); ++j) out.push_back({PairCategory::kIntraTable, fs[i], fs[j], 0, t.name});
  }
  for (const auto& t : schema.tables) {
    const auto* rel = schema.parent_of(t.name);
    if (!rel) continue;
    const auto child = spec.table_features(t.name);
    for (auto p : spec.table_features(rel->parent))
      for (auto c : child) out.push_back({PairCategory::kInterTable, p, c, 0, t.name});
  }
  for (const auto& t : schema.tables) {
    const auto* rel = schema.parent_of(t.name);
    if (!rel || rel->kind != RelationKind::kSequential) continue;
    const auto fs = spec.table_features(t.name);
    for (std::size_t lag = 1; lag <= 2; ++lag)
      for (auto a : fs)
        for (auto b : fs) out.push_back({PairCategory::kSequential, a, b, lag, t.name});
  }
  return out;
}

namespace {

std::size_t full_domain(const FeatureEncoding& f) { return f.domain_size() + (f.has_unknown() ? 1 : 0); }

// Encoded tables of one dataset, computed on first use.
class CodeCache {
 public:
  CodeCache(const RelationalDataset& ds, const DiscretizationSpec& spec) : ds_(ds), spec_(spec) {}

  const std::vector<std::uint32_t>& codes(std::size_t feature) {
    const auto& table = spec_.feature(feature).id.table;
    auto it = tables_.find(table);
    if (it == tables_.end()) it = tables_.emplace(table, encode(ds_, table, spec_)).first;
    const auto& enc = it->second;
    for (std::size_t j = 0; j < enc.features.size(); ++j)
      if (enc.features[j] == feature) return enc.codes[j];
    throw ConfigError("feature '" + spec_.feature(feature).id.key() + "' is not a value feature");
  }

 private:
  const RelationalDataset& ds_;
  const DiscretizationSpec& spec_;
  std::unordered_map<std::string, EncodedTable> tables_;
};

std::vector<double> joint_counts_cached(const RelationalDataset& ds, const DiscretizationSpec& spec,
                                        const ColumnPair& pair, CodeCache& cache) {
  const std::size_t da = full_domain(spec.feature(pair.first));
  const std::size_t db = full_domain(spec.feature(pair.second));
  std::vector<double> counts(da * db, 0.0);
  const auto& a = cache.codes(pair.first);
  const auto& b = cache.codes(pair.second);
  auto add = [&](std::size_t ra, std::size_t rb) { counts[a[ra] * db + b[rb]] += 1.0; };
  switch (pair.category) {
    case PairCategory::kIntraTable:
      for (std::size_t r = 0; r < a.size(); ++r) add(r, r);
      break;
    case PairCategory::kInterTable: {
      const auto& parents = ds.parent_rows(pair.table);
      for (std::size_t r = 0; r < parents.size(); ++r) add(parents[r], r);
      break;
    }
    case PairCategory::kSequential: {
      const auto* rel = ds.schema().parent_of(pair.table);
      const auto& parent_table = ds.table(rel->parent);
      for (std::size_t p = 0; p < parent_table.row_count(); ++p) {
        const auto& rows = ds.child_rows(pair.table, p);
        for (std::size_t k = pair.lag; k < rows.size(); ++k) add(rows[k], rows[k - pair.lag]);
      }
      break;
    }
  }
  return counts;
}

// Undefined without data; NaN is written to JSON as null.
double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> marginal_counts(const std::vector<std::uint32_t>& codes, std::size_t domain) {
  std::vector<double> out(domain, 0.0);
  for (auto c : codes) out[c] += 1.0;
  return out;
}

json realism_json(const RealismReport& r) {
  return {{"mean", r.mean},
          {"histogram", r.histogram},
          {"scored", r.scored},
          {"skipped", r.skipped},
          {"candidates", r.candidates},
          {"references", r.references}};
}

}  // namespace

std::vector<double> joint_counts(const RelationalDataset& dataset, const DiscretizationSpec& spec,
                                 const ColumnPair& pair) {
  CodeCache cache(dataset, spec);
  return joint_counts_cached(dataset, spec, pair, cache);
}

double smoothed_kl(std::span<const double> p_counts, std::span<const double> q_counts, double alpha) {
  if (p_counts.size() != q_counts.size()) throw ConfigError("KL: histograms differ in size");
  const double np = std::accumulate(p_counts.begin(), p_counts.end(), 0.0);
  const double nq = std::accumulate(q_counts.begin(), q_counts.end(), 0.0);
  if (!(np > 0.0)) throw DataError("KL: original histogram has no observations");
  const double k = static_cast<double>(p_counts.size());
  const double zp = np + alpha * k;
  const double zq = nq + alpha * k;
  double kl = 0.0;
  for (std::size_t i = 0; i < p_counts.size(); ++i) {
    const double p = (p_counts[i] + alpha) / zp;
    const double q = (q_counts[i] + alpha) / zq;
    if (p > 0.0) kl += p * std::log(p / q);
  }
  return std::max(kl, 0.0);
}

KlReport kl_report(const RelationalDataset& original, const RelationalDataset& synthetic,
                   const DiscretizationSpec& spec, double alpha) {
  KlReport out;
  CodeCache co(original, spec), cs(synthetic, spec);
  std::map<std::string, std::map<std::string, std::vector<double>>> grouped;
  for (const auto& pair : enumerate_pairs(original.schema(), spec)) {
    const auto p = joint_counts_cached(original, spec, pair, co);
    const auto q = joint_counts_cached(synthetic, spec, pair, cs);
    double kl = 0.0;
    try {
      kl = smoothed_kl(p, q, alpha);
    } catch (const DataError&) {
      ++out.skipped;
      continue;
    }
    const double s = kl_score(kl);
    out.pairs.push_back({pair, kl, s});
    grouped[std::string(to_string(pair.category))][pair.table].push_back(s);
  }
  std::vector<double> cats;
  for (const auto& [cat, tables] : grouped) {
    std::vector<double> means;
    for (const auto& [table, scores] : tables) {
      out.per_table[cat][table] = mean(scores);
      means.push_back(out.per_table[cat][table]);
    }
    out.per_category[cat] = mean(means);
    cats.push_back(out.per_category[cat]);
  }
  out.aggregate = mean(cats);
  return out;
}

Chi2Result chi2_homogeneity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("chi2: histograms differ in size");
  const double na = std::accumulate(a.begin(), a.end(), 0.0);
  const double nb = std::accumulate(b.begin(), b.end(), 0.0);
  Chi2Result r;
  if (na == 0.0 && nb == 0.0) return r;
  if (na == 0.0 || nb == 0.0) {
    r.statistic = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    return r;
  }
  const double total = na + nb;
  std::size_t cells = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double pooled = a[k] + b[k];
    if (pooled == 0.0) continue;
    ++cells;
    const double ea = na * pooled / total;
    const double eb = nb * pooled / total;
    r.statistic += (a[k] - ea) * (a[k] - ea) / ea + (b[k] - eb) * (b[k] - eb) / eb;
  }
  r.df = static_cast<double>(cells) - 1.0;
  if (r.df < 1.0) {
    r.df = 0.0;
    r.p_value = 1.0;
    return r;
  }
  r.p_value = boost::math::gamma_q(r.df / 2.0, r.statistic / 2.0);
  return r;
}

Chi2Report chi2_report(const RelationalDataset& original, const RelationalDataset& synthetic,
                       const DiscretizationSpec& spec) {
  Chi2Report out;
  CodeCache co(original, spec), cs(synthetic, spec);
  std::vector<double> table_means;
  for (const auto& t : original.schema().tables) {
    std::vector<double> ps;
    for (auto f : spec.table_features(t.name)) {
      const std::size_t dom = full_domain(spec.feature(f));
      const auto r = chi2_homogeneity(marginal_counts(co.codes(f), dom), marginal_counts(cs.codes(f), dom));
      out.columns.emplace_back(spec.feature(f).id.key(), r);
      ps.push_back(r.p_value);
    }
    if (ps.empty()) continue;
    out.per_table[t.name] = mean(ps);
    table_means.push_back(out.per_table[t.name]);
  }
  out.aggregate = mean(table_means);
  return out;
}

RealismReport realism_report(const RealismContext& ctx, const RelationalDataset& dataset,
                             std::span<const std::size_t> candidates) {
  RealismReport out;
  if (candidates.empty()) return out;
  if (ctx.references > ctx.index.size()) throw ConfigError("realism: n exceeds the training entities");
  const auto rows = build_analytics(dataset, candidates, ctx.spec);
  const auto schema = llm::realism_score_schema();

  struct Verdict {
    std::optional<int> score;
    std::vector<std::string> refs;
  };
  std::vector<Verdict> verdicts(candidates.size());
  auto judge = [&](std::size_t i) {
    auto& v = verdicts[i];
    std::vector<std::string> docs;
    if (ctx.references > 0) {
      for (std::size_t e : ctx.index.top_n_similar(rows.row(i), ctx.references)) {
        docs.push_back(llm::entity_to_json(ctx.source, e, ctx.spec).dump());
        v.refs.push_back(ctx.source.entity_key(e));
      }
    }
    const std::string candidate = llm::entity_to_json(dataset, candidates[i], ctx.spec).dump();
    llm::CompletionRequest req;
    req.messages = {{"user", llm::render_evaluation(ctx.prompt, docs, candidate)}};
    req.schema = schema;
    req.schema_name = "realism_score";
    for (std::size_t attempt = 0; attempt <= ctx.validation_retries; ++attempt) {
      try {
        const auto resp = ctx.client.complete(req);
        const auto j = json::parse(resp.text);
        const auto& s = j.at("score");
        if (s.is_number_integer() && s.get<int>() >= 1 && s.get<int>() <= 5) {
          v.score = s.get<int>();
          return;
        }
      } catch (const StructuredOutputError&) {
      } catch (const TokenLimitError&) {
      } catch (const json::exception&) {
      }
    }
  };
  auto errors = run_bounded(candidates.size(), ctx.client.config().max_concurrency, judge);
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::set<std::string> refs;
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out.candidates.push_back(dataset.entity_key(candidates[i]));
    refs.insert(verdicts[i].refs.begin(), verdicts[i].refs.end());
    if (!verdicts[i].score) {
      ++out.skipped;
      continue;
    }
    ++out.scored;
    ++out.histogram[static_cast<std::size_t>(*verdicts[i].score - 1)];
    sum += *verdicts[i].score;
  }
  out.references.assign(refs.begin(), refs.end());
  out.mean = out.scored ? sum / static_cast<double>(out.scored) : 0.0;
  return out;
}

json MetricsReport::to_json(const DiscretizationSpec& spec) const {
  json pairs = json::array();
  for (const auto& p : kl.pairs)
    pairs.push_back({{"category", to_string(p.pair.category)},
                     {"table", p.pair.table},
                     {"pair", p.pair.label(spec)},
                     {"kl", p.kl},
                     {"score", p.score}});
  json columns = json::array();
  for (const auto& [key, r] : chi2.columns)
    columns.push_back({{"feature", key},
                       {"statistic", std::isfinite(r.statistic) ? json(r.statistic) : json("inf")},
                       {"df", r.df},
                       {"p_value", r.p_value}});
  json out = {{"against", against},
              {"kl", {{"aggregate", kl.aggregate},
                      {"per_category", kl.per_category},
                      {"per_table", kl.per_table},
                      {"skipped_pairs", kl.skipped},
                      {"pairs", std::move(pairs)}}},
              {"chi2", {{"aggregate", chi2.aggregate}, {"per_table", chi2.per_table}, {"columns", std::move(columns)}}}};
  if (realism) out["realism"] = realism_json(*realism);
  if (baseline) out["realism_baseline"] = realism_json(*baseline);
  return out;
}

std::string MetricsReport::to_csv(const DiscretizationSpec& spec) const {
  csv::Document doc;
  doc.header = {"metric", "scope", "item", "value"};
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  auto add = [&](std::string metric, std::string scope, std::string item, double v) {
    doc.rows.push_back({std::move(metric), std::move(scope), std::move(item), num(v)});
  };
  add("kl", "aggregate", "", kl.aggregate);
  for (const auto& [cat, v] : kl.per_category) add("kl", "category", cat, v);
  for (const auto& [cat, tables] : kl.per_table)
    for (const auto& [t, v] : tables) add("kl", "table", cat + "/" + t, v);
  for (const auto& p : kl.pairs) add("kl", "pair", p.pair.label(spec), p.score);
  add("chi2", "aggregate", "", chi2.aggregate);
  for (const auto& [t, v] : chi2.per_table) add("chi2", "table", t, v);
  for (const auto& [key, r] : chi2.columns) add("chi2", "column", key, r.p_value);
  if (realism) add("realism", "mean", "", realism->mean);
  if (baseline) add("realism_baseline", "mean", "", baseline->mean);
  return csv::format(doc);
}

}  // namespace relsynth
