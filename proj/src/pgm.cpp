#include "relsynth/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "relsynth/error.hpp"
#include "relsynth/random.hpp"

namespace relsynth {

using json = nlohmann::json;

double NoiseAccount::total() const {
  double sum = 0.0;
  for (const auto& inv : invocations) sum += inv.epsilon;
  return sum;
}

double default_mi_sensitivity(std::size_t n) {
  if (n < 2) return 1.0;
  const double nn = static_cast<double>(n);
  return std::log2(nn) / nn + (nn - 1.0) / nn * std::log2(nn / (nn - 1.0));
}

namespace {

// Product of domain sizes, saturating at `cap + 1`.
std::size_t capped_product(std::size_t a, std::size_t b, std::size_t cap) {
  if (a == 0 || b == 0) return 0;
  if (a > (cap + 1) / b + 1) return cap + 1;
  return std::min(a * b, cap + 1);
}

// Mixed-radix configuration index of `parents` for every row.
std::vector<std::size_t> configuration_index(const AnalyticsTable& t, std::span<const std::size_t> parents,
                                             std::size_t& n_configs) {
  std::vector<std::size_t> idx(t.row_count(), 0);
  n_configs = 1;
  for (auto p : parents) {
    const auto dom = t.domain_sizes[p];
    const auto& col = t.codes[p];
    for (std::size_t r = 0; r < idx.size(); ++r) idx[r] = idx[r] * dom + col[r];
    n_configs *= dom;
  }
  return idx;
}

double mi_from_config(const AnalyticsTable& t, std::size_t x, const std::vector<std::size_t>& config,
                      std::size_t n_configs, const std::vector<double>& config_counts) {
  const std::size_t dom = t.domain_sizes[x];
  const auto& col = t.codes[x];
  std::vector<double> joint(n_configs * dom, 0.0);
  std::vector<double> x_counts(dom, 0.0);
  for (std::size_t r = 0; r < col.size(); ++r) {
    joint[config[r] * dom + col[r]] += 1.0;
    x_counts[col[r]] += 1.0;
  }
  const double n = static_cast<double>(col.size());
  double mi = 0.0;
  for (std::size_t c = 0; c < n_configs; ++c) {
    if (config_counts[c] == 0.0) continue;
    for (std::size_t v = 0; v < dom; ++v) {
      const double j = joint[c * dom + v];
      if (j == 0.0) continue;
      mi += j / n * std::log2(j * n / (config_counts[c] * x_counts[v]));
    }
  }
  return std::max(mi, 0.0);
}

std::vector<double> counts_of(const std::vector<std::size_t>& config, std::size_t n_configs) {
  std::vector<double> c(n_configs, 0.0);
  for (auto i : config) c[i] += 1.0;
  return c;
}

// Calls fn(subset) for every size-k subset of `items` in lexicographic order.
template <typename Fn>
void for_each_subset(const std::vector<std::size_t>& items, std::size_t k, Fn&& fn) {
  if (k > items.size()) return;
  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  std::vector<std::size_t> subset(k);
  while (true) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = items[pick[i]];
    fn(subset);
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == items.size() - k + (i - 1)) --i;
    if (i == 0) return;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
}

struct Candidate {
  std::size_t column;
  std::vector<std::size_t> parents;
  double score;
};

// Splits the budget over d-1 structure selections and d parameter releases. The
// last entry absorbs the rounding residual so that the ledger sums to epsilon
// exactly; it is the smallest entry, so eps - (rest) is computed without error.
std::vector<double> plan_budget(double epsilon, double structure_share, std::size_t d) {
  std::vector<double> plan;
  if (d == 1) return {epsilon};
  const double structure = epsilon * structure_share;
  const double parameters = epsilon - structure;
  for (std::size_t i = 0; i + 1 < d; ++i) plan.push_back(structure / static_cast<double>(d - 1));
  for (std::size_t i = 0; i < d; ++i) plan.push_back(parameters / static_cast<double>(d));
  double rest = 0.0;
  for (std::size_t i = 0; i + 1 < plan.size(); ++i) rest += plan[i];
  plan.back() = epsilon - rest;
  return plan;
}

}  // namespace

double mutual_information(const AnalyticsTable& table, std::size_t x, std::span<const std::size_t> parents) {
  std::size_t n_configs = 0;
  const auto config = configuration_index(table, parents, n_configs);
  return mi_from_config(table, x, config, n_configs, counts_of(config, n_configs));
}

std::size_t DpBayesNet::parent_configuration(const BayesNode& node, std::span<const std::uint32_t> row) const {
  std::size_t idx = 0;
  for (auto p : node.parents) idx = idx * domain_sizes[p] + row[p];
  return idx;
}

DpBayesNet fit_network(const AnalyticsTable& analytics, const DiscretizationSpec& spec, const PgmConfig& config,
                       std::uint64_t seed) {
  const std::size_t d = analytics.column_count();
  const std::size_t n = analytics.row_count();
  if (n == 0 || d == 0) throw ConfigError("cannot fit a network on an empty analytics table");
  if (config.degree < 1) throw ConfigError("degree bound must be at least 1");
  if (!config.noise_disabled && !(config.epsilon > 0.0 && std::isfinite(config.epsilon)))
    throw ConfigError("epsilon must be positive and finite (use the noise-disabled mode for tests)");
  if (!(config.structure_share > 0.0 && config.structure_share < 1.0))
    throw ConfigError("structure share must lie in (0, 1)");

  DpBayesNet net;
  net.spec_hash = spec.hash();
  net.domain_sizes = analytics.domain_sizes;
  for (auto f : analytics.features) net.feature_keys.push_back(spec.feature(f).id.key());
  net.degree = config.degree;
  net.structure_share = config.structure_share;
  net.noise_disabled = config.noise_disabled;
  net.epsilon = config.noise_disabled ? std::numeric_limits<double>::infinity() : config.epsilon;

  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> plan =
      config.noise_disabled ? std::vector<double>(d == 1 ? 1 : 2 * d - 1, inf)
                            : plan_budget(config.epsilon, config.structure_share, d);
  const double mi_sensitivity = config.mi_sensitivity.value_or(default_mi_sensitivity(n));
  std::size_t plan_pos = 0;

  Rng rng(seed);
  std::vector<std::size_t> order{static_cast<std::size_t>(rng.below(d))};
  std::vector<std::vector<std::size_t>> parents_of(d);
  std::vector<char> placed(d, 0);
  placed[order[0]] = 1;

  while (order.size() < d) {
    std::vector<Candidate> candidates;
    for (std::size_t size = std::min(config.degree, order.size());; --size) {
      std::vector<std::size_t> placed_sorted = order;
      std::sort(placed_sorted.begin(), placed_sorted.end());
      for_each_subset(placed_sorted, size, [&](const std::vector<std::size_t>& parents) {
        std::size_t parent_cells = 1;
        for (auto p : parents) parent_cells = capped_product(parent_cells, analytics.domain_sizes[p], config.cell_cap);
        if (parent_cells > config.cell_cap) return;
        std::size_t n_configs = 0;
        const auto cfg = configuration_index(analytics, parents, n_configs);
        const auto cfg_counts = counts_of(cfg, n_configs);
        for (std::size_t x = 0; x < d; ++x) {
          if (placed[x]) continue;
          if (capped_product(parent_cells, analytics.domain_sizes[x], config.cell_cap) > config.cell_cap) continue;
          candidates.push_back({x, parents, mi_from_config(analytics, x, cfg, n_configs, cfg_counts)});
        }
      });
      if (!candidates.empty() || size == 0) break;
    }
    if (candidates.empty()) throw ConfigError("every remaining column exceeds the CPT cell cap");

    const double eps = plan[plan_pos++];
    std::size_t pick = 0;
    if (config.noise_disabled) {
      for (std::size_t i = 1; i < candidates.size(); ++i)
        if (candidates[i].score > candidates[pick].score) pick = i;
    } else {
      std::vector<double> logits(candidates.size());
      for (std::size_t i = 0; i < candidates.size(); ++i) logits[i] = eps * candidates[i].score / (2.0 * mi_sensitivity);
      const double mx = *std::max_element(logits.begin(), logits.end());
      std::vector<double> weights(candidates.size());
      for (std::size_t i = 0; i < candidates.size(); ++i) weights[i] = std::exp(logits[i] - mx);
      pick = rng.categorical(weights);
    }
    const auto& chosen = candidates[pick];
    net.account.invocations.push_back(
        {Mechanism::kExponential, eps, mi_sensitivity, net.feature_keys[chosen.column]});
    parents_of[chosen.column] = chosen.parents;
    placed[chosen.column] = 1;
    order.push_back(chosen.column);
  }

  // Conditional tables from Laplace-noised joint counts.
  constexpr double kCountSensitivity = 2.0;
  for (auto column : order) {
    BayesNode node;
    node.column = column;
    node.parents = parents_of[column];
    node.domain = analytics.domain_sizes[column];
    std::size_t n_configs = 0;
    const auto cfg = configuration_index(analytics, node.parents, n_configs);
    std::vector<double> joint(n_configs * node.domain, 0.0);
    const auto& col = analytics.codes[column];
    for (std::size_t r = 0; r < n; ++r) joint[cfg[r] * node.domain + col[r]] += 1.0;

    const double eps = plan[plan_pos++];
    if (!config.noise_disabled) {
      const double scale = kCountSensitivity / eps;
      for (auto& c : joint) c = std::max(0.0, c + rng.laplace(scale));
    }
    for (std::size_t c = 0; c < n_configs; ++c) {
      double total = 0.0;
      for (std::size_t v = 0; v < node.domain; ++v) total += joint[c * node.domain + v];
      for (std::size_t v = 0; v < node.domain; ++v) {
        auto& cell = joint[c * node.domain + v];
        cell = total > 0.0 ? cell / total : 1.0 / static_cast<double>(node.domain);
      }
    }
    node.cpt = std::move(joint);
    net.account.invocations.push_back({Mechanism::kLaplace, eps, kCountSensitivity, net.feature_keys[column]});
    net.nodes.push_back(std::move(node));
  }
  return net;
}

AnalyticsRow DpBayesNet::sample_row(std::uint64_t seed, std::size_t index) const {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  AnalyticsRow row(column_count(), 0);
  for (const auto& node : nodes) {
    const auto dist = node.distribution(parent_configuration(node, row));
    row[node.column] = static_cast<std::uint32_t>(rng.categorical(dist));
  }
  return row;
}

std::vector<AnalyticsRow> DpBayesNet::sample(std::size_t m, std::uint64_t seed) const {
  if (m < 1) throw ConfigError("sample count must be at least 1");
  std::vector<AnalyticsRow> rows;
  rows.reserve(m);
  for (std::size_t i = 0; i < m; ++i) rows.push_back(sample_row(seed, i));
  return rows;
}

std::string DpBayesNet::to_json() const {
  json doc;
  doc["spec_hash"] = spec_hash;
  doc["epsilon"] = std::isfinite(epsilon) ? json(epsilon) : json("inf");
  doc["structure_share"] = structure_share;
  doc["degree"] = degree;
  doc["noise_disabled"] = noise_disabled;
  doc["features"] = feature_keys;
  doc["domain_sizes"] = domain_sizes;
  doc["nodes"] = json::array();
  for (const auto& node : nodes) {
    json rows = json::array();
    for (std::size_t c = 0; c < node.parent_configurations(); ++c) {
      const auto dist = node.distribution(c);
      rows.push_back(std::vector<double>(dist.begin(), dist.end()));
    }
    doc["nodes"].push_back({{"column", node.column}, {"parents", node.parents}, {"cpt", std::move(rows)}});
  }
  doc["noise_account"] = json::array();
  for (const auto& inv : account.invocations) {
    doc["noise_account"].push_back(
        {{"mechanism", inv.mechanism == Mechanism::kExponential ? "exponential" : "laplace"},
         {"epsilon", std::isfinite(inv.epsilon) ? json(inv.epsilon) : json("inf")},
         {"sensitivity", inv.sensitivity},
         {"target", inv.target}});
  }
  return doc.dump(2) + "\n";
}

DpBayesNet DpBayesNet::from_json(const std::string& text) {
  const auto number = [](const json& j) {
    return j.is_string() ? std::numeric_limits<double>::infinity() : j.get<double>();
  };
  DpBayesNet net;
  try {
    const auto doc = json::parse(text);
    net.spec_hash = doc.at("spec_hash").get<std::string>();
    net.epsilon = number(doc.at("epsilon"));
    net.structure_share = doc.at("structure_share").get<double>();
    net.degree = doc.at("degree").get<std::size_t>();
    net.noise_disabled = doc.at("noise_disabled").get<bool>();
    net.feature_keys = doc.at("features").get<std::vector<std::string>>();
    net.domain_sizes = doc.at("domain_sizes").get<std::vector<std::size_t>>();
    for (const auto& jn : doc.at("nodes")) {
      BayesNode node;
      node.column = jn.at("column").get<std::size_t>();
      node.parents = jn.at("parents").get<std::vector<std::size_t>>();
      node.domain = net.domain_sizes.at(node.column);
      for (const auto& row : jn.at("cpt")) {
        const auto dist = row.get<std::vector<double>>();
        if (dist.size() != node.domain) throw ConfigError("network: CPT row width mismatch");
        node.cpt.insert(node.cpt.end(), dist.begin(), dist.end());
      }
      net.nodes.push_back(std::move(node));
    }
    for (const auto& ji : doc.at("noise_account")) {
      NoiseInvocation inv;
      inv.mechanism = ji.at("mechanism").get<std::string>() == "exponential" ? Mechanism::kExponential
                                                                              : Mechanism::kLaplace;
      inv.epsilon = number(ji.at("epsilon"));
      inv.sensitivity = ji.at("sensitivity").get<double>();
      inv.target = ji.at("target").get<std::string>();
      net.account.invocations.push_back(std::move(inv));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed network file: ") + e.what());
  }
  return net;
}

std::vector<std::vector<double>> single_column_histograms(const AnalyticsTable& analytics) {
  if (analytics.row_count() == 0) throw ConfigError("histograms of an empty analytics table");
  std::vector<std::vector<double>> out(analytics.column_count());
  const double n = static_cast<double>(analytics.row_count());
  for (std::size_t c = 0; c < analytics.column_count(); ++c) {
    std::vector<double> counts(analytics.domain_sizes[c], 0.0);
    for (auto code : analytics.codes[c])
      if (code < counts.size()) counts[code] += 1.0;
    for (auto& v : counts) v /= n;
    out[c] = std::move(counts);
  }
  return out;
}

}  // namespace relsynth
