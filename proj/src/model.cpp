#include "relsynth/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "relsynth/error.hpp"
#include "relsynth/random.hpp"

namespace relsynth {

using nlohmann::json;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model artifact " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json number_or_inf(double v) { return std::isfinite(v) ? json(v) : json("inf"); }

double number_from(const json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

}  // namespace

FittedModel fit_model(const RelationalDataset& dataset, const FitOptions& options,
                      const std::filesystem::path& config_path) {
  if (dataset.entity_count() == 0) throw DataError("dataset has no entities");
  FittedModel m;
  m.config_path = config_path;
  m.options = options;
  if (options.holdout == 0.0) {
    m.split.train.resize(dataset.entity_count());
    std::iota(m.split.train.begin(), m.split.train.end(), std::size_t{0});
  } else {
    m.split = split_holdout(dataset, options.holdout, derive_seed(options.seed, "split"));
  }
  if (m.split.train.empty()) throw DataError("training partition is empty");

  const auto train = dataset.subset(m.split.train);
  m.spec = fit_discretization(train, options.strategy);
  const auto analytics = build_analytics(dataset, m.split, m.spec);

  PgmConfig pgm;
  pgm.epsilon = options.epsilon;
  pgm.degree = options.degree;
  pgm.structure_share = options.structure_share;
  pgm.cell_cap = options.cell_cap;
  pgm.noise_disabled = options.noise_disabled;
  m.net = fit_network(analytics, m.spec, pgm, derive_seed(options.seed, "pgm"));
  m.histograms = single_column_histograms(analytics);
  return m;
}

void save_model(const FittedModel& model, const RelationalDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& o = model.options;
  json manifest = {{"config", model.config_path.empty() ? "" : std::filesystem::absolute(model.config_path).string()},
                   {"spec_hash", model.spec.hash()},
                   {"epsilon", number_or_inf(o.epsilon)},
                   {"degree", o.degree},
                   {"structure_share", o.structure_share},
                   {"cell_cap", o.cell_cap},
                   {"holdout", o.holdout},
                   {"seed", o.seed},
                   {"noise_disabled", o.noise_disabled}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  write_text(dir / "discretization.json", model.spec.to_json());
  write_text(dir / "network.json", model.net.to_json());
  write_text(dir / "histograms.json", json(model.histograms).dump() + "\n");

  json account = json::array();
  for (const auto& inv : model.net.account.invocations)
    account.push_back({{"mechanism", inv.mechanism == Mechanism::kExponential ? "exponential" : "laplace"},
                       {"epsilon", number_or_inf(inv.epsilon)},
                       {"sensitivity", inv.sensitivity},
                       {"target", inv.target}});
  write_text(dir / "noise_account.json",
             json{{"total", number_or_inf(model.net.account.total())}, {"invocations", std::move(account)}}.dump(2) +
                 "\n");

  auto keys = [&](const std::vector<std::size_t>& ids) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (auto i : ids) out.push_back(dataset.entity_key(i));
    return out;
  };
  write_text(dir / "split.json", json{{"fraction", model.split.fraction},
                                      {"train", model.split.train},
                                      {"holdout", model.split.holdout},
                                      {"train_keys", keys(model.split.train)},
                                      {"holdout_keys", keys(model.split.holdout)}}
                                         .dump() +
                                     "\n");

  json columns = json::array();
  for (std::size_t c = 0; c < model.net.column_count(); ++c)
    columns.push_back({{"feature", model.net.feature_keys[c]},
                       {"domain", model.net.domain_sizes[c]},
                       {"width_bits", code_width_bits(model.net.domain_sizes[c])}});
  write_text(dir / "analytics_summary.json",
             json{{"rows", model.split.train.size()}, {"columns", std::move(columns)}, {"warnings", model.spec.warnings()}}
                     .dump(2) +
                 "\n");
}

FittedModel load_model(const std::filesystem::path& dir) {
  FittedModel m;
  try {
    const auto manifest = json::parse(read_text(dir / "manifest.json"));
    m.config_path = manifest.at("config").get<std::string>();
    m.options.epsilon = number_from(manifest.at("epsilon"));
    m.options.degree = manifest.at("degree").get<std::size_t>();
    m.options.structure_share = manifest.at("structure_share").get<double>();
    m.options.cell_cap = manifest.at("cell_cap").get<std::size_t>();
    m.options.holdout = manifest.at("holdout").get<double>();
    m.options.seed = manifest.at("seed").get<std::uint64_t>();
    m.options.noise_disabled = manifest.at("noise_disabled").get<bool>();
    m.spec = DiscretizationSpec::from_json(read_text(dir / "discretization.json"));
    m.net = DpBayesNet::from_json(read_text(dir / "network.json"));
    m.histograms = json::parse(read_text(dir / "histograms.json")).get<std::vector<std::vector<double>>>();
    const auto split = json::parse(read_text(dir / "split.json"));
    m.split.fraction = split.at("fraction").get<double>();
    m.split.train = split.at("train").get<std::vector<std::size_t>>();
    m.split.holdout = split.at("holdout").get<std::vector<std::size_t>>();
    if (manifest.at("spec_hash").get<std::string>() != m.spec.hash() || m.net.spec_hash != m.spec.hash())
      throw ConfigError("model artifacts in " + dir.string() + " disagree on the discretization hash");
  } catch (const json::exception& e) {
    throw ConfigError("malformed model artifacts in " + dir.string() + ": " + e.what());
  }
  return m;
}

SimilarityIndex make_similarity_index(const RelationalDataset& dataset, const FittedModel& model) {
  for (auto i : model.split.train)
    if (i >= dataset.entity_count()) throw ConfigError("model split does not match the dataset");
  return SimilarityIndex(model.histograms, build_analytics(dataset, model.split, model.spec));
}

}  // namespace relsynth
