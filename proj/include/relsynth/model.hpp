#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "relsynth/analytics.hpp"
#include "relsynth/dataset.hpp"
#include "relsynth/discretize.hpp"
#include "relsynth/pgm.hpp"
#include "relsynth/similarity.hpp"

namespace relsynth {

struct FitOptions {
  double epsilon = 2.0;
  std::size_t degree = 3;
  double structure_share = 0.5;
  std::size_t cell_cap = 1'000'000;
  double holdout = 0.2;
  std::uint64_t seed = 0;
  bool noise_disabled = false;
  StrategyConfig strategy;
};

/// Everything `fit` produces. The discretization and the network only ever
/// see the training partition.
struct FittedModel {
  std::filesystem::path config_path;  // dataset config the model was fitted on
  FitOptions options;
  HoldoutSplit split;
  DiscretizationSpec spec;
  DpBayesNet net;
  std::vector<std::vector<double>> histograms;  // train marginals per analytics column
};

FittedModel fit_model(const RelationalDataset& dataset, const FitOptions& options,
                      const std::filesystem::path& config_path = {});

/// Writes manifest.json, discretization.json, network.json, histograms.json,
/// noise_account.json, split.json and analytics_summary.json.
void save_model(const FittedModel& model, const RelationalDataset& dataset, const std::filesystem::path& dir);
FittedModel load_model(const std::filesystem::path& dir);

/// Rarity-weighted retrieval index over the training entities of `dataset`.
SimilarityIndex make_similarity_index(const RelationalDataset& dataset, const FittedModel& model);

}  // namespace relsynth
