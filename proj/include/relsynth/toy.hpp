#pragma once

#include <cstdint>
#include <filesystem>

#include "relsynth/dataset.hpp"

namespace relsynth {

/// Synthetic hospital-style dataset with a known generating process:
/// person -> admission (sequential by admittime) -> transfer (sequential by
/// intime). Sex and age drive insurance and admission counts; admission type
/// drives the admission hour, length of stay and the transfer path.
struct ToyOptions {
  std::size_t entities = 2000;
  std::uint64_t seed = 7;
};

RelationalDataset generate_toy(const ToyOptions& options);

/// Writes the dataset plus default synthesis and evaluation prompt templates;
/// the config references the templates.
void write_toy(const RelationalDataset& dataset, const std::filesystem::path& dir);

/// Default prompt templates for the toy domain.
const char* toy_synthesis_template();
const char* toy_evaluation_template();

}  // namespace relsynth
