#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relsynth/analytics.hpp"
#include "relsynth/discretize.hpp"

namespace relsynth::llm {

enum class PromptKind { kSynthesis, kEvaluation };

/// A prompt template split into named sections. A template file marks each
/// section with a line holding only "[name]"; everything up to the next marker
/// is the section text, verbatim.
///
/// Synthesis sections, in order: persona, references, conditioning,
/// instruction, guidelines. Evaluation sections: persona, references, task,
/// candidate. Placeholders: <samples_n>, <samples>, <seed>, <eval>.
class PromptTemplate {
 public:
  static PromptTemplate parse(std::string_view text, PromptKind kind);
  static PromptTemplate load(const std::filesystem::path& path, PromptKind kind);

  PromptKind kind() const { return kind_; }
  const std::string& section(std::string_view name) const;
  const std::vector<std::pair<std::string, std::string>>& sections() const { return sections_; }

 private:
  PromptKind kind_ = PromptKind::kSynthesis;
  std::vector<std::pair<std::string, std::string>> sections_;
};

/// One "name: value" line of the conditioning block.
using ConditioningLine = std::pair<std::string, std::string>;

/// Display name of an analytics feature: the bare column for main-table
/// features, "table column" for descendants, with " date"/" time" for datetime
/// parts and "table count" for counts.
std::string feature_display_name(const FeatureId& id, std::string_view main_table);

/// Decoded conditioning values of a sampled analytics row.
std::vector<ConditioningLine> conditioning_lines(const AnalyticsRow& row, const AnalyticsTable& layout,
                                                 const DiscretizationSpec& spec, std::string_view main_table);
std::vector<ConditioningLine> conditioning_lines(const AnalyticsRow& row, std::span<const std::size_t> features,
                                                 const DiscretizationSpec& spec, std::string_view main_table);

/// Synthesis prompt. `references` are compact JSON documents, most similar
/// first; with none the references section is left out.
std::string render_synthesis(const PromptTemplate& tpl, std::span<const std::string> references,
                             std::span<const ConditioningLine> conditioning);

/// Realism prompt for one candidate entity.
std::string render_evaluation(const PromptTemplate& tpl, std::span<const std::string> references,
                              const std::string& candidate);

/// Rough token estimate (4 characters per token).
std::size_t estimate_tokens(std::string_view text);

}  // namespace relsynth::llm
