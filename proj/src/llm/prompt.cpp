#include "relsynth/llm/prompt.hpp"

#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "relsynth/error.hpp"

namespace relsynth::llm {

namespace {

constexpr std::array<std::string_view, 5> kSynthesisSections = {"persona", "references", "conditioning",
                                                                "instruction", "guidelines"};
constexpr std::array<std::string_view, 4> kEvaluationSections = {"persona", "references", "task", "candidate"};
constexpr std::array<std::string_view, 4> kPlaceholders = {"<samples_n>", "<samples>", "<seed>", "<eval>"};

std::span<const std::string_view> section_names(PromptKind kind) {
  if (kind == PromptKind::kSynthesis) return kSynthesisSections;
  return kEvaluationSections;
}

std::optional<std::string_view> marker_name(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.size() < 3 || line.front() != '[' || line.back() != ']') return std::nullopt;
  return line.substr(1, line.size() - 2);
}

// Single left-to-right pass so substituted text is never rescanned.
std::string substitute(const std::string& text, const std::map<std::string_view, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::string_view hit;
    std::size_t at = std::string::npos;
    for (auto p : kPlaceholders) {
      const auto i = text.find(p, pos);
      if (i < at || (i == at && i != std::string::npos && p.size() > hit.size())) {
        at = i;
        hit = p;
      }
    }
    if (at == std::string::npos) {
      out.append(text, pos);
      break;
    }
    out.append(text, pos, at - pos);
    const auto it = values.find(hit);
    if (it == values.end()) throw ConfigError("prompt template: unresolved placeholder " + std::string(hit));
    out += it->second;
    pos = at + hit.size();
  }
  return out;
}

std::string join_lines(std::span<const std::string> items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += items[i];
  }
  return out;
}

std::string trim_trailing(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string_view text, PromptKind kind) {
  PromptTemplate tpl;
  tpl.kind_ = kind;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    const bool last = end == std::string_view::npos;
    if (last) end = text.size();
    const auto line = text.substr(pos, end - pos);
    if (auto name = marker_name(line)) {
      tpl.sections_.emplace_back(std::string(*name), std::string());
    } else if (!tpl.sections_.empty()) {
      auto& body = tpl.sections_.back().second;
      body.append(line);
      if (!last) body += '\n';
    } else if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      throw ConfigError("prompt template: text before the first section marker");
    }
    pos = end + 1;
  }
  const auto expected = section_names(kind);
  if (tpl.sections_.size() != expected.size())
    throw ConfigError("prompt template: expected " + std::to_string(expected.size()) + " sections, found " +
                      std::to_string(tpl.sections_.size()));
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (tpl.sections_[i].first != expected[i])
      throw ConfigError("prompt template: section " + std::to_string(i + 1) + " must be [" +
                        std::string(expected[i]) + "], found [" + tpl.sections_[i].first + "]");
  return tpl;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path, PromptKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open prompt template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), kind);
}

const std::string& PromptTemplate::section(std::string_view name) const {
  for (const auto& [n, body] : sections_)
    if (n == name) return body;
  throw ConfigError("prompt template has no section [" + std::string(name) + "]");
}

std::string feature_display_name(const FeatureId& id, std::string_view main_table) {
  if (id.component == Component::kCount) return id.table + " count";
  std::string name = id.table == main_table ? id.column : id.table + " " + id.column;
  if (id.component == Component::kDate) name += " date";
  if (id.component == Component::kTime) name += " time";
  return name;
}

std::vector<ConditioningLine> conditioning_lines(const AnalyticsRow& row, std::span<const std::size_t> features,
                                                 const DiscretizationSpec& spec, std::string_view main_table) {
  if (row.size() != features.size()) throw ConfigError("conditioning row does not match the analytics layout");
  std::vector<ConditioningLine> out;
  out.reserve(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    const auto& f = spec.feature(features[i]);
    out.emplace_back(feature_display_name(f.id, main_table), f.decode_label(row[i]));
  }
  return out;
}

std::vector<ConditioningLine> conditioning_lines(const AnalyticsRow& row, const AnalyticsTable& layout,
                                                 const DiscretizationSpec& spec, std::string_view main_table) {
  return conditioning_lines(row, layout.features, spec, main_table);
}

std::string render_synthesis(const PromptTemplate& tpl, std::span<const std::string> references,
                             std::span<const ConditioningLine> conditioning) {
  if (tpl.kind() != PromptKind::kSynthesis) throw ConfigError("render_synthesis needs a synthesis template");
  std::string seed;
  for (std::size_t i = 0; i < conditioning.size(); ++i) {
    if (i) seed += '\n';
    seed += conditioning[i].first + ": " + conditioning[i].second;
  }
  const std::map<std::string_view, std::string> values = {
      {"<samples_n>", std::to_string(references.size())}, {"<samples>", join_lines(references)}, {"<seed>", seed}};
  std::string out;
  for (const auto& [name, body] : tpl.sections()) {
    if (name == "references" && references.empty()) continue;
    out += substitute(body, values);
  }
  return trim_trailing(std::move(out));
}

std::string render_evaluation(const PromptTemplate& tpl, std::span<const std::string> references,
                              const std::string& candidate) {
  if (tpl.kind() != PromptKind::kEvaluation) throw ConfigError("render_evaluation needs an evaluation template");
  const std::map<std::string_view, std::string> values = {
      {"<samples_n>", std::to_string(references.size())}, {"<samples>", join_lines(references)}, {"<eval>", candidate}};
  std::string out;
  for (const auto& [name, body] : tpl.sections()) {
    if (name == "references" && references.empty()) continue;
    out += substitute(body, values);
  }
  return trim_trailing(std::move(out));
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

}  // namespace relsynth::llm
