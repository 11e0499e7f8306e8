#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace relsynth::csv {

/// A cell is null when the field is empty.
using Cell = std::optional<std::string>;

struct Document {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
};

/// Comma separated, double-quote escaping, first row is the header.
Document parse(const std::string& text);
Document read_file(const std::filesystem::path& path);

std::string format(const Document& doc);
void write_file(const std::filesystem::path& path, const Document& doc);

}  // namespace relsynth::csv
