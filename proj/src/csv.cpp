#include "relsynth/csv.hpp"

#include <fstream>
#include <sstream>

#include "relsynth/error.hpp"

namespace relsynth::csv {

namespace {

// Splits text into records of raw fields. Quoted fields may span lines.
std::vector<std::vector<std::string>> split_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  const auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    records.push_back(std::move(record));
    record.clear();
    field_started = false;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      ++i;
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // handled by '\n'
    } else if (c == '\n') {
      end_record();
    } else {
      field += c;
      field_started = true;
    }
    ++i;
  }
  if (quoted) throw DataError("csv: unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

bool needs_quotes(const std::string& s) {
  return s.find_first_of(",\"\r\n") != std::string::npos || (!s.empty() && (s.front() == ' ' || s.back() == ' '));
}

void append_field(std::string& out, const Cell& cell) {
  if (!cell) return;
  if (!needs_quotes(*cell)) {
    out += *cell;
    return;
  }
  out += '"';
  for (char c : *cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

}  // namespace

Document parse(const std::string& text) {
  auto records = split_records(text);
  Document doc;
  if (records.empty()) throw DataError("csv: missing header row");
  doc.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty() && doc.header.size() != 1) continue;  // blank line
    if (rec.size() != doc.header.size())
      throw DataError("csv: row " + std::to_string(r) + " has " + std::to_string(rec.size()) +
                      " fields, header has " + std::to_string(doc.header.size()));
    std::vector<Cell> row;
    row.reserve(rec.size());
    for (auto& f : rec) {
      if (f.empty())
        row.emplace_back(std::nullopt);
      else
        row.emplace_back(std::move(f));
    }
    doc.rows.push_back(std::move(row));
  }
  return doc;
}

Document read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open csv file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format(const Document& doc) {
  std::string out;
  for (std::size_t i = 0; i < doc.header.size(); ++i) {
    if (i) out += ',';
    append_field(out, doc.header[i]);
  }
  out += '\n';
  for (const auto& row : doc.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      append_field(out, row[i]);
    }
    out += '\n';
  }
  return out;
}

void write_file(const std::filesystem::path& path, const Document& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write csv file: " + path.string());
  out << format(doc);
}

}  // namespace relsynth::csv
