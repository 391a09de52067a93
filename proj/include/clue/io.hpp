#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace clue {

std::string read_text_file(const std::filesystem::path& path);

// Writes to a temp file in the target directory, then renames. A failed
// command never leaves a partial output behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
void write_file_atomic(const std::filesystem::path& path, const void* data, size_t size);

// Minimal CSV support: header row, '.' decimal separator, RFC-style quoting
// for cells containing commas/quotes/newlines.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& origin);
std::string format_csv(const CsvTable& table);

}  // namespace clue
