#include "clue/io.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "clue/errors.hpp"

namespace fs = std::filesystem;

namespace clue {

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw_io("read failed: " + path.string());
  return ss.str();
}

void write_file_atomic(const fs::path& path, const void* data, size_t size) {
  fs::path dir = path.parent_path();
  if (dir.empty()) dir = ".";
  std::error_code ec;
  fs::create_directories(dir, ec);

  fs::path tmp = dir / (path.filename().string() + ".tmp" +
                        std::to_string(std::random_device{}()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot create file: " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw_io("write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw_io("rename failed: " + path.string());
  }
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  write_file_atomic(path, content.data(), content.size());
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

// Parses one CSV record starting at pos; advances pos past the record and its
// terminating newline.
std::vector<std::string> parse_record(const std::string& text, size_t& pos,
                                      const std::string& origin) {
  std::vector<std::string> cells;
  std::string cell;
  bool in_quotes = false;
  while (pos < text.size()) {
    char c = text[pos];
    if (in_quotes) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          cell += '"';
          pos += 2;
        } else {
          in_quotes = false;
          ++pos;
        }
      } else {
        cell += c;
        ++pos;
      }
      continue;
    }
    if (c == '"' && cell.empty()) {
      in_quotes = true;
      ++pos;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
      ++pos;
    } else if (c == '\n' || c == '\r') {
      while (pos < text.size() && (text[pos] == '\r' || text[pos] == '\n')) {
        if (text[pos] == '\n') {
          ++pos;
          break;
        }
        ++pos;
      }
      cells.push_back(std::move(cell));
      return cells;
    } else {
      cell += c;
      ++pos;
    }
  }
  if (in_quotes) throw_schema(origin + ": unterminated quoted CSV cell");
  cells.push_back(std::move(cell));
  return cells;
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  CsvTable table;
  size_t pos = 0;
  if (text.empty()) throw_schema(origin + ": empty CSV");
  table.header = parse_record(text, pos, origin);
  while (pos < text.size()) {
    auto cells = parse_record(text, pos, origin);
    if (cells.size() == 1 && cells[0].empty()) continue;  // blank line
    if (cells.size() != table.header.size())
      throw_schema(origin + ": row " + std::to_string(table.rows.size() + 1) +
                   " has " + std::to_string(cells.size()) + " cells, expected " +
                   std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

CsvTable read_csv(const fs::path& path) {
  return parse_csv(read_text_file(path), path.string());
}

namespace {

std::string escape_cell(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string format_csv(const CsvTable& table) {
  std::ostringstream out;
  auto write_row = [&](const std::vector<std::string>& row) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << escape_cell(row[i]);
    }
    out << '\n';
  };
  write_row(table.header);
  for (const auto& row : table.rows) write_row(row);
  return out.str();
}

}  // namespace clue
