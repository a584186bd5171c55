#include "factscope/csv.hpp"

#include <fstream>
#include <sstream>

#include "factscope/error.hpp"

namespace factscope::csv {

std::vector<std::vector<std::string>> parse(std::string_view text) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string cell;
  bool in_quotes = false;
  bool cell_started = false;
  size_t i = 0;

  auto end_cell = [&] {
    record.push_back(std::move(cell));
    cell.clear();
    cell_started = false;
  };
  auto end_record = [&] {
    end_cell();
    // A bare newline yields a single empty cell; drop such blank lines.
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  while (i < text.size()) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          i += 2;
          continue;
        }
        in_quotes = false;
      } else {
        cell.push_back(c);
      }
      ++i;
      continue;
    }
    switch (c) {
      case '"':
        if (!cell_started && cell.empty()) {
          in_quotes = true;
          cell_started = true;
        } else {
          cell.push_back(c);
        }
        break;
      case ',':
        end_cell();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        cell.push_back(c);
        cell_started = true;
    }
    ++i;
  }
  if (in_quotes) throw Error(ErrorCode::MALFORMED, "unterminated quoted CSV cell");
  if (!cell.empty() || !record.empty() || cell_started) end_record();
  return records;
}

std::vector<std::vector<std::string>> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IO_ERROR, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string quote(std::string_view cell) {
  bool needs = cell.find_first_of(",\"\r\n") != std::string_view::npos ||
               (!cell.empty() && (cell.front() == ' ' || cell.back() == ' '));
  if (!needs) return std::string(cell);
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << quote(cells[i]);
  }
  out << "\r\n";
}

}  // namespace factscope::csv
