#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace factscope::csv {

// RFC 4180: comma separated, CRLF or LF records, double-quote quoting with ""
// escapes. A leading UTF-8 BOM is dropped. Returns every record, header first.
std::vector<std::vector<std::string>> parse(std::string_view text);
std::vector<std::vector<std::string>> read_file(const std::string& path);

std::string quote(std::string_view cell);
void write_row(std::ostream& out, const std::vector<std::string>& cells);

}  // namespace factscope::csv
