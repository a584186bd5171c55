#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace factscope::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
std::vector<std::string> split_words(std::string_view s);

// Strict decimal parse: the whole (trimmed) string must be a finite number.
std::optional<double> parse_number(std::string_view s);

// Shortest representation that round-trips ("2012", "24.64", "6037000").
std::string format_number(double v);

// Lowercase alphanumeric tokens; everything else separates.
std::vector<std::string> tokenize(std::string_view s);

}  // namespace factscope::text
