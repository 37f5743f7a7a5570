#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace volsynth::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view line, char sep);
std::string to_lower(std::string_view s);

// Strict parse of the whole field; surrounding whitespace allowed.
std::optional<double> parse_double(std::string_view field);

// Shortest representation that parses back to the identical double.
std::string format_double(double v);

}  // namespace volsynth::text
