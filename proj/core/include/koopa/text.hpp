#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace koopa::text {

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

/// Strict parsers: the whole string must be consumed. `what` names the
/// setting in the ConfigError raised on failure.
double parse_double(std::string_view s, const std::string& what);
std::uint64_t parse_size(std::string_view s, const std::string& what);
bool parse_bool(std::string_view s, const std::string& what);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

} // namespace koopa::text
