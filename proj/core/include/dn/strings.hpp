#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dn {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);
bool iequals(std::string_view a, std::string_view b);

/// Splits on '\n'; a trailing newline does not produce an extra empty line.
std::vector<std::string> split_lines(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Collapses runs of whitespace to single spaces and trims the ends.
std::string collapse_ws(std::string_view s);

size_t levenshtein(std::string_view a, std::string_view b);

/// FNV-1a 64-bit over the bytes of `data`, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace dn
