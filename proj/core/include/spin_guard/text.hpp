#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace spin_guard::text {

/// Decodes UTF-8 into code points; invalid bytes decode as themselves.
std::u32string to_code_points(std::string_view utf8);

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool starts_with_icase(std::string_view text, std::string_view prefix);
bool contains_icase(std::string_view haystack, std::string_view needle);

std::size_t count_occurrences(std::string_view haystack, std::string_view needle);
std::string replace_first(std::string_view s, std::string_view from, std::string_view to);

std::string read_file(const std::string& path);
std::vector<std::string> read_lines(const std::string& path);

}  // namespace spin_guard::text
