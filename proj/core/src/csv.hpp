#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace spin_guard::csv {

struct Row {
  std::size_t line = 0;  // 1-based line where the row starts
  std::vector<std::string> fields;
};

/// RFC 4180 reader: comma separated, double-quoted fields may contain
/// commas, newlines and doubled quotes. Blank lines are skipped.
std::vector<Row> parse(std::string_view text);

}  // namespace spin_guard::csv
