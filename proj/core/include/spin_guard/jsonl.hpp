#pragma once

#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "spin_guard/evaluation.hpp"

namespace spin_guard {

/// Append-only JSONL sink. Each line is written and flushed under a lock,
/// so concurrent writers never interleave.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path);

  void write(const nlohmann::json& value);
  void write(const EvalRecord& record);
  std::size_t lines_written() const;

 private:
  mutable std::mutex mutex_;
  std::ofstream out_;
  std::string path_;
  std::size_t lines_ = 0;
};

void write_records(const std::string& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_records(const std::string& path);

}  // namespace spin_guard
