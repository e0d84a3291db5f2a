#include "spin_guard/jsonl.hpp"

#include <nlohmann/json.hpp>

#include "spin_guard/serialize.hpp"
#include "spin_guard/text.hpp"

namespace spin_guard {

JsonlWriter::JsonlWriter(const std::string& path) : out_(path, std::ios::app | std::ios::binary), path_(path) {
  if (!out_) fail(ErrorKind::IoError, "cannot open '" + path + "' for appending");
}

void JsonlWriter::write(const nlohmann::json& value) {
  const std::string line = value.dump() + "\n";
  std::lock_guard lock(mutex_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) fail(ErrorKind::IoError, "write to '" + path_ + "' failed");
  ++lines_;
}

void JsonlWriter::write(const EvalRecord& record) { write(nlohmann::json(record)); }

std::size_t JsonlWriter::lines_written() const {
  std::lock_guard lock(mutex_);
  return lines_;
}

void write_records(const std::string& path, const std::vector<EvalRecord>& records) {
  JsonlWriter w(path);
  for (const auto& r : records) w.write(r);
}

std::vector<EvalRecord> read_records(const std::string& path) {
  std::vector<EvalRecord> out;
  std::size_t n = 0;
  for (const auto& line : text::read_lines(path)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<EvalRecord>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::MalformedRow, path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace spin_guard
