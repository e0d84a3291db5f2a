#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spin_guard {

enum class ErrorKind {
  InvalidArgument,
  UnsupportedCharacter,
  BackendUnavailable,
  ProtocolError,
  ContextLengthExceeded,
  ConfigError,
  FileNotFound,
  MalformedModelFile,
  MalformedRow,
  EmptyFile,
  MissingSlot,
  MultipleSlots,
  NoMaliciousRecords,
  EmptyClass,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/**
 * Library-wide exception. Every failure surfaced by spin_guard carries a
 * kind so callers (notably the CLI) can map it to an exit status, and an
 * optional stage name identifying the pipeline layer that was running.
 */
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Copy of this error annotated with the stage that raised it.
  Error with_stage(std::string stage) const;

 private:
  ErrorKind kind_;
  std::string stage_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

// True for errors caused by the model endpoint rather than user input.
bool is_backend_error(ErrorKind kind) noexcept;

}  // namespace spin_guard
