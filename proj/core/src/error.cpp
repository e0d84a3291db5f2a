#include "spin_guard/error.hpp"

namespace spin_guard {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::UnsupportedCharacter: return "UnsupportedCharacter";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::ProtocolError: return "ProtocolError";
    case ErrorKind::ContextLengthExceeded: return "ContextLengthExceeded";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::MalformedModelFile: return "MalformedModelFile";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::MissingSlot: return "MissingSlot";
    case ErrorKind::MultipleSlots: return "MultipleSlots";
    case ErrorKind::NoMaliciousRecords: return "NoMaliciousRecords";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      detail_(message) {}

Error Error::with_stage(std::string stage) const {
  Error copy(kind_, "[" + stage + "] " + detail_);
  copy.stage_ = std::move(stage);
  copy.detail_ = detail_;
  return copy;
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

bool is_backend_error(ErrorKind kind) noexcept {
  return kind == ErrorKind::BackendUnavailable || kind == ErrorKind::ProtocolError ||
         kind == ErrorKind::ContextLengthExceeded;
}

}  // namespace spin_guard
