#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace srlp {

enum class ErrorCode {
  InvalidArgument,
  Parse,
  Validation,
  Io,
  NoEntryPrice,
  NoExitPrice,
  EmptyPartition,
  ShapeMismatch,
  NonFinite,
  MissingCache,
  Unfitted,
  NotDefined,
  Ruin,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for everything the library reports. The code is stable and
/// ends up in the CLI's machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace srlp
