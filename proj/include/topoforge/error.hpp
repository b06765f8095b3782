#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace topoforge {

enum class ErrorCode {
  InvalidArgument,
  NoMaterial,
  NoLoad,
  NoFixing,
  AmbiguousPalette,
  DimensionMismatch,
  SingularSystem,
  BisectionFailure,
  BackendUnavailable,
  RemoteProtocolError,
  Timeout,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace topoforge
