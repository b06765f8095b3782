#include "topoforge/error.hpp"

namespace topoforge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoMaterial: return "NoMaterial";
    case ErrorCode::NoLoad: return "NoLoad";
    case ErrorCode::NoFixing: return "NoFixing";
    case ErrorCode::AmbiguousPalette: return "AmbiguousPalette";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::BisectionFailure: return "BisectionFailure";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::RemoteProtocolError: return "RemoteProtocolError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace topoforge
