#include "regmap/error.hpp"

namespace regmap {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InadmissibleMesh: return "InadmissibleMesh";
    case ErrorCode::OutsideDomain: return "OutsideDomain";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::PointNotOnBoundary: return "PointNotOnBoundary";
    case ErrorCode::InconsistentPeriodicity: return "InconsistentPeriodicity";
    case ErrorCode::NonSPD: return "NonSPD";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::LineSearchFailure: return "LineSearchFailure";
    case ErrorCode::NaNObjective: return "NaNObjective";
    case ErrorCode::NoFeature: return "NoFeature";
    case ErrorCode::DegenerateKernel: return "DegenerateKernel";
    case ErrorCode::CurveEdgeMismatch: return "CurveEdgeMismatch";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail),
      code_(code),
      detail_(detail) {}

}  // namespace regmap
