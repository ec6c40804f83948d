#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace regmap {

enum class ErrorCode {
  InvalidArgument,
  InadmissibleMesh,
  OutsideDomain,
  NoConvergence,
  PointNotOnBoundary,
  InconsistentPeriodicity,
  NonSPD,
  SingularMatrix,
  LineSearchFailure,
  NaNObjective,
  NoFeature,
  DegenerateKernel,
  CurveEdgeMismatch,
  Infeasible,
  UnknownKey,
  OutOfRange,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `what()` is "<Code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace regmap
