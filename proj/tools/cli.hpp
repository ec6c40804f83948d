#pragma once

#include <string>
#include <vector>

namespace regmap::cli {

enum Exit : int {
  kOk = 0,
  kConfig = 1,
  kInput = 2,
  kSolver = 3,
  kInfeasible = 4,
};

/// Runs the `regmap` driver; args exclude the program name.
int run(const std::vector<std::string>& args);

}  // namespace regmap::cli
