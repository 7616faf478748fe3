#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rvelle::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kSolver = 3,
  kFormat = 4,
  kNumerical = 5,
};

/// Entry point of the `rvelle` tool. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rvelle::cli
