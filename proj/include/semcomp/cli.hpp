#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace semcomp::cli {

enum ExitCode : int {
  kOk = 0,
  kTrialFailure = 1,
  kUsage = 2,
};

/// Entry point of the `semcomp` executable. `args` excludes the program name.
/// Data goes to `out` or to files; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace semcomp::cli
