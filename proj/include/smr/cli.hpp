#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace smr {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitUsage = 2,
  kExitNumerical = 3,
};

/// Entry point shared by the `smr` executable and the tests. `args` excludes
/// the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace smr
