#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace brainage {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,         // runtime failure, including a failed gradient check
  kExitBadConfig = 2,
  kExitMetricPrecondition = 3,
  kExitDiverged = 4,
};

/// Runs one subcommand. `args` excludes the program name.
/// Subcommands: gen-data, train, eval, compare, ablate, severity, gradcheck, embed.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace brainage
