#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace samgpt {

/// Exit codes; failures also print `samgpt: error[<category>]: <message>`.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitRoster = 2,
  kExitUsage = 3,
  kExitLoad = 4,
  kExitShape = 5,
  kExitNumeric = 6,
  kExitEpisode = 7,
};

/// Runs one subcommand. args[0] is the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace samgpt
