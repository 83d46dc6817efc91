#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace squeeze {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,  // bad flags or configuration, infeasible budget
  kExitIo = 2,      // unreadable/unwritable files, malformed input lines
  kExitScorer = 3,  // scorer backend failure
};

/// Runs the `squeeze` command line. `args` excludes the program name.
/// Subcommands: compress, rank, recover, bench.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace squeeze
