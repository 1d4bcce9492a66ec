#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kgcoi {

/// Exit status of run_cli.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

/// The kgcoi command line: index, build-dataset, run, score, verify,
/// sc-report. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kgcoi
