#pragma once

#include <iosfwd>

namespace eqgraph {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitFailure = 3 };

/// Runs one subcommand (synth, build, match, eval). Errors are reported on
/// `err` as a single line "error: code=<n> kind=<kind> message=<text>".
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eqgraph
