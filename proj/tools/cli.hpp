#pragma once

// Command-line front end: `ncenter <subcommand> --config <file> [--out <dir>] [--seed <int>]`.

#include <ostream>
#include <string>
#include <vector>

namespace ncenter::cli {

enum ExitCode { Success = 0, ToleranceFailure = 1, UsageError = 2 };

/// Runs the CLI on argv-style arguments (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ncenter::cli
