#pragma once

namespace frnet::cli {

enum ExitCode : int { ok = 0, usage = 1, data_error = 2, numeric_failure = 3 };

/// Parses argv, dispatches to a subcommand and maps errors to exit codes.
int run(int argc, const char* const* argv);

}  // namespace frnet::cli
