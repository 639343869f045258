#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mtqa {

/// Process exit codes of the `mtqa` tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // unexpected internal error
  kExitUsage = 2,    // no/unknown subcommand, unknown or malformed flag
  kExitConfig = 3,   // invalid configuration value or unknown config key
  kExitIo = 4,       // missing or unwritable file
  kExitData = 5,     // malformed manifest, image, checkpoint or inconsistent data
  kExitNumeric = 6,  // non-finite loss or activation
  kExitShape = 7,    // tensor or image shape mismatch
};

/// Runs one subcommand; args excludes the program name. Structured output
/// goes to `out`, diagnostics and progress to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mtqa
