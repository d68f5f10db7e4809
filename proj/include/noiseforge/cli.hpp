#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace noiseforge {

inline constexpr const char* kVersion = "0.1.0";

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitUsage = 2,
  kExitValidation = 3,
};

/// Runs the `noiseforge` command line. `args` excludes the program name.
/// Data artifacts go to files; `out` receives help text and check reports,
/// `err` receives log lines.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace noiseforge
