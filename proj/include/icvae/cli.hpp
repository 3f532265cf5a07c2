#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace icvae {

/// Process exit statuses of run_command.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitInvalid = 2, kExitNumerical = 3 };

/// Runs one subcommand (train, sample, interpolate, sweep, eval-ll, eval-ce,
/// gradcheck). `args` excludes the program name. Metric lines go to `out` as
/// "name<TAB>value<TAB>n<TAB>seed"; diagnostics go to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace icvae
