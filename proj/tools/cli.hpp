#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vemflow::cli {

enum ExitCode { kOk = 0, kValidation = 1, kSolverFailure = 2 };

/// args excludes the program name. Normal output goes to `out`, usage and
/// diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vemflow::cli
