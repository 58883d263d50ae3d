#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace koopa::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_usage = 2,
    exit_data = 3,
    exit_numeric = 4,
};

/// Runs the koopa command line. `args` excludes the program name. Normal
/// output goes to `out`, diagnostics to `err`; the return value is the
/// process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace koopa::cli
