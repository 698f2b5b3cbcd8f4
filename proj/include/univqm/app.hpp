#pragma once

#include <exception>
#include <ostream>
#include <string>
#include <vector>

namespace univqm::cli {

/// Command-line entry point. `args` excludes the program name. Reports go to
/// `out` (or the --out file), diagnostics and timing to `err`.
/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e) noexcept;

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace univqm::cli
