#pragma once

#include <string>

#include "univqm/config.hpp"

namespace univqm::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitSolverError = 3,
  kExitInternalError = 4,
};

struct CommandOutput {
  std::string text;
  int exit_code = kExitOk;
};

/// Runs one experiment and renders its report. The text is a pure function
/// of the config: JSON keys appear in a fixed order and no timing or other
/// environment data is included.
CommandOutput run_command(const ScenarioConfig& config);

CommandOutput cmd_measure(const ScenarioConfig& config);
CommandOutput cmd_signal(const ScenarioConfig& config);
CommandOutput cmd_chsh(const ScenarioConfig& config);
CommandOutput cmd_ctc(const ScenarioConfig& config);

}  // namespace univqm::cli
