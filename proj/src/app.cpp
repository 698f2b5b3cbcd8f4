#include "univqm/app.hpp"

#include <chrono>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "univqm/commands.hpp"

namespace univqm::cli {

namespace {

struct Flags {
  std::string config_path;
  std::string format;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> rounds;
  std::string mode;
  std::string out_path;
};

void add_flags(CLI::App* sub, Flags& flags) {
  sub->add_option("--config", flags.config_path, "Scenario configuration file")->required();
  sub->add_option("--format", flags.format, "Output format: json, csv or table");
  sub->add_option("--seed", flags.seed, "Master seed override");
  sub->add_option("--rounds", flags.rounds, "Round or sample count override");
  sub->add_option("--mode", flags.mode, "Consistency mode: strict or ray");
  sub->add_option("--out", flags.out_path, "Write the report to this file");
}

Overrides to_overrides(const Flags& flags) {
  Overrides o;
  if (!flags.format.empty()) {
    o.format = parse_format(flags.format);
    if (!o.format) throw ConfigError(fmt::format("--format: unknown format '{}'", flags.format));
  }
  if (!flags.mode.empty()) {
    o.mode = parse_mode(flags.mode);
    if (!o.mode) throw ConfigError(fmt::format("--mode: unknown mode '{}'", flags.mode));
  }
  o.seed = flags.seed;
  o.rounds = flags.rounds;
  return o;
}

}  // namespace

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kExitConfigError;
  if (dynamic_cast<const SolverError*>(&e) != nullptr) return kExitSolverError;
  return kExitInternalError;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unitary quantum mechanics experiments: measurement, suggestion, closed timelike curves", "univqm"};
  app.require_subcommand(1);
  Flags flags;
  const ExperimentKind kinds[] = {ExperimentKind::measure, ExperimentKind::signal, ExperimentKind::chsh,
                                  ExperimentKind::ctc_solve, ExperimentKind::ctc_scan};
  std::vector<std::pair<CLI::App*, ExperimentKind>> subs;
  for (auto k : kinds) {
    auto* sub = app.add_subcommand(to_string(k), fmt::format("Run a {} experiment", to_string(k)));
    add_flags(sub, flags);
    subs.emplace_back(sub, k);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  ExperimentKind kind = ExperimentKind::measure;
  for (const auto& [sub, k] : subs) {
    if (sub->parsed()) kind = k;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    const ScenarioConfig config = load_config_file(flags.config_path, to_overrides(flags));
    if (config.kind != kind) {
      throw ConfigError(fmt::format("{}: config section [{}] does not match subcommand '{}'", flags.config_path,
                                    to_string(config.kind), to_string(kind)));
    }
    const CommandOutput result = run_command(config);
    if (flags.out_path.empty()) {
      out << result.text;
    } else {
      std::ofstream file(flags.out_path, std::ios::binary);
      if (!file) throw ConfigError(fmt::format("--out: cannot open '{}' for writing", flags.out_path));
      file << result.text;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    err << fmt::format("wall_clock_seconds {:.6f}\n", seconds);
    return result.exit_code;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    if (const auto* solver = dynamic_cast<const SolverError*>(&e)) {
      err << fmt::format("solver error: {} (best residual {:.3e})\n", e.what(), solver->best_residual());
    } else {
      err << (code == kExitConfigError ? "config error: " : "internal error: ") << e.what() << "\n";
    }
    return code;
  }
}

}  // namespace univqm::cli
