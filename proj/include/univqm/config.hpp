#pragma once

// Experiment configuration files.
//
// Flat "key = value" lines under exactly one section header naming the
// experiment kind:
//
//   # comment
//   [signal]
//   theta_a = 0.0
//   theta_b = 0.0
//   rounds  = 1000
//   seed    = 42
//
// Every kind has a fixed key set; unknown or repeated keys are errors. Angles
// are plain numbers in radians. There are no default seeds.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "univqm/ctc.hpp"
#include "univqm/errors.hpp"

namespace univqm::cli {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ExperimentKind { measure, signal, chsh, ctc_solve, ctc_scan };
enum class OutputFormat { json, csv, table };

const char* to_string(ExperimentKind k) noexcept;
const char* to_string(OutputFormat f) noexcept;
std::optional<ExperimentKind> parse_kind(std::string_view name);
std::optional<OutputFormat> parse_format(std::string_view name);
std::optional<ConsistencyMode> parse_mode(std::string_view name);

struct MeasureParams {
  std::string preset;  // up | down | plus | bell
  std::optional<std::uint64_t> rounds;
  std::optional<std::uint64_t> seed;
};

struct SignalParams {
  double theta_a = 0.0;
  double theta_b = 0.0;
  std::uint64_t rounds = 0;
  std::uint64_t seed = 0;
  std::vector<double> audit_thetas;
  std::optional<double> theta_a2;
  std::optional<double> theta_b2;
};

struct ChshParams {
  std::optional<std::array<double, 4>> angles;  // a1, a2, b1, b2
  std::optional<double> grid_step;
};

enum class SolveMethod { iterate, spectral, both };
const char* to_string(SolveMethod m) noexcept;

/// Where a CTC scenario came from, for echoing in reports.
struct ScenarioSource {
  std::string variant;  // empty for inline / file scenarios
  std::string layout;
  std::string unitary_file;
  std::vector<std::string> cr;
  std::vector<std::string> ctc;
};

struct CtcSolveParams {
  ScenarioSource source;
  std::optional<CtcScenario> scenario;
  std::string cr_state;  // "maximally_mixed" or one label per CR subsystem
  std::optional<DensityMatrix> cr_input;
  ConsistencyMode mode = ConsistencyMode::strict;
  SolveMethod method = SolveMethod::both;
  /// Iteration cap for the iterate method.
  std::uint64_t max_iterations = 10000;
};

struct CtcScanParams {
  ScenarioSource source;
  std::optional<CtcScenario> scenario;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  ConsistencyMode mode = ConsistencyMode::strict;
};

struct ScenarioConfig {
  ExperimentKind kind = ExperimentKind::measure;
  OutputFormat format = OutputFormat::json;
  std::variant<MeasureParams, SignalParams, ChshParams, CtcSolveParams, CtcScanParams> params;
};

/// Command-line flags that override config values.
struct Overrides {
  std::optional<OutputFormat> format;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> rounds;
  std::optional<ConsistencyMode> mode;
};

/// `source_name` prefixes error messages; `base_dir` resolves relative paths.
ScenarioConfig parse_config(std::string_view text, std::string_view source_name, const Overrides& overrides = {},
                            const std::filesystem::path& base_dir = {});

ScenarioConfig load_config_file(const std::filesystem::path& path, const Overrides& overrides = {});

}  // namespace univqm::cli
