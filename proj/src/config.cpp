#include "univqm/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "univqm/serialize.hpp"

namespace univqm::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct Entry {
  std::string value;
  int line = 0;
};

/// Key/value lines of one section with line context for error messages.
class Section {
 public:
  Section(std::string source, int header_line) : source_(std::move(source)), header_line_(header_line) {}

  void add(std::string key, std::string value, int line) {
    if (entries_.count(key)) {
      throw ConfigError(fmt::format("{}:{}: key '{}' given twice (first on line {})", source_, line, key,
                                    entries_.at(key).line));
    }
    entries_.emplace(std::move(key), Entry{std::move(value), line});
  }

  void restrict_to(const std::set<std::string>& allowed) const {
    for (const auto& [key, entry] : entries_) {
      if (!allowed.count(key)) throw ConfigError(fmt::format("{}:{}: unknown key '{}'", source_, entry.line, key));
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    if (has(key)) {
      throw ConfigError(fmt::format("{}:{}: key '{}': {}", source_, entries_.at(key).line, key, message));
    }
    throw ConfigError(fmt::format("{}:{}: key '{}': {}", source_, header_line_, key, message));
  }

  const std::string& text(const std::string& key) const {
    if (!has(key)) fail(key, "required key is missing");
    return entries_.at(key).value;
  }

  std::optional<std::string> optional_text(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return entries_.at(key).value;
  }

  double angle(const std::string& key) const { return parse_angle(key, text(key)); }

  std::optional<double> optional_angle(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return angle(key);
  }

  std::vector<double> angle_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(text(key))) out.push_back(parse_angle(key, item));
    if (out.empty()) fail(key, "expected a comma-separated list of angles");
    return out;
  }

  std::uint64_t count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 1) fail(key, "must be at least 1");
    return v;
  }

  std::optional<std::uint64_t> optional_count(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return count(key);
  }

  std::uint64_t integer(const std::string& key) const {
    const std::string& s = text(key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) fail(key, fmt::format("'{}' is not an unsigned 64-bit integer", s));
    return v;
  }

  std::optional<std::uint64_t> optional_integer(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return integer(key);
  }

 private:
  double parse_angle(const std::string& key, std::string_view s) const {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      fail(key, fmt::format("'{}' is not a number (angles are plain radians)", s));
    }
    if (!std::isfinite(v)) fail(key, "angle must be finite");
    return v;
  }

  std::string source_;
  int header_line_;
  std::map<std::string, Entry> entries_;
};

std::set<std::string> with_common(std::set<std::string> keys) {
  keys.insert("format");
  return keys;
}

const std::set<std::string>& scenario_keys() {
  static const std::set<std::string> keys{"variant", "layout", "cr", "ctc", "unitary", "unitary_file"};
  return keys;
}

std::set<std::string> merged(std::set<std::string> a, const std::set<std::string>& b) {
  a.insert(b.begin(), b.end());
  return a;
}

SubsystemLayout parse_inline_layout(const Section& sec) {
  std::vector<Subsystem> subs;
  for (const auto& item : split_list(sec.text("layout"))) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) sec.fail("layout", fmt::format("entry '{}' is not of the form id:dim", item));
    const std::string id(trim(std::string_view(item).substr(0, colon)));
    const auto dim_text = trim(std::string_view(item).substr(colon + 1));
    std::size_t dim = 0;
    const auto [ptr, ec] = std::from_chars(dim_text.data(), dim_text.data() + dim_text.size(), dim);
    if (ec != std::errc{} || ptr != dim_text.data() + dim_text.size() || dim < 1) {
      sec.fail("layout", fmt::format("bad dimension in '{}'", item));
    }
    subs.push_back(Subsystem::numbered(id, dim));
  }
  try {
    return SubsystemLayout(std::move(subs));
  } catch (const Error& e) {
    sec.fail("layout", e.what());
  }
}

std::pair<ScenarioSource, CtcScenario> parse_scenario(const Section& sec, const std::filesystem::path& base_dir) {
  ScenarioSource src;
  if (sec.has("variant")) {
    for (const auto* key : {"layout", "cr", "ctc", "unitary", "unitary_file"}) {
      if (sec.has(key)) sec.fail(key, "cannot be combined with 'variant'");
    }
    src.variant = sec.text("variant");
    if (src.variant == "qubit_flip") return {src, grandfather_scenario(GrandfatherVariant::qubit_flip)};
    if (src.variant == "cr_coupled") return {src, grandfather_scenario(GrandfatherVariant::cr_coupled)};
    sec.fail("variant", fmt::format("unknown variant '{}' (expected qubit_flip or cr_coupled)", src.variant));
  }
  if (sec.has("unitary") == sec.has("unitary_file")) {
    sec.fail(sec.has("unitary") ? "unitary_file" : "unitary",
             "give exactly one of 'variant', 'unitary' (inline) or 'unitary_file'");
  }
  src.cr = sec.has("cr") ? split_list(sec.text("cr")) : std::vector<std::string>{};
  src.ctc = split_list(sec.text("ctc"));

  std::optional<UnitaryOperator> unitary;
  if (sec.has("unitary")) {
    src.layout = sec.text("layout");
    SubsystemLayout layout = parse_inline_layout(sec);
    try {
      unitary.emplace(layout, parse_inline_matrix(sec.text("unitary")));
    } catch (const Error& e) {
      sec.fail("unitary", e.what());
    }
  } else {
    if (sec.has("layout")) sec.fail("layout", "the layout of a unitary_file comes from the file");
    src.unitary_file = sec.text("unitary_file");
    std::filesystem::path path(src.unitary_file);
    if (path.is_relative()) path = base_dir / path;
    std::ifstream in(path);
    if (!in) sec.fail("unitary_file", fmt::format("cannot open '{}'", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      unitary.emplace(parse_unitary(buf.str()));
    } catch (const Error& e) {
      sec.fail("unitary_file", e.what());
    }
  }
  try {
    return {src, CtcScenario(unitary->layout(), src.cr, src.ctc, *unitary)};
  } catch (const Error& e) {
    sec.fail("ctc", e.what());
  }
}

DensityMatrix parse_cr_state(const Section& sec, const CtcScenario& scenario, std::string& echo) {
  const SubsystemLayout cr = scenario.cr_layout();
  if (!sec.has("cr_state")) {
    if (!cr.empty()) sec.fail("cr_state", "required when the scenario has CR subsystems");
    echo = "maximally_mixed";
    return DensityMatrix::maximally_mixed(cr);
  }
  echo = sec.text("cr_state");
  if (echo == "maximally_mixed") return DensityMatrix::maximally_mixed(cr);
  const auto labels = split_list(echo);
  try {
    return to_density(StateVector::basis(cr, labels));
  } catch (const Error& e) {
    sec.fail("cr_state", fmt::format("{} (expected one basis label per CR subsystem or 'maximally_mixed')", e.what()));
  }
}

[[noreturn]] void flag_not_applicable(const char* flag, ExperimentKind kind) {
  throw ConfigError(fmt::format("flag {} does not apply to '{}'", flag, to_string(kind)));
}

}  // namespace

const char* to_string(ExperimentKind k) noexcept {
  switch (k) {
    case ExperimentKind::measure: return "measure";
    case ExperimentKind::signal: return "signal";
    case ExperimentKind::chsh: return "chsh";
    case ExperimentKind::ctc_solve: return "ctc-solve";
    case ExperimentKind::ctc_scan: return "ctc-scan";
  }
  return "?";
}

const char* to_string(OutputFormat f) noexcept {
  switch (f) {
    case OutputFormat::json: return "json";
    case OutputFormat::csv: return "csv";
    case OutputFormat::table: return "table";
  }
  return "?";
}

const char* to_string(SolveMethod m) noexcept {
  switch (m) {
    case SolveMethod::iterate: return "iterate";
    case SolveMethod::spectral: return "spectral";
    case SolveMethod::both: return "both";
  }
  return "?";
}

std::optional<ExperimentKind> parse_kind(std::string_view name) {
  for (auto k : {ExperimentKind::measure, ExperimentKind::signal, ExperimentKind::chsh, ExperimentKind::ctc_solve,
                 ExperimentKind::ctc_scan}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

std::optional<OutputFormat> parse_format(std::string_view name) {
  for (auto f : {OutputFormat::json, OutputFormat::csv, OutputFormat::table}) {
    if (name == to_string(f)) return f;
  }
  return std::nullopt;
}

std::optional<ConsistencyMode> parse_mode(std::string_view name) {
  if (name == "strict") return ConsistencyMode::strict;
  if (name == "ray") return ConsistencyMode::ray;
  return std::nullopt;
}

ScenarioConfig parse_config(std::string_view text, std::string_view source_name, const Overrides& overrides,
                            const std::filesystem::path& base_dir) {
  const std::string source(source_name);
  std::optional<ExperimentKind> kind;
  std::optional<Section> section;

  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(fmt::format("{}:{}: malformed section header", source, line_no));
      const auto name = trim(line.substr(1, line.size() - 2));
      if (section) throw ConfigError(fmt::format("{}:{}: only one section is allowed per file", source, line_no));
      kind = parse_kind(name);
      if (!kind) throw ConfigError(fmt::format("{}:{}: unknown experiment kind '{}'", source, line_no, name));
      section.emplace(source, line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("{}:{}: expected 'key = value'", source, line_no));
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", source, line_no));
    if (!section) throw ConfigError(fmt::format("{}:{}: key '{}' appears before any section header", source, line_no, key));
    section->add(key, value, line_no);
  }
  if (!section) throw ConfigError(fmt::format("{}: no [experiment] section found", source));

  const Section& sec = *section;
  ScenarioConfig cfg;
  cfg.kind = *kind;
  if (auto f = sec.optional_text("format")) {
    auto parsed = parse_format(*f);
    if (!parsed) sec.fail("format", fmt::format("unknown format '{}' (json, csv or table)", *f));
    cfg.format = *parsed;
  }
  if (overrides.format) cfg.format = *overrides.format;

  switch (cfg.kind) {
    case ExperimentKind::measure: {
      sec.restrict_to(with_common({"state", "rounds", "seed"}));
      MeasureParams p;
      p.preset = sec.text("state");
      if (p.preset != "up" && p.preset != "down" && p.preset != "plus" && p.preset != "bell") {
        sec.fail("state", fmt::format("unknown preset '{}' (up, down, plus or bell)", p.preset));
      }
      p.rounds = sec.optional_count("rounds");
      p.seed = sec.optional_integer("seed");
      if (overrides.rounds) p.rounds = overrides.rounds;
      if (overrides.seed) p.seed = overrides.seed;
      if (overrides.mode) flag_not_applicable("--mode", cfg.kind);
      if (p.rounds && !p.seed) sec.fail("seed", "sampling rounds require an explicit seed");
      cfg.params = p;
      break;
    }
    case ExperimentKind::signal: {
      sec.restrict_to(with_common({"theta_a", "theta_b", "rounds", "seed", "audit_thetas", "theta_a2", "theta_b2"}));
      SignalParams p;
      p.theta_a = sec.angle("theta_a");
      p.theta_b = sec.angle("theta_b");
      if (overrides.mode) flag_not_applicable("--mode", cfg.kind);
      p.rounds = overrides.rounds ? *overrides.rounds : sec.count("rounds");
      if (p.rounds < 1) throw ConfigError("--rounds must be at least 1");
      if (overrides.seed) {
        p.seed = *overrides.seed;
      } else {
        if (!sec.has("seed")) sec.fail("seed", "required key is missing (there is no default seed)");
        p.seed = sec.integer("seed");
      }
      p.audit_thetas = sec.has("audit_thetas") ? sec.angle_list("audit_thetas") : std::vector<double>{};
      p.theta_a2 = sec.optional_angle("theta_a2");
      p.theta_b2 = sec.optional_angle("theta_b2");
      if (p.theta_a2.has_value() != p.theta_b2.has_value()) {
        sec.fail(p.theta_a2 ? "theta_b2" : "theta_a2", "theta_a2 and theta_b2 must be given together");
      }
      cfg.params = p;
      break;
    }
    case ExperimentKind::chsh: {
      sec.restrict_to(with_common({"a1", "a2", "b1", "b2", "grid_step"}));
      if (overrides.seed) flag_not_applicable("--seed", cfg.kind);
      if (overrides.rounds) flag_not_applicable("--rounds", cfg.kind);
      if (overrides.mode) flag_not_applicable("--mode", cfg.kind);
      ChshParams p;
      const bool any_angle = sec.has("a1") || sec.has("a2") || sec.has("b1") || sec.has("b2");
      if (any_angle == sec.has("grid_step")) {
        sec.fail("grid_step", "give either all of a1, a2, b1, b2 or grid_step");
      }
      if (any_angle) {
        p.angles = std::array<double, 4>{sec.angle("a1"), sec.angle("a2"), sec.angle("b1"), sec.angle("b2")};
      } else {
        p.grid_step = sec.angle("grid_step");
        if (*p.grid_step <= 0.0) sec.fail("grid_step", "must be positive");
        if (2.0 * 3.141592653589793 / *p.grid_step > 20000.0) sec.fail("grid_step", "too fine (more than 20000 points)");
      }
      cfg.params = p;
      break;
    }
    case ExperimentKind::ctc_solve: {
      sec.restrict_to(merged(with_common({"cr_state", "mode", "method", "max_iterations"}), scenario_keys()));
      if (overrides.seed) flag_not_applicable("--seed", cfg.kind);
      if (overrides.rounds) flag_not_applicable("--rounds", cfg.kind);
      CtcSolveParams p;
      auto [src, scenario] = parse_scenario(sec, base_dir);
      p.source = std::move(src);
      p.cr_input.emplace(parse_cr_state(sec, scenario, p.cr_state));
      p.scenario.emplace(std::move(scenario));
      if (auto m = sec.optional_text("mode")) {
        auto parsed = parse_mode(*m);
        if (!parsed) sec.fail("mode", fmt::format("unknown mode '{}' (strict or ray)", *m));
        p.mode = *parsed;
      }
      if (overrides.mode) p.mode = *overrides.mode;
      if (auto m = sec.optional_text("method")) {
        if (*m == "iterate") p.method = SolveMethod::iterate;
        else if (*m == "spectral") p.method = SolveMethod::spectral;
        else if (*m == "both") p.method = SolveMethod::both;
        else sec.fail("method", fmt::format("unknown method '{}' (iterate, spectral or both)", *m));
      }
      if (sec.has("max_iterations")) p.max_iterations = sec.count("max_iterations");
      cfg.params = std::move(p);
      break;
    }
    case ExperimentKind::ctc_scan: {
      sec.restrict_to(merged(with_common({"samples", "seed", "mode"}), scenario_keys()));
      CtcScanParams p;
      auto [src, scenario] = parse_scenario(sec, base_dir);
      p.source = std::move(src);
      p.scenario.emplace(std::move(scenario));
      p.samples = overrides.rounds ? *overrides.rounds : sec.count("samples");
      if (p.samples < 1) throw ConfigError("--rounds must be at least 1");
      if (overrides.seed) {
        p.seed = *overrides.seed;
      } else {
        if (!sec.has("seed")) sec.fail("seed", "required key is missing (there is no default seed)");
        p.seed = sec.integer("seed");
      }
      if (auto m = sec.optional_text("mode")) {
        auto parsed = parse_mode(*m);
        if (!parsed) sec.fail("mode", fmt::format("unknown mode '{}' (strict or ray)", *m));
        p.mode = *parsed;
      }
      if (overrides.mode) p.mode = *overrides.mode;
      cfg.params = std::move(p);
      break;
    }
  }
  return cfg;
}

ScenarioConfig load_config_file(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string(), overrides, path.parent_path());
}

}  // namespace univqm::cli
