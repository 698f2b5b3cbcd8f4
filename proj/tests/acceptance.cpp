// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oracles.hpp"
#include "support.hpp"
#include "univqm/ctc.hpp"
#include "univqm/measurement.hpp"
#include "univqm/random.hpp"
#include "univqm/suggestion.hpp"

using namespace univqm;

namespace {

constexpr double kPi = std::numbers::pi;
const double kTsirelson = 2.0 * std::numbers::sqrt2;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

// --- 1 ---------------------------------------------------------------------

Outcome premeasurement_presets() {
  Outcome o;
  const Subsystem particle = spin_subsystem(ids::particle);
  const Subsystem brain = make_apparatus(ids::brain, particle);
  const auto scheme = PointerScheme::standard(particle, ids::brain);
  const SubsystemLayout single({particle, brain});
  const SubsystemLayout pair({particle, spin_subsystem(ids::distant), brain});

  auto branch_check = [&](const StateVector& in, const std::vector<std::string>& pointers,
                          const std::vector<std::vector<std::string>>& conditionals, double weight, const char* name) {
    const auto branches = branch_decomposition(premeasure(in, scheme), ids::brain);
    if (branches.size() != pointers.size()) {
      o.require(false, fmt::format("{}: {} branches", name, branches.size()));
      return;
    }
    for (std::size_t k = 0; k < branches.size(); ++k) {
      const auto& b = branches[k];
      o.require(b.pointer_label() == pointers[k], fmt::format("{}: pointer {}", name, b.pointer_label()));
      o.require(std::abs(b.weight - weight) <= 1e-10, fmt::format("{}: weight {:.12f}", name, b.weight));
      const auto& c = b.conditional_state;
      const double amp = std::abs(c.amplitudes()(static_cast<Eigen::Index>(c.layout().basis_index(conditionals[k]))));
      o.require(std::abs(amp - 1.0) <= 1e-12, fmt::format("{}: conditional state of branch {}", name, k));
    }
  };

  branch_check(StateVector::basis(single, {"up", "ready"}), {"observes_up"}, {{"up"}}, 1.0, "up");
  branch_check(StateVector::basis(single, {"down", "ready"}), {"observes_down"}, {{"down"}}, 1.0, "down");
  CVector plus = CVector::Zero(6);
  plus(0) = plus(3) = 1.0;
  branch_check(StateVector(single, plus), {"observes_up", "observes_down"}, {{"up"}, {"down"}}, 0.5, "plus");
  CVector bell = CVector::Zero(12);
  bell(static_cast<Eigen::Index>(pair.basis_index(std::vector<std::string>{"up", "down", "ready"}))) = 1.0;
  bell(static_cast<Eigen::Index>(pair.basis_index(std::vector<std::string>{"down", "up", "ready"}))) = 1.0;
  branch_check(StateVector(pair, bell), {"observes_up", "observes_down"}, {{"up", "down"}, {"down", "up"}}, 0.5,
               "bell");
  if (o.pass) o.detail = "up/down: 1 branch weight 1; plus/bell: 2 branches weight 0.5";
  return o;
}

// --- 2 ---------------------------------------------------------------------

Outcome spectator_invariance() {
  Outcome o;
  Rng rng(derive_seed(2, 0));
  const auto layout = signaling_layout();
  const SubsystemLayout pair_layout({spin_subsystem(ids::particle), spin_subsystem(ids::distant)});
  const Subsystem brain_app = make_apparatus(ids::brain, spin_subsystem(ids::particle));
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto pair = haar_state(pair_layout, rng);
    // Alice's suggestion on the full experiment layout.
    const auto initial = signaling_initial_state(pair);
    DecisionScheme scheme;
    scheme.direction = Direction(2.0 * kPi * rng.uniform());
    const auto after = apply_unitary(embed_operator(build_suggestion_unitary(scheme, layout), layout), initial);
    worst = std::max(worst, max_abs_deviation(partial_trace(to_density(initial), {ids::distant}).matrix(),
                                              partial_trace(to_density(after), {ids::distant}).matrix()));
    // Plain pre-measurement of the particle with the distant spin as spectator.
    const auto s = tensor_product(pair, StateVector::basis(SubsystemLayout({brain_app}), {"ready"}));
    const auto measured = premeasure(s, PointerScheme::standard(spin_subsystem(ids::particle), ids::brain));
    worst = std::max(worst, max_abs_deviation(partial_trace(to_density(s), {ids::distant}).matrix(),
                                              partial_trace(to_density(measured), {ids::distant}).matrix()));
  }
  o.require(worst <= 1e-10, fmt::format("max deviation {:.3e}", worst));
  if (o.pass) o.detail = fmt::format("max deviation {:.3e} over 100 configurations", worst);
  return o;
}

// --- 3 ---------------------------------------------------------------------

Outcome equal_angle_sessions() {
  Outcome o;
  // Equal settings along the pair's own axis (theta = 0 and theta = pi).
  for (double theta : {0.0, kPi}) {
    for (std::uint64_t seed : {1ULL, 42ULL}) {
      CorrelationTally tally;
      for (const auto& r : run_session_records(10000, Direction(theta), Direction(theta), seed)) {
        tally.record(r.alice_decision, r.bob_outcome);
      }
      o.require(tally.total() == 10000, "round count");
      o.require(tally.n_uu == 0 && tally.n_dd == 0,
                fmt::format("theta {} seed {}: n_uu={} n_dd={}", theta, seed, tally.n_uu, tally.n_dd));
      o.require(tally.correlator() == -1.0, fmt::format("theta {} seed {}: E={}", theta, seed, tally.correlator()));
    }
  }
  if (o.pass) o.detail = "theta in {0, pi}, 2 seeds x 10^4 rounds: n_uu = n_dd = 0, E = -1";
  return o;
}

// --- 4 ---------------------------------------------------------------------

Outcome bell_violation() {
  Outcome o;
  const auto r = chsh_grid_search(kPi / 720.0);
  o.require(std::abs(r.max_abs_s - kTsirelson) <= 1e-3, fmt::format("grid max |S| = {:.12f}", r.max_abs_s));
  Rng rng(derive_seed(4, 0));
  const oracle::Vec bell{0.0, std::sqrt(0.5), std::sqrt(0.5), 0.0};
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const double a = 2.0 * kPi * rng.uniform();
    const double b = 2.0 * kPi * rng.uniform();
    worst = std::max(worst, std::abs(correlator(Direction(a), Direction(b)) - oracle::two_qubit_correlator(bell, a, b)));
  }
  o.require(worst <= 1e-10, fmt::format("oracle deviation {:.3e}", worst));
  o.detail = fmt::format("max |S| = {:.12f} on {} points/axis, oracle deviation {:.3e}", r.max_abs_s, r.grid_points,
                         worst) + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// --- 5 ---------------------------------------------------------------------

Outcome no_signaling() {
  Outcome o;
  const std::vector<Direction> alice{Direction(0.0), Direction(kPi / 4.0), Direction(kPi / 2.0), Direction(2.2)};
  double worst = 0.0;
  for (double b : {0.0, 0.5, kPi / 3.0, 2.0, 4.0}) worst = std::max(worst, no_signaling_audit(alice, Direction(b)).max_tv_distance);
  o.require(worst <= 1e-10, fmt::format("max TV distance {:.3e}", worst));
  if (o.pass) o.detail = fmt::format("4 Alice settings x 5 Bob settings, max TV distance {:.3e}", worst);
  return o;
}

// --- 6 ---------------------------------------------------------------------

Outcome strict_constraint() {
  Outcome o;
  const auto scenario = grandfather_scenario(GrandfatherVariant::qubit_flip);
  const auto strict = linear_consistency_basis(scenario, ConsistencyMode::strict);
  o.require(strict.dimension() == 1, fmt::format("strict dimension {}", strict.dimension()));
  if (strict.dimension() != 1) return o;
  const CVector v = strict.eigenspaces[0].basis.col(0);
  const double basis_err = std::max(std::abs(v(0) - std::sqrt(0.5)), std::abs(v(1) - std::sqrt(0.5)));
  o.require(basis_err <= 1e-10, fmt::format("basis error {:.3e}", basis_err));
  StateVector s(scenario.layout(), v);
  for (int i = 0; i < 100; ++i) s = apply_unitary(scenario.loop_unitary(), s);
  const double round_trip = (s.amplitudes() - v).norm();
  o.require(round_trip <= 1e-7, fmt::format("100-traversal residual {:.3e}", round_trip));
  if (o.pass) o.detail = fmt::format("dim 1, basis error {:.3e}, 100-traversal residual {:.3e}", basis_err, round_trip);
  return o;
}

// --- 7 ---------------------------------------------------------------------

Outcome linearity() {
  Outcome o;
  Rng rng(derive_seed(7, 0));
  const SubsystemLayout layout({Subsystem::numbered("cr", 2), Subsystem::numbered("ctc", 2)});
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    // Loop unitary with a random-dimensional (1..3) eigenvalue-1 subspace.
    const int k = 1 + t % 3;
    CVector phases(4);
    for (int i = 0; i < 4; ++i) phases(i) = i < k ? Complex(1.0) : std::polar(1.0, 0.2 + 5.8 * rng.uniform());
    const CMatrix w = random_unitary_matrix(4, rng);
    const CtcScenario scenario(layout, {"cr"}, {"ctc"}, UnitaryOperator(layout, w * phases.asDiagonal() * w.adjoint()));
    const auto strict = linear_consistency_basis(scenario, ConsistencyMode::strict);
    if (strict.dimension() != static_cast<std::size_t>(k)) {
      o.require(false, fmt::format("trial {}: strict dimension {} != {}", t, strict.dimension(), k));
      continue;
    }
    const CMatrix& basis = strict.eigenspaces[0].basis;
    CVector c(k);
    for (int i = 0; i < k; ++i) c(i) = rng.complex_normal();
    const auto check = is_consistent_initial_state(scenario, StateVector(layout, basis * c), ConsistencyMode::strict);
    worst = std::max(worst, check.residual);
  }
  o.require(worst <= 1e-8, fmt::format("max residual {:.3e}", worst));
  if (o.pass) o.detail = fmt::format("100 combinations, max residual {:.3e}", worst);
  return o;
}

// --- 8 ---------------------------------------------------------------------

Outcome scarcity() {
  Outcome o;
  Rng rng(derive_seed(8, 0));
  const SubsystemLayout layout({Subsystem::numbered("cr", 2), Subsystem::numbered("ctc", 2)});
  int zero = 0;
  for (int t = 0; t < 100; ++t) {
    const CtcScenario scenario(layout, {"cr"}, {"ctc"}, haar_unitary(layout, rng));
    if (linear_consistency_basis(scenario, ConsistencyMode::strict).dimension() == 0) ++zero;
  }
  o.require(zero >= 99, fmt::format("strict dimension 0 in {}/100", zero));
  const auto stats = admissible_fraction(grandfather_scenario(GrandfatherVariant::qubit_flip), 10000,
                                         ConsistencyMode::strict, 8);
  o.require(stats.fraction == 0.0, fmt::format("qubit_flip fraction {}", stats.fraction));
  o.require(stats.min_residual > 1e-3, fmt::format("min residual {:.3e}", stats.min_residual));
  if (o.pass) {
    o.detail = fmt::format("strict dim 0 in {}/100 Haar unitaries; qubit_flip fraction 0 over 10^4, min residual {:.3e}",
                           zero, stats.min_residual);
  }
  return o;
}

// --- 9 ---------------------------------------------------------------------

Outcome deutsch_comparison() {
  Outcome o;
  const auto flip = grandfather_scenario(GrandfatherVariant::qubit_flip);
  for (auto method : {DeutschMethod::iterate, DeutschMethod::spectral}) {
    const auto sol = deutsch_fixed_point(flip, DensityMatrix::maximally_mixed(flip.cr_layout()), method);
    const double err = max_abs_deviation(sol.rho_ctc.matrix(), 0.5 * CMatrix::Identity(2, 2));
    o.require(err <= 1e-10 && sol.residual <= 1e-10,
              fmt::format("grandfather {}: error {:.3e}, residual {:.3e}", to_string(method), err, sol.residual));
  }
  Rng rng(derive_seed(9, 0));
  const SubsystemLayout layout({Subsystem::numbered("cr", 2), Subsystem::numbered("ctc", 2)});
  const SubsystemLayout cr_layout({Subsystem::numbered("cr", 2)});
  double worst_residual = 0.0, worst_gap = 0.0;
  int unique = 0;
  for (int t = 0; t < 100; ++t) {
    const CtcScenario scenario(layout, {"cr"}, {"ctc"}, haar_unitary(layout, rng));
    const auto rho_cr = to_density(haar_state(cr_layout, rng));
    try {
      const auto a = deutsch_fixed_point(scenario, rho_cr, DeutschMethod::iterate);
      const auto b = deutsch_fixed_point(scenario, rho_cr, DeutschMethod::spectral);
      worst_residual = std::max({worst_residual, a.residual, b.residual});
      if (b.fixed_space_dimension == 1) {
        ++unique;
        worst_gap = std::max(worst_gap, max_abs_deviation(a.rho_ctc.matrix(), b.rho_ctc.matrix()));
      }
    } catch (const SolverError& e) {
      o.require(false, fmt::format("trial {}: {}", t, e.what()));
    }
  }
  o.require(worst_residual <= 1e-8, fmt::format("max residual {:.3e}", worst_residual));
  o.require(worst_gap <= 1e-6, fmt::format("iterate/spectral gap {:.3e}", worst_gap));
  if (o.pass) {
    o.detail = fmt::format("grandfather I/2; 100 random scenarios max residual {:.3e}; {} unique, max gap {:.3e}",
                           worst_residual, unique, worst_gap);
  }
  return o;
}

// --- 10 --------------------------------------------------------------------

std::pair<int, std::string> capture(const std::string& cmd) {
  std::string out;
  FILE* pipe = popen((cmd + " 2>/dev/null").c_str(), "r");
  if (pipe == nullptr) return {-1, ""};
  std::array<char, 4096> buf;
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

Outcome determinism() {
  Outcome o;
  namespace fs = std::filesystem;
  int invocations = 0;
  std::vector<fs::path> configs;
  for (const auto& entry : fs::directory_iterator(UNIVQM_CONFIG_DIR)) {
    if (entry.path().extension() == ".cfg") configs.push_back(entry.path());
  }
  std::sort(configs.begin(), configs.end());
  for (const auto& cfg : configs) {
    std::string kind;
    {
      std::FILE* f = std::fopen(cfg.c_str(), "r");
      char line[256];
      while (f != nullptr && std::fgets(line, sizeof line, f) != nullptr) {
        std::string s(line);
        if (!s.empty() && s[0] == '[') {
          kind = s.substr(1, s.find(']') - 1);
          break;
        }
      }
      if (f != nullptr) std::fclose(f);
    }
    for (const char* format : {"json", "csv", "table"}) {
      const std::string cmd = fmt::format("{} {} --config {} --format {}", UNIVQM_CLI_PATH, kind, cfg.string(), format);
      const auto a = capture(cmd);
      const auto b = capture(cmd);
      ++invocations;
      o.require(a.first == 0 && b.first == 0, fmt::format("{} exited {}", cmd, a.first));
      o.require(a.second == b.second && !a.second.empty(), fmt::format("{} output differs", cmd));
    }
  }
  // Monte Carlo with fresh seeds versus exact correlators.
  Rng rng(derive_seed(10, 0));
  const std::uint64_t rounds = 4000;
  double worst_z = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Direction a(2.0 * kPi * rng.uniform()), b(2.0 * kPi * rng.uniform());
    const double e = correlator(a, b);
    const auto tally = run_session(rounds, a, b, derive_seed(1010, static_cast<std::uint64_t>(t)));
    const double sigma = std::sqrt((1.0 - e * e) / static_cast<double>(rounds));
    const double diff = std::abs(tally.correlator() - e);
    const double z = sigma > 0.0 ? diff / sigma : (diff == 0.0 ? 0.0 : INFINITY);
    worst_z = std::max(worst_z, z);
  }
  o.require(worst_z <= 4.0, fmt::format("Monte Carlo worst deviation {:.2f} sigma", worst_z));
  if (o.pass) {
    o.detail = fmt::format("{} invocations byte-identical on rerun; 20 settings within {:.2f} sigma", invocations,
                           worst_z);
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double time_limit;  // seconds, 0 = none
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "pre-measurement branch structure", 1.0, premeasurement_presets},
      {2, "spectator invariance", 10.0, spectator_invariance},
      {3, "equal-angle signaling sessions", 30.0, equal_angle_sessions},
      {4, "Bell violation and correlator oracle", 60.0, bell_violation},
      {5, "no-signaling audit", 0.0, no_signaling},
      {6, "strict CTC constraint", 0.0, strict_constraint},
      {7, "linearity of the constraint", 0.0, linearity},
      {8, "scarcity of admissible states", 0.0, scarcity},
      {9, "Deutsch fixed points", 0.0, deutsch_comparison},
      {10, "determinism and Monte Carlo agreement", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0.0 && seconds >= c.time_limit) {
      o.pass = false;
      o.detail += fmt::format("; runtime {:.2f} s exceeds {:.0f} s", seconds, c.time_limit);
    }
    if (!o.pass) ++failed;
    fmt::print("{} criterion {:>2} {}: {} ({:.2f} s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail, seconds);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
