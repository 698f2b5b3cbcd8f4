#include "univqm/commands.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

#include "univqm/measurement.hpp"
#include "univqm/random.hpp"
#include "univqm/suggestion.hpp"

namespace univqm::cli {

namespace {

using Json = nlohmann::ordered_json;

constexpr double kListThreshold = 1e-12;
const double kTsirelson = 2.0 * std::numbers::sqrt2;

std::string num(double v) { return fmt::format("{:.17g}", v); }

Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Json state_terms(const StateVector& s) {
  Json terms = Json::array();
  for (std::size_t i = 0; i < s.dim(); ++i) {
    if (std::abs(s[i]) <= kListThreshold) continue;
    terms.push_back(Json{{"basis", s.layout().describe_index(i)}, {"amplitude", complex_json(s[i])}});
  }
  return terms;
}

Json matrix_json(const CMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json ids_json(const SubsystemLayout& layout) {
  Json out = Json::array();
  for (const auto& id : layout.ids()) out.push_back(id);
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string scalar_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_null()) return "null";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  return num(v.get<double>());
}

void flatten(const Json& v, const std::string& path, std::vector<std::pair<std::string, std::string>>& out) {
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it) flatten(it.value(), path.empty() ? it.key() : path + "." + it.key(), out);
  } else if (v.is_array()) {
    if (v.empty()) out.emplace_back(path, "[]");
    for (std::size_t i = 0; i < v.size(); ++i) flatten(v[i], fmt::format("{}[{}]", path, i), out);
  } else {
    out.emplace_back(path, scalar_text(v));
  }
}

std::string render_flat_csv(const Json& report) {
  std::vector<std::pair<std::string, std::string>> rows;
  flatten(report, "", rows);
  std::string out = "field,value\n";
  for (const auto& [k, v] : rows) out += csv_field(k) + "," + csv_field(v) + "\n";
  return out;
}

std::string render_flat_table(const Json& report) {
  std::vector<std::pair<std::string, std::string>> rows;
  flatten(report, "", rows);
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.first.size());
  std::string out;
  for (const auto& [k, v] : rows) out += fmt::format("{:<{}}  {}\n", k, width, v);
  return out;
}

std::string render(const Json& report, OutputFormat format) {
  switch (format) {
    case OutputFormat::json: return report.dump(2) + "\n";
    case OutputFormat::csv: return render_flat_csv(report);
    case OutputFormat::table: return render_flat_table(report);
  }
  return {};
}

// ---------------------------------------------------------------------------
// measure

struct MeasureSetup {
  StateVector initial;
  PointerScheme scheme;
};

MeasureSetup measure_setup(const std::string& preset) {
  const Subsystem particle = spin_subsystem(ids::particle);
  const Subsystem brain = make_apparatus(ids::brain, particle);
  const PointerScheme scheme = PointerScheme::standard(particle, ids::brain);
  if (preset == "bell") {
    const SubsystemLayout layout(std::vector<Subsystem>{particle, spin_subsystem(ids::distant), brain});
    CVector amps = CVector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
    amps(static_cast<Eigen::Index>(layout.basis_index(std::vector<std::string>{"up", "down", "ready"}))) = 1.0;
    amps(static_cast<Eigen::Index>(layout.basis_index(std::vector<std::string>{"down", "up", "ready"}))) = 1.0;
    return {StateVector(layout, amps), scheme};
  }
  const SubsystemLayout layout(std::vector<Subsystem>{particle, brain});
  if (preset == "plus") {
    CVector amps = CVector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
    amps(static_cast<Eigen::Index>(layout.basis_index(std::vector<std::string>{"up", "ready"}))) = 1.0;
    amps(static_cast<Eigen::Index>(layout.basis_index(std::vector<std::string>{"down", "ready"}))) = 1.0;
    return {StateVector(layout, amps), scheme};
  }
  return {StateVector::basis(layout, {preset, "ready"}), scheme};
}

}  // namespace

CommandOutput cmd_measure(const ScenarioConfig& config) {
  const auto& p = std::get<MeasureParams>(config.params);
  const auto setup = measure_setup(p.preset);
  const StateVector final_state = premeasure(setup.initial, setup.scheme);
  const auto branches = branch_decomposition(final_state, ids::brain);

  Json report;
  report["kind"] = "measure";
  report["config"] = Json{{"state", p.preset},
                          {"rounds", p.rounds ? Json(*p.rounds) : Json(nullptr)},
                          {"seed", p.seed ? Json(*p.seed) : Json(nullptr)}};
  report["tolerances"] = Json{{"normalization", kTolerance}, {"branch_prune", kBranchPruneThreshold}};
  report["layout"] = ids_json(final_state.layout());
  report["normalization_factor"] = setup.initial.normalization();
  report["initial_state"] = state_terms(setup.initial);
  report["final_state"] = state_terms(final_state);
  Json jb = Json::array();
  double total = 0.0;
  for (const auto& b : branches) {
    total += b.weight;
    jb.push_back(Json{{"pointer", b.pointer_label()},
                      {"weight", b.weight},
                      {"amplitude", complex_json(b.amplitude)},
                      {"conditional_layout", ids_json(b.conditional_state.layout())},
                      {"conditional_state", state_terms(b.conditional_state)}});
  }
  report["branches"] = jb;
  report["weight_sum"] = total;

  std::map<std::string, std::uint64_t> counts;
  if (p.rounds) {
    for (const auto& b : branches) counts[b.pointer_label()] = 0;
    for (std::uint64_t i = 0; i < *p.rounds; ++i) {
      ++counts[branches[select_branch(branches, derive_seed(*p.seed, i))].pointer_label()];
    }
    Json jc;
    for (const auto& b : branches) jc[b.pointer_label()] = counts[b.pointer_label()];
    report["sampling"] = Json{{"rounds", *p.rounds}, {"seed", *p.seed}, {"counts", jc}};
  }

  if (config.format == OutputFormat::csv) {
    std::string out = "pointer,weight,count\n";
    for (const auto& b : branches) {
      out += fmt::format("{},{},{}\n", csv_field(b.pointer_label()), num(b.weight),
                         p.rounds ? std::to_string(counts[b.pointer_label()]) : std::string{});
    }
    return {out, kExitOk};
  }
  if (config.format == OutputFormat::table) {
    std::string out = fmt::format("measure state={}  layout={}\n", p.preset, report["layout"].dump());
    out += fmt::format("{:<16} {:>22} {:>10}  conditional\n", "pointer", "weight", "count");
    for (const auto& b : branches) {
      std::string cond;
      for (const auto& t : state_terms(b.conditional_state)) {
        if (!cond.empty()) cond += " + ";
        cond += fmt::format("({})|{}>", num(t["amplitude"][0].get<double>()), t["basis"].get<std::string>());
      }
      out += fmt::format("{:<16} {:>22} {:>10}  {}\n", b.pointer_label(), num(b.weight),
                         p.rounds ? std::to_string(counts[b.pointer_label()]) : std::string("-"), cond);
    }
    out += fmt::format("weight sum {}\n", num(total));
    return {out, kExitOk};
  }
  return {render(report, config.format), kExitOk};
}

CommandOutput cmd_signal(const ScenarioConfig& config) {
  const auto& p = std::get<SignalParams>(config.params);
  const Direction alice(p.theta_a);
  const Direction bob(p.theta_b);
  const auto records = run_session_records(p.rounds, alice, bob, p.seed);

  if (config.format == OutputFormat::csv) {
    std::string out = "round,theta_a,theta_b,alice_decision,bob_outcome,seed\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      out += fmt::format("{},{},{},{},{},{}\n", i, num(r.alice_direction.theta()), num(r.bob_direction.theta()),
                         to_string(r.alice_decision), to_string(r.bob_outcome), r.seed);
    }
    return {out, kExitOk};
  }

  CorrelationTally tally;
  for (const auto& r : records) tally.record(r.alice_decision, r.bob_outcome);
  const JointDistribution exact = joint_distribution(alice, bob);
  const double e = tally.correlator();
  const double n = static_cast<double>(tally.total());

  std::vector<Direction> audit_dirs{alice};
  const std::vector<double> default_audit{0.0, std::numbers::pi / 4.0, std::numbers::pi / 2.0};
  for (double t : p.audit_thetas.empty() ? default_audit : p.audit_thetas) {
    if (t != p.theta_a) audit_dirs.emplace_back(t);
  }
  const auto audit = no_signaling_audit(audit_dirs, bob);

  Json report;
  report["kind"] = "signal";
  Json cfg{{"theta_a", p.theta_a}, {"theta_b", p.theta_b}, {"rounds", p.rounds}, {"seed", p.seed}};
  Json audit_cfg = Json::array();
  for (double t : p.audit_thetas) audit_cfg.push_back(t);
  cfg["audit_thetas"] = audit_cfg;
  cfg["theta_a2"] = p.theta_a2 ? Json(*p.theta_a2) : Json(nullptr);
  cfg["theta_b2"] = p.theta_b2 ? Json(*p.theta_b2) : Json(nullptr);
  report["config"] = cfg;
  report["tolerances"] = Json{{"no_signaling", kTolerance}, {"branch_prune", kBranchPruneThreshold}};
  report["convention"] = "same = (decides_up, bob up) or (decides_down, bob down); E = p_same - p_diff";
  report["seed_derivation"] = "round i uses output i+1 of SplitMix64 seeded with the master seed";
  report["tally"] = Json{{"n_uu", tally.n_uu},
                         {"n_ud", tally.n_ud},
                         {"n_du", tally.n_du},
                         {"n_dd", tally.n_dd},
                         {"n_total", tally.total()}};
  report["E_estimate"] = e;
  report["E_standard_error"] = std::sqrt(std::max(0.0, 1.0 - e * e) / n);
  report["E_exact"] = exact.correlator();
  report["joint_exact"] = Json{{"uu", exact.p[0][0]}, {"ud", exact.p[0][1]}, {"du", exact.p[1][0]}, {"dd", exact.p[1][1]}};
  Json thetas = Json::array();
  Json marginals = Json::array();
  for (std::size_t i = 0; i < audit.alice_directions.size(); ++i) {
    thetas.push_back(audit.alice_directions[i].theta());
    marginals.push_back(Json::array({audit.bob_marginals[i][0], audit.bob_marginals[i][1]}));
  }
  report["no_signaling"] = Json{{"bob_theta", p.theta_b},
                                {"alice_thetas", thetas},
                                {"bob_marginals", marginals},
                                {"max_tv_distance", audit.max_tv_distance},
                                {"pass", audit.max_tv_distance <= kTolerance}};
  if (p.theta_a2) {
    const double s = chsh_value(alice, Direction(*p.theta_a2), bob, Direction(*p.theta_b2));
    report["chsh"] = Json{{"a1", p.theta_a}, {"a2", *p.theta_a2}, {"b1", p.theta_b}, {"b2", *p.theta_b2},
                          {"S", s}, {"violates_bell", std::abs(s) > 2.0}};
  } else {
    report["chsh"] = nullptr;
  }

  if (config.format == OutputFormat::table) {
    std::string out = fmt::format("signal theta_a={} theta_b={} rounds={} seed={}\n", num(p.theta_a), num(p.theta_b),
                                  p.rounds, p.seed);
    out += "               bob up      bob down\n";
    out += fmt::format("alice up   {:>10} {:>13}\n", tally.n_uu, tally.n_ud);
    out += fmt::format("alice down {:>10} {:>13}\n", tally.n_du, tally.n_dd);
    out += fmt::format("E estimate {}  (exact {})\n", num(e), num(exact.correlator()));
    out += fmt::format("no-signaling max TV distance {}\n", num(audit.max_tv_distance));
    if (p.theta_a2) out += fmt::format("CHSH S {}\n", num(report["chsh"]["S"].get<double>()));
    return {out, kExitOk};
  }
  return {render(report, config.format), kExitOk};
}

CommandOutput cmd_chsh(const ScenarioConfig& config) {
  const auto& p = std::get<ChshParams>(config.params);
  Json report;
  report["kind"] = "chsh";
  report["tolerances"] = Json{{"tsirelson_slack", 1e-9}};
  report["classical_bound"] = 2.0;
  report["tsirelson_bound"] = kTsirelson;
  if (p.angles) {
    const auto [a1, a2, b1, b2] = *p.angles;
    report["config"] = Json{{"a1", a1}, {"a2", a2}, {"b1", b1}, {"b2", b2}, {"grid_step", nullptr}};
    const double e11 = correlator(Direction(a1), Direction(b1));
    const double e12 = correlator(Direction(a1), Direction(b2));
    const double e21 = correlator(Direction(a2), Direction(b1));
    const double e22 = correlator(Direction(a2), Direction(b2));
    const double s = e11 + e12 + e21 - e22;
    report["correlators"] = Json{{"E_a1_b1", e11}, {"E_a1_b2", e12}, {"E_a2_b1", e21}, {"E_a2_b2", e22}};
    report["S"] = s;
    report["abs_S"] = std::abs(s);
    report["violates_bell"] = std::abs(s) > 2.0;
    report["within_tsirelson"] = std::abs(s) <= kTsirelson + 1e-9;
  } else {
    report["config"] = Json{{"a1", nullptr}, {"a2", nullptr}, {"b1", nullptr}, {"b2", nullptr}, {"grid_step", *p.grid_step}};
    const auto r = chsh_grid_search(*p.grid_step);
    report["grid_points"] = r.grid_points;
    report["max_abs_S"] = r.max_abs_s;
    report["S"] = r.s;
    report["argmax"] = Json{{"a1", r.a1.theta()}, {"a2", r.a2.theta()}, {"b1", r.b1.theta()}, {"b2", r.b2.theta()}};
    report["violates_bell"] = r.max_abs_s > 2.0;
    report["within_tsirelson"] = r.max_abs_s <= kTsirelson + 1e-9;
  }
  return {render(report, config.format), kExitOk};
}

namespace {

Json scenario_json(const ScenarioSource& src, const CtcScenario& scenario) {
  Json j;
  j["variant"] = src.variant.empty() ? Json(nullptr) : Json(src.variant);
  j["layout"] = src.layout.empty() ? Json(nullptr) : Json(src.layout);
  j["unitary_file"] = src.unitary_file.empty() ? Json(nullptr) : Json(src.unitary_file);
  Json cr = Json::array();
  for (const auto& id : scenario.cr_ids()) cr.push_back(id);
  Json ctc = Json::array();
  for (const auto& id : scenario.ctc_ids()) ctc.push_back(id);
  j["cr"] = cr;
  j["ctc"] = ctc;
  j["loop_unitary"] = matrix_json(scenario.loop_unitary().matrix());
  return j;
}

Json subspace_json(const ConsistencySubspace& sub) {
  Json spaces = Json::array();
  for (const auto& e : sub.eigenspaces) {
    Json basis = Json::array();
    for (Eigen::Index c = 0; c < e.basis.cols(); ++c) {
      Json v = Json::array();
      for (Eigen::Index r = 0; r < e.basis.rows(); ++r) v.push_back(complex_json(e.basis(r, c)));
      basis.push_back(std::move(v));
    }
    spaces.push_back(Json{{"phase", e.phase}, {"dimension", e.dimension()}, {"max_residual", e.max_residual},
                          {"basis", basis}});
  }
  return Json{{"dimension", sub.dimension()}, {"eigenspaces", spaces}};
}

}  // namespace

CommandOutput cmd_ctc(const ScenarioConfig& config) {
  Json report;
  if (config.kind == ExperimentKind::ctc_scan) {
    const auto& p = std::get<CtcScanParams>(config.params);
    report["kind"] = "ctc-scan";
    Json cfg{{"scenario", scenario_json(p.source, *p.scenario)}, {"samples", p.samples}, {"seed", p.seed},
             {"mode", to_string(p.mode)}};
    report["config"] = cfg;
    report["tolerances"] = Json{{"consistency", kConsistencyTolerance}};
    report["sampling"] = "Haar-random pure states; sample i uses output i+1 of SplitMix64 seeded with the seed";
    const auto stats = admissible_fraction(*p.scenario, p.samples, p.mode, p.seed);
    report["stats"] = Json{{"n_samples", stats.n_samples},       {"n_consistent", stats.n_consistent},
                           {"fraction", stats.fraction},         {"min_residual", stats.min_residual},
                           {"median_residual", stats.median_residual}, {"max_residual", stats.max_residual}};
    return {render(report, config.format), kExitOk};
  }

  const auto& p = std::get<CtcSolveParams>(config.params);
  const CtcScenario& scenario = *p.scenario;
  report["kind"] = "ctc-solve";
  report["config"] = Json{{"scenario", scenario_json(p.source, scenario)},
                          {"cr_state", p.cr_state},
                          {"mode", to_string(p.mode)},
                          {"method", to_string(p.method)},
                          {"max_iterations", p.max_iterations}};
  report["tolerances"] = Json{{"consistency", kConsistencyTolerance},
                              {"phase_merge", kPhaseMergeTolerance},
                              {"deutsch_convergence", DeutschOptions{}.convergence_tolerance},
                              {"deutsch_residual", kFixedPointResidualTolerance}};
  const auto strict = linear_consistency_basis(scenario, ConsistencyMode::strict);
  const auto ray = linear_consistency_basis(scenario, ConsistencyMode::ray);
  report["linear"] = Json{{"mode", to_string(p.mode)},
                          {"consistent_dimension", p.mode == ConsistencyMode::strict ? strict.dimension() : ray.dimension()},
                          {"strict", subspace_json(strict)},
                          {"ray", subspace_json(ray)}};

  std::vector<DeutschMethod> methods;
  if (p.method != SolveMethod::spectral) methods.push_back(DeutschMethod::iterate);
  if (p.method != SolveMethod::iterate) methods.push_back(DeutschMethod::spectral);
  Json deutsch = Json::array();
  int exit_code = kExitOk;
  for (auto m : methods) {
    try {
      DeutschOptions options;
      options.max_iterations = p.max_iterations;
      const auto sol = deutsch_fixed_point(scenario, *p.cr_input, m, options);
      const auto out = ctc_output_state(scenario, *p.cr_input, sol);
      deutsch.push_back(Json{{"method", to_string(m)},
                             {"converged", true},
                             {"rho_ctc", matrix_json(sol.rho_ctc.matrix())},
                             {"residual", sol.residual},
                             {"iterations", sol.iterations},
                             {"fixed_space_dimension", sol.fixed_space_dimension},
                             {"averaged", sol.averaged},
                             {"cr_output", matrix_json(out.matrix())}});
    } catch (const SolverError& e) {
      exit_code = kExitSolverError;
      deutsch.push_back(Json{{"method", to_string(m)},
                             {"converged", false},
                             {"error", e.what()},
                             {"best_residual", e.best_residual()}});
    }
  }
  report["deutsch"] = deutsch;
  return {render(report, config.format), exit_code};
}

CommandOutput run_command(const ScenarioConfig& config) {
  switch (config.kind) {
    case ExperimentKind::measure: return cmd_measure(config);
    case ExperimentKind::signal: return cmd_signal(config);
    case ExperimentKind::chsh: return cmd_chsh(config);
    case ExperimentKind::ctc_solve:
    case ExperimentKind::ctc_scan: return cmd_ctc(config);
  }
  return {"", kExitInternalError};
}

}  // namespace univqm::cli
