#include "univqm/suggestion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "univqm/random.hpp"

namespace univqm {

namespace {

constexpr int kSectorDim = 9;  // brain (3) x prepared (3)

int decided_brain(Spin s) { return s == Spin::up ? 1 : 2; }
int prepared_state(Spin s) { return s == Spin::up ? 1 : 2; }

/// Lexicographically smallest permutation of {0..8} with perm[0] = first.
std::array<int, kSectorDim> smallest_permutation_from(int first) {
  std::array<int, kSectorDim> perm{};
  perm[0] = first;
  int next = 0;
  for (int k = 1; k < kSectorDim; ++k) {
    if (next == first) ++next;
    perm[static_cast<std::size_t>(k)] = next++;
  }
  return perm;
}

std::array<int, kSectorDim> inverse(const std::array<int, kSectorDim>& perm) {
  std::array<int, kSectorDim> inv{};
  for (int k = 0; k < kSectorDim; ++k) inv[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = k;
  return inv;
}

/// Block-diagonal operator sum_x |x><x| (x) P_x over (influence, brain, prepared)
/// in the computational influence basis.
CMatrix controlled_permutations(const std::array<int, kSectorDim>& up, const std::array<int, kSectorDim>& down) {
  CMatrix m = CMatrix::Zero(2 * kSectorDim, 2 * kSectorDim);
  for (int x = 0; x < 2; ++x) {
    const auto& perm = x == 0 ? up : down;
    for (int k = 0; k < kSectorDim; ++k) {
      m(x * kSectorDim + perm[static_cast<std::size_t>(k)], x * kSectorDim + k) = 1.0;
    }
  }
  return m;
}

SubsystemLayout decision_layout(const DecisionScheme& scheme, const SubsystemLayout& layout) {
  validate_scheme(scheme, layout);
  return SubsystemLayout(std::vector<Subsystem>{layout.at(scheme.influence_subsystem),
                                                layout.at(scheme.brain_subsystem),
                                                layout.at(scheme.prepared_subsystem)});
}

UnitaryOperator rotated(const CMatrix& computational, const DecisionScheme& scheme, SubsystemLayout sub) {
  return change_basis(UnitaryOperator(std::move(sub), computational), scheme.influence_subsystem,
                      scheme.direction.basis());
}

Spin decision_from_label(const std::string& label) {
  if (label == "decides_up") return Spin::up;
  if (label == "decides_down") return Spin::down;
  throw InvariantError(fmt::format("brain branch '{}' carries no decision", label));
}

Spin outcome_from_label(const std::string& label) {
  if (label == "observes_up") return Spin::up;
  if (label == "observes_down") return Spin::down;
  throw InvariantError(fmt::format("Bob's apparatus branch '{}' carries no outcome", label));
}

StateVector bell_pair() {
  const SubsystemLayout pair(std::vector<Subsystem>{spin_subsystem(ids::particle), spin_subsystem(ids::distant)});
  CVector amps = CVector::Zero(4);
  amps(pair.basis_index(std::vector<std::string>{"up", "down"})) = 1.0;
  amps(pair.basis_index(std::vector<std::string>{"down", "up"})) = 1.0;
  return StateVector(pair, amps);
}

const std::vector<std::string>& joint_apparatus() {
  static const std::vector<std::string> apparatus{ids::brain, ids::bob};
  return apparatus;
}

}  // namespace

CVector Direction::up() const {
  CVector v(2);
  v << std::cos(theta_ / 2.0), std::sin(theta_ / 2.0);
  return v;
}

CVector Direction::down() const {
  CVector v(2);
  v << -std::sin(theta_ / 2.0), std::cos(theta_ / 2.0);
  return v;
}

CMatrix Direction::basis() const {
  CMatrix m(2, 2);
  m.col(0) = up();
  m.col(1) = down();
  return m;
}

const char* to_string(Spin s) noexcept { return s == Spin::up ? "up" : "down"; }

Subsystem spin_subsystem(std::string id) { return Subsystem(std::move(id), {"up", "down"}); }
Subsystem brain_subsystem(std::string id) {
  return Subsystem(std::move(id), {"undecided", "decides_up", "decides_down"});
}
Subsystem prepared_subsystem(std::string id) { return Subsystem(std::move(id), {"psi0", "psi_up", "psi_down"}); }

void validate_scheme(const DecisionScheme& scheme, const SubsystemLayout& layout) {
  const std::array<const std::string*, 3> names{&scheme.influence_subsystem, &scheme.brain_subsystem,
                                                &scheme.prepared_subsystem};
  for (const auto* id : names) {
    if (!layout.contains(*id)) throw SchemeError(fmt::format("decision subsystem '{}' not in layout", *id));
  }
  if (scheme.influence_subsystem == scheme.brain_subsystem || scheme.influence_subsystem == scheme.prepared_subsystem ||
      scheme.brain_subsystem == scheme.prepared_subsystem) {
    throw SchemeError("influence, brain and prepared subsystems must be distinct");
  }
  if (layout.at(scheme.influence_subsystem).dim() != 2) throw SchemeError("influence subsystem must be a qubit");
  const Subsystem& brain = layout.at(scheme.brain_subsystem);
  if (brain.dim() != 3 || !(brain == brain_subsystem(brain.id()))) {
    throw SchemeError("brain subsystem must have labels (undecided, decides_up, decides_down)");
  }
  const Subsystem& prepared = layout.at(scheme.prepared_subsystem);
  if (prepared.dim() != 3 || !(prepared == prepared_subsystem(prepared.id()))) {
    throw SchemeError("prepared subsystem must have labels (psi0, psi_up, psi_down)");
  }
}

std::array<int, 9> suggestion_permutation(Spin s) {
  return smallest_permutation_from(3 * decided_brain(s) + prepared_state(s));
}

UnitaryOperator build_suggestion_unitary(const DecisionScheme& scheme, const SubsystemLayout& layout) {
  auto sub = decision_layout(scheme, layout);
  return rotated(controlled_permutations(suggestion_permutation(Spin::up), suggestion_permutation(Spin::down)),
                 scheme, std::move(sub));
}

StageUnitaries build_stage_unitaries(const DecisionScheme& scheme, const SubsystemLayout& layout) {
  auto sub = decision_layout(scheme, layout);
  std::array<std::array<int, kSectorDim>, 2> decide{};
  std::array<std::array<int, kSectorDim>, 2> prepare{};
  for (Spin s : {Spin::up, Spin::down}) {
    const auto x = static_cast<std::size_t>(s);
    decide[x] = smallest_permutation_from(3 * decided_brain(s));
    const auto full = suggestion_permutation(s);
    const auto undo = inverse(decide[x]);
    for (std::size_t k = 0; k < kSectorDim; ++k) prepare[x][k] = full[static_cast<std::size_t>(undo[k])];
  }
  return {rotated(controlled_permutations(decide[0], decide[1]), scheme, sub),
          rotated(controlled_permutations(prepare[0], prepare[1]), scheme, sub)};
}

StagedResult staged_decision(const StateVector& s, const DecisionScheme& scheme) {
  validate_scheme(scheme, s.layout());
  const double undecided = label_weight(s, scheme.brain_subsystem, "undecided");
  const double fresh = label_weight(s, scheme.prepared_subsystem, "psi0");
  if (std::abs(undecided - 1.0) > kTolerance || std::abs(fresh - 1.0) > kTolerance) {
    throw ProtocolError(fmt::format("staged decision needs an undecided brain and a psi0 system (weights {:.12g}, {:.12g})",
                                    undecided, fresh));
  }
  const auto stages = build_stage_unitaries(scheme, s.layout());
  StateVector intermediate = apply_unitary(embed_operator(stages.decide, s.layout()), s);
  StateVector final_state = apply_unitary(embed_operator(stages.prepare, s.layout()), intermediate);
  return {std::move(intermediate), std::move(final_state)};
}

double JointDistribution::correlator() const { return p[0][0] + p[1][1] - p[0][1] - p[1][0]; }

std::array<double, 2> JointDistribution::bob_marginal() const {
  return {p[0][0] + p[1][0], p[0][1] + p[1][1]};
}

std::array<double, 2> JointDistribution::alice_marginal() const {
  return {p[0][0] + p[0][1], p[1][0] + p[1][1]};
}

void CorrelationTally::record(Spin alice, Spin bob) noexcept {
  if (alice == Spin::up) {
    (bob == Spin::up ? n_uu : n_ud) += 1;
  } else {
    (bob == Spin::up ? n_du : n_dd) += 1;
  }
}

void CorrelationTally::merge(const CorrelationTally& other) noexcept {
  n_uu += other.n_uu;
  n_ud += other.n_ud;
  n_du += other.n_du;
  n_dd += other.n_dd;
}

double CorrelationTally::correlator() const noexcept {
  const auto n = total();
  if (n == 0) return 0.0;
  return (static_cast<double>(n_uu + n_dd) - static_cast<double>(n_ud + n_du)) / static_cast<double>(n);
}

SubsystemLayout signaling_layout() {
  const Subsystem distant = spin_subsystem(ids::distant);
  return SubsystemLayout(std::vector<Subsystem>{spin_subsystem(ids::particle), distant, brain_subsystem(ids::brain),
                                                prepared_subsystem(ids::prepared), make_apparatus(ids::bob, distant)});
}

StateVector signaling_initial_state() { return signaling_initial_state(bell_pair()); }

StateVector signaling_initial_state(const StateVector& pair) {
  const SubsystemLayout full = signaling_layout();
  const SubsystemLayout expected(std::vector<Subsystem>{full.at(ids::particle), full.at(ids::distant)});
  if (!(pair.layout() == expected)) throw DimensionError("pair state must live on (particle, distant) spins");
  const SubsystemLayout rest(std::vector<Subsystem>{full.at(ids::brain), full.at(ids::prepared), full.at(ids::bob)});
  return tensor_product(pair, StateVector::basis(rest, {"undecided", "psi0", "ready"}));
}

StateVector evolve_signaling(const StateVector& initial, Direction alice, Direction bob) {
  const SubsystemLayout& layout = initial.layout();
  DecisionScheme scheme;
  scheme.direction = alice;
  const auto suggest = embed_operator(build_suggestion_unitary(scheme, layout), layout);
  const auto bob_scheme = PointerScheme::standard(layout.at(ids::distant), ids::bob);
  const auto measure = embed_operator(build_premeasurement_unitary(bob_scheme, layout, bob.basis()), layout);
  return apply_unitary(measure, apply_unitary(suggest, initial));
}

std::vector<Branch> signaling_branches(const StateVector& evolved) {
  return branch_decomposition(evolved, std::span<const std::string>(joint_apparatus()));
}

std::pair<Spin, Spin> round_outcome(const Branch& branch) {
  return {decision_from_label(branch.pointer_labels.at(0)), outcome_from_label(branch.pointer_labels.at(1))};
}

JointDistribution joint_distribution(const StateVector& evolved) {
  JointDistribution out;
  for (const auto& b : signaling_branches(evolved)) {
    const auto [a, o] = round_outcome(b);
    out.p[static_cast<std::size_t>(a)][static_cast<std::size_t>(o)] += b.weight;
  }
  return out;
}

JointDistribution joint_distribution(Direction alice, Direction bob) {
  return joint_distribution(evolve_signaling(signaling_initial_state(), alice, bob));
}

RoundRecord run_signaling_round(Direction alice, Direction bob, std::uint64_t seed) {
  const auto evolved = evolve_signaling(signaling_initial_state(), alice, bob);
  const auto branches = signaling_branches(evolved);
  const auto [a, o] = round_outcome(branches[select_branch(branches, seed)]);
  return {alice, bob, a, o, seed};
}

double correlator(Direction alice, Direction bob) { return joint_distribution(alice, bob).correlator(); }

double chsh_value(Direction a1, Direction a2, Direction b1, Direction b2) {
  return correlator(a1, b1) + correlator(a1, b2) + correlator(a2, b1) - correlator(a2, b2);
}

CorrelatorTable::CorrelatorTable(std::span<const double> angles) : angles_(angles.begin(), angles.end()) {
  const std::size_t n = angles_.size();
  values_.assign(n * n, 0.0);

  const StateVector initial = signaling_initial_state();
  const SubsystemLayout& layout = initial.layout();
  const std::vector<std::string> others{ids::particle, ids::prepared, ids::bob};
  const auto rest = layout.offsets(others);
  const auto distant_stride = layout.stride(layout.position(ids::distant));
  const auto brain_stride = layout.stride(layout.position(ids::brain));

  std::vector<CMatrix> bob_up(n);
  for (std::size_t b = 0; b < n; ++b) {
    const CVector v = Direction(angles_[b]).up();
    bob_up[b] = v * v.adjoint();
  }

  for (std::size_t a = 0; a < n; ++a) {
    DecisionScheme scheme;
    scheme.direction = Direction(angles_[a]);
    const auto evolved = apply_unitary(embed_operator(build_suggestion_unitary(scheme, layout), layout), initial);
    // Unnormalized state of the distant particle in each decision branch.
    std::array<CMatrix, 2> conditional{CMatrix::Zero(2, 2), CMatrix::Zero(2, 2)};
    for (int x = 0; x < 2; ++x) {
      const std::size_t shift = static_cast<std::size_t>(x + 1) * brain_stride;
      for (std::size_t r : rest) {
        for (std::size_t i = 0; i < 2; ++i) {
          for (std::size_t j = 0; j < 2; ++j) {
            conditional[static_cast<std::size_t>(x)](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
                evolved[r + shift + i * distant_stride] * std::conj(evolved[r + shift + j * distant_stride]);
          }
        }
      }
    }
    const double total_up = conditional[0].trace().real();
    const double total_down = conditional[1].trace().real();
    for (std::size_t b = 0; b < n; ++b) {
      const double p_uu = (bob_up[b] * conditional[0]).trace().real();
      const double p_du = (bob_up[b] * conditional[1]).trace().real();
      const double p_ud = total_up - p_uu;
      const double p_dd = total_down - p_du;
      values_[a * n + b] = p_uu + p_dd - p_ud - p_du;
    }
  }
}

ChshSearchResult chsh_grid_search(double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw ArgumentError("grid step must be a positive finite angle");
  const double two_pi = 2.0 * std::numbers::pi;
  const auto n = static_cast<std::size_t>(std::ceil(two_pi / step - 1e-9));
  if (n > 20000) throw ArgumentError("grid step too fine");
  std::vector<double> angles(n);
  for (std::size_t k = 0; k < n; ++k) angles[k] = static_cast<double>(k) * step;
  const CorrelatorTable table(angles);

  // For fixed (a1, a2) the b1 and b2 terms separate:
  //   S = [E(a1,b1) + E(a2,b1)] + [E(a1,b2) - E(a2,b2)].
  // Swapping a1 and a2 negates the second bracket, so only i1 <= i2 is scanned.
  struct Best {
    double abs_s = -1.0;
    double s = 0.0;
    std::size_t a1 = 0, a2 = 0;
  } best;
  auto consider = [&](double s, std::size_t a1, std::size_t a2) {
    if (std::abs(s) > best.abs_s) best = {std::abs(s), s, a1, a2};
  };

  for (std::size_t i1 = 0; i1 < n; ++i1) {
    const double* r1 = table.row(i1);
    for (std::size_t i2 = i1; i2 < n; ++i2) {
      const double* r2 = table.row(i2);
      double max_p = -4.0, min_p = 4.0, max_m = -4.0, min_m = 4.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double p = r1[b] + r2[b];
        const double m = r1[b] - r2[b];
        max_p = p > max_p ? p : max_p;
        min_p = p < min_p ? p : min_p;
        max_m = m > max_m ? m : max_m;
        min_m = m < min_m ? m : min_m;
      }
      consider(max_p + max_m, i1, i2);
      consider(min_p + min_m, i1, i2);
      consider(max_p - min_m, i2, i1);
      consider(min_p - max_m, i2, i1);
    }
  }

  // Recover the Bob settings for the winning Alice pair.
  const double* r1 = table.row(best.a1);
  const double* r2 = table.row(best.a2);
  const double sign = best.s >= 0.0 ? 1.0 : -1.0;
  std::size_t b1 = 0, b2 = 0;
  double v1 = -8.0, v2 = -8.0;
  for (std::size_t b = 0; b < n; ++b) {
    if (sign * (r1[b] + r2[b]) > v1) v1 = sign * (r1[b] + r2[b]), b1 = b;
    if (sign * (r1[b] - r2[b]) > v2) v2 = sign * (r1[b] - r2[b]), b2 = b;
  }

  ChshSearchResult out;
  out.step = step;
  out.grid_points = n;
  out.s = r1[b1] + r2[b1] + r1[b2] - r2[b2];
  out.max_abs_s = std::abs(out.s);
  out.a1 = Direction(angles[best.a1]);
  out.a2 = Direction(angles[best.a2]);
  out.b1 = Direction(angles[b1]);
  out.b2 = Direction(angles[b2]);
  return out;
}

NoSignalingAudit no_signaling_audit(std::span<const Direction> alice_dirs, Direction bob_dir) {
  return no_signaling_audit(alice_dirs, bob_dir, bell_pair());
}

NoSignalingAudit no_signaling_audit(std::span<const Direction> alice_dirs, Direction bob_dir,
                                    const StateVector& pair) {
  std::vector<double> thetas;
  for (const auto& d : alice_dirs) thetas.push_back(d.theta());
  std::sort(thetas.begin(), thetas.end());
  if (std::unique(thetas.begin(), thetas.end()) - thetas.begin() < 2) {
    throw ArgumentError("no-signaling audit needs at least two distinct Alice settings");
  }
  NoSignalingAudit audit;
  audit.alice_directions.assign(alice_dirs.begin(), alice_dirs.end());
  audit.bob_direction = bob_dir;
  const StateVector initial = signaling_initial_state(pair);
  for (const auto& a : alice_dirs) {
    audit.bob_marginals.push_back(joint_distribution(evolve_signaling(initial, a, bob_dir)).bob_marginal());
  }
  for (std::size_t i = 0; i < audit.bob_marginals.size(); ++i) {
    for (std::size_t j = i + 1; j < audit.bob_marginals.size(); ++j) {
      const auto& p = audit.bob_marginals[i];
      const auto& q = audit.bob_marginals[j];
      const double tv = 0.5 * (std::abs(p[0] - q[0]) + std::abs(p[1] - q[1]));
      audit.max_tv_distance = std::max(audit.max_tv_distance, tv);
    }
  }
  return audit;
}

std::vector<RoundRecord> run_session_records(std::uint64_t n_rounds, Direction alice, Direction bob,
                                             std::uint64_t master_seed) {
  if (n_rounds < 1) throw ArgumentError("a session needs at least one round");
  // Every round evolves the same initial state, so the branch set is shared;
  // only the per-round selection differs.
  const auto branches = signaling_branches(evolve_signaling(signaling_initial_state(), alice, bob));
  std::vector<RoundRecord> records;
  records.reserve(n_rounds);
  for (std::uint64_t i = 0; i < n_rounds; ++i) {
    const std::uint64_t seed = derive_seed(master_seed, i);
    const auto [a, o] = round_outcome(branches[select_branch(branches, seed)]);
    records.push_back({alice, bob, a, o, seed});
  }
  return records;
}

CorrelationTally run_session(std::uint64_t n_rounds, Direction alice, Direction bob, std::uint64_t master_seed) {
  if (n_rounds < 1) throw ArgumentError("a session needs at least one round");
  const auto branches = signaling_branches(evolve_signaling(signaling_initial_state(), alice, bob));
  CorrelationTally tally;
  for (std::uint64_t i = 0; i < n_rounds; ++i) {
    const auto [a, o] = round_outcome(branches[select_branch(branches, derive_seed(master_seed, i))]);
    tally.record(a, o);
  }
  return tally;
}

}  // namespace univqm
