#pragma once

// Manipulator-controlled decisions ("quantum suggestion") and the Alice/Bob
// experiment built on a Bell pair.
//
// Experiment layout (fixed):
//   particle (up, down)          member of the pair steering Alice's brain
//   distant  (up, down)          member of the pair measured by Bob
//   brain    (undecided, decides_up, decides_down)
//   prepared (psi0, psi_up, psi_down)
//   bob      (ready, observes_up, observes_down)
//
// Correlator convention: (decides_up, Bob up) and (decides_down, Bob down)
// count as "same".

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "univqm/measurement.hpp"
#include "univqm/tensor.hpp"

namespace univqm {

namespace ids {
inline const std::string particle = "particle";
inline const std::string distant = "distant";
inline const std::string brain = "brain";
inline const std::string prepared = "prepared";
inline const std::string bob = "bob";
}  // namespace ids

/// Real-plane spin direction:
///   |up'>   =  cos(theta/2)|up> + sin(theta/2)|down>
///   |down'> = -sin(theta/2)|up> + cos(theta/2)|down>
class Direction {
 public:
  constexpr Direction() = default;
  constexpr explicit Direction(double theta) : theta_(theta) {}

  double theta() const noexcept { return theta_; }
  CVector up() const;
  CVector down() const;
  /// Columns (|up'>, |down'>).
  CMatrix basis() const;

 private:
  double theta_ = 0.0;
};

enum class Spin { up, down };
const char* to_string(Spin s) noexcept;

Subsystem spin_subsystem(std::string id);
Subsystem brain_subsystem(std::string id);
Subsystem prepared_subsystem(std::string id);

struct DecisionScheme {
  std::string influence_subsystem = ids::particle;
  std::string brain_subsystem = ids::brain;
  std::string prepared_subsystem = ids::prepared;
  Direction direction;
};

void validate_scheme(const DecisionScheme& scheme, const SubsystemLayout& layout);

/// (brain, prepared) permutation applied in decision sector `s`, as
/// perm[source] = image over the 9 joint indices 3*brain + prepared.
std::array<int, 9> suggestion_permutation(Spin s);

/// Unitary over the (influence, brain, prepared) sub-layout:
///   |x'>|undecided>|psi0> -> |x'>|decides_x>|psi_x>
/// for x in {up, down} along scheme.direction. On each sector the
/// (brain, prepared) action is the lexicographically smallest permutation
/// extending that single assignment.
UnitaryOperator build_suggestion_unitary(const DecisionScheme& scheme, const SubsystemLayout& layout);

struct StageUnitaries {
  /// |x'>|undecided>|psi0> -> |x'>|decides_x>|psi0>
  UnitaryOperator decide;
  /// |x'>|decides_x>|psi0> -> |x'>|decides_x>|psi_x>; prepare * decide equals
  /// the one-step suggestion unitary.
  UnitaryOperator prepare;
};

StageUnitaries build_stage_unitaries(const DecisionScheme& scheme, const SubsystemLayout& layout);

struct StagedResult {
  StateVector intermediate;
  StateVector final_state;
};

/// Runs the two-step process on `s` (brain undecided, prepared in psi0).
StagedResult staged_decision(const StateVector& s, const DecisionScheme& scheme);

struct RoundRecord {
  Direction alice_direction;
  Direction bob_direction;
  Spin alice_decision = Spin::up;
  Spin bob_outcome = Spin::up;
  std::uint64_t seed = 0;
};

/// p[alice][bob], indexed by Spin.
struct JointDistribution {
  std::array<std::array<double, 2>, 2> p{};

  double correlator() const;
  std::array<double, 2> bob_marginal() const;
  std::array<double, 2> alice_marginal() const;
};

struct CorrelationTally {
  std::uint64_t n_uu = 0;
  std::uint64_t n_ud = 0;
  std::uint64_t n_du = 0;
  std::uint64_t n_dd = 0;

  std::uint64_t total() const noexcept { return n_uu + n_ud + n_du + n_dd; }
  void record(Spin alice, Spin bob) noexcept;
  void merge(const CorrelationTally& other) noexcept;
  /// (n_uu + n_dd - n_ud - n_du) / n_total; 0 for an empty tally.
  double correlator() const noexcept;

  bool operator==(const CorrelationTally&) const = default;
};

SubsystemLayout signaling_layout();
/// (|up>|down>_d + |down>|up>_d)/sqrt(2) (x) |undecided>|psi0> (x) |ready>_bob
StateVector signaling_initial_state();
/// Same as above with an arbitrary (particle, distant) pair state.
StateVector signaling_initial_state(const StateVector& pair);

/// The full unitary: suggestion along `alice`, then Bob's pre-measurement of
/// the distant particle along `bob`.
StateVector evolve_signaling(const StateVector& initial, Direction alice, Direction bob);

/// Exact joint distribution from the branch weights of the evolved state.
JointDistribution joint_distribution(const StateVector& evolved);
JointDistribution joint_distribution(Direction alice, Direction bob);

/// Joint (brain, bob) branches of an evolved signaling state.
std::vector<Branch> signaling_branches(const StateVector& evolved);
/// Reads (alice_decision, bob_outcome) off a joint branch.
std::pair<Spin, Spin> round_outcome(const Branch& branch);

RoundRecord run_signaling_round(Direction alice, Direction bob, std::uint64_t seed);

/// Exact E(a, b) = p_same - p_diff.
double correlator(Direction alice, Direction bob);

/// S = E(a1,b1) + E(a1,b2) + E(a2,b1) - E(a2,b2).
double chsh_value(Direction a1, Direction a2, Direction b1, Direction b2);

/// Table of exact correlators over grid angles, built from one suggestion
/// evolution per Alice angle and the conditional operators of the distant
/// particle per decision.
class CorrelatorTable {
 public:
  explicit CorrelatorTable(std::span<const double> angles);

  std::size_t size() const noexcept { return angles_.size(); }
  double angle(std::size_t i) const { return angles_.at(i); }
  double at(std::size_t alice, std::size_t bob) const { return values_[alice * angles_.size() + bob]; }
  const double* row(std::size_t alice) const { return values_.data() + alice * angles_.size(); }

 private:
  std::vector<double> angles_;
  std::vector<double> values_;
};

struct ChshSearchResult {
  double step = 0.0;
  std::size_t grid_points = 0;
  /// Largest |S| over the grid and the signed S attaining it.
  double max_abs_s = 0.0;
  double s = 0.0;
  Direction a1, a2, b1, b2;
};

/// Exhaustive search over all four angles on {k * step : 0 <= k*step < 2 pi}.
ChshSearchResult chsh_grid_search(double step);

struct NoSignalingAudit {
  std::vector<Direction> alice_directions;
  Direction bob_direction;
  /// Bob's (up, down) marginal per Alice setting.
  std::vector<std::array<double, 2>> bob_marginals;
  double max_tv_distance = 0.0;
};

NoSignalingAudit no_signaling_audit(std::span<const Direction> alice_dirs, Direction bob_dir);
NoSignalingAudit no_signaling_audit(std::span<const Direction> alice_dirs, Direction bob_dir,
                                    const StateVector& pair);

/// Rounds with per-round seed derive_seed(master_seed, index).
std::vector<RoundRecord> run_session_records(std::uint64_t n_rounds, Direction alice, Direction bob,
                                             std::uint64_t master_seed);
CorrelationTally run_session(std::uint64_t n_rounds, Direction alice, Direction bob, std::uint64_t master_seed);

}  // namespace univqm
