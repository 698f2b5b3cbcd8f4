#pragma once

// von Neumann pre-measurement: a unitary that copies the measured basis into
// distinguishable pointer states of an apparatus, plus branch decomposition
// and Born-rule sampling of the resulting superposition.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "univqm/tensor.hpp"

namespace univqm {

/// Weights at or below this are treated as absent branches.
inline constexpr double kBranchPruneThreshold = 1e-12;

struct PointerScheme {
  std::string measured_subsystem;
  std::string apparatus_subsystem;
  std::string ready_label = "ready";
  /// measured-basis label -> apparatus label
  std::vector<std::pair<std::string, std::string>> outcome_map;

  /// Scheme reading `measured` into `apparatus` with labels "observes_<label>".
  static PointerScheme standard(const Subsystem& measured, std::string apparatus_id);
};

/// Apparatus with labels {ready, observes_<l> for each label l of `measured`}.
Subsystem make_apparatus(std::string id, const Subsystem& measured);

/// Throws SchemeError if `scheme` is not usable on `layout`.
void validate_scheme(const PointerScheme& scheme, const SubsystemLayout& layout);

/// Unitary over the (measured, apparatus) sub-layout. In each measured sector
/// k the apparatus levels `ready` and `outcome(k)` are swapped and all other
/// levels are left alone, so the matrix is a 0/1 permutation.
UnitaryOperator build_premeasurement_unitary(const PointerScheme& scheme, const SubsystemLayout& layout);

/// Same map in a rotated measured basis: column k of `measured_basis` is the
/// state read out as measured label k.
UnitaryOperator build_premeasurement_unitary(const PointerScheme& scheme, const SubsystemLayout& layout,
                                             const CMatrix& measured_basis);

/// Applies the pre-measurement to `s`. The apparatus must be in `ready`.
StateVector premeasure(const StateVector& s, const PointerScheme& scheme);

struct Branch {
  /// One apparatus label per apparatus subsystem, in the requested order.
  std::vector<std::string> pointer_labels;
  double weight = 0.0;
  /// sqrt(weight) times the phase stripped from the conditional state.
  Complex amplitude;
  /// State of the non-apparatus subsystems; first nonzero amplitude real positive.
  StateVector conditional_state;

  /// Pointer labels joined with ','.
  std::string pointer_label() const;
};

/// One branch per apparatus basis state with weight above the prune
/// threshold, in apparatus-label index order.
std::vector<Branch> branch_decomposition(const StateVector& s, std::string_view apparatus);

/// Joint decomposition over several apparatus subsystems. Joint labels are
/// enumerated row-major in the order of `apparatus_ids`.
std::vector<Branch> branch_decomposition(const StateVector& s, std::span<const std::string> apparatus_ids);

/// Sum of amplitude * |pointer> (x) conditional, reassembled in `layout`.
StateVector recombine_branches(std::span<const Branch> branches, std::span<const std::string> apparatus_ids,
                               const SubsystemLayout& layout);

/// Inverse-CDF selection over branch weights with the first draw of Rng(seed).
std::size_t select_branch(std::span<const Branch> branches, std::uint64_t seed);

struct SampledBranch {
  Branch branch;
  /// Apparatus set to the pointer label(s), rest equal to the conditional state.
  StateVector collapsed;
};

SampledBranch sample_branch(const StateVector& s, std::string_view apparatus, std::uint64_t seed);
SampledBranch sample_branch(const StateVector& s, std::span<const std::string> apparatus_ids, std::uint64_t seed);

}  // namespace univqm
