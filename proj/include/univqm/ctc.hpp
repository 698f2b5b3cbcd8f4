#pragma once

// Consistency conditions for a closed timelike curve modeled as a loop
// unitary over chronology-respecting (CR) and CTC subsystems.
//
// Linear condition: the global pure state returns to itself after one
// traversal, U|s> = |s> (strict) or U|s> = e^{i phi}|s> (ray).
//
// Deutsch condition: the CTC density matrix is a fixed point of
//   rho_ctc -> Tr_CR[ U (rho_cr_in (x) rho_ctc) U^dagger ].

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "univqm/tensor.hpp"

namespace univqm {

inline constexpr double kConsistencyTolerance = 1e-8;
inline constexpr double kPhaseMergeTolerance = 1e-8;
inline constexpr double kFixedPointResidualTolerance = 1e-8;

enum class ConsistencyMode { strict, ray };
enum class DeutschMethod { iterate, spectral };

const char* to_string(ConsistencyMode m) noexcept;
const char* to_string(DeutschMethod m) noexcept;

class CtcScenario {
 public:
  CtcScenario(SubsystemLayout layout, std::vector<std::string> cr_ids, std::vector<std::string> ctc_ids,
              UnitaryOperator loop_unitary);

  const SubsystemLayout& layout() const noexcept { return layout_; }
  const std::vector<std::string>& cr_ids() const noexcept { return cr_ids_; }
  const std::vector<std::string>& ctc_ids() const noexcept { return ctc_ids_; }
  const UnitaryOperator& loop_unitary() const noexcept { return loop_unitary_; }

  /// CR and CTC sub-layouts, in scenario layout order.
  SubsystemLayout cr_layout() const;
  SubsystemLayout ctc_layout() const;

 private:
  SubsystemLayout layout_;
  std::vector<std::string> cr_ids_;
  std::vector<std::string> ctc_ids_;
  UnitaryOperator loop_unitary_;
};

struct Eigenspace {
  /// Eigenphase in (-pi, pi].
  double phase = 0.0;
  /// Orthonormal columns spanning the eigenspace.
  CMatrix basis;
  /// max over columns of ||U v - e^{i phase} v||
  double max_residual = 0.0;

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(basis.cols()); }
};

struct ConsistencySubspace {
  ConsistencyMode mode = ConsistencyMode::strict;
  std::vector<Eigenspace> eigenspaces;
  double tolerance = kConsistencyTolerance;
  double phase_tolerance = kPhaseMergeTolerance;

  std::size_t dimension() const noexcept;
};

/// Eigendecomposition of the loop unitary (via complex Schur form, which is
/// diagonal with a unitary basis for normal matrices). Strict mode keeps the
/// eigenvalue-1 eigenspace only; ray mode keeps every eigenspace.
ConsistencySubspace linear_consistency_basis(const CtcScenario& scenario, ConsistencyMode mode);

struct ConsistencyCheck {
  bool consistent = false;
  double residual = 0.0;
};

ConsistencyCheck is_consistent_initial_state(const CtcScenario& scenario, const StateVector& s, ConsistencyMode mode);

/// The induced map on CTC density matrices for a fixed CR input.
class DeutschMap {
 public:
  DeutschMap(const CtcScenario& scenario, const DensityMatrix& rho_cr_in);

  const SubsystemLayout& ctc_layout() const noexcept { return ctc_layout_; }
  const SubsystemLayout& cr_layout() const noexcept { return cr_layout_; }

  CMatrix apply(const CMatrix& rho_ctc) const;
  /// Global output U (rho_cr_in (x) rho_ctc) U^dagger in (CR, CTC) order.
  CMatrix joint_output(const CMatrix& rho_ctc) const;
  /// Matrix of the map on column-stacked operators.
  CMatrix superoperator() const;

 private:
  SubsystemLayout cr_layout_;
  SubsystemLayout ctc_layout_;
  CMatrix unitary_;  // loop unitary re-expressed in (CR..., CTC...) order
  CMatrix rho_cr_in_;
};

struct DeutschOptions {
  double convergence_tolerance = 1e-10;
  std::size_t max_iterations = 10000;
  /// Iterations without a 2x residual drop that count as a plateau.
  std::size_t plateau_window = 100;
  /// Starting point for `iterate`; defaults to the maximally mixed state.
  std::optional<CMatrix> initial;
};

struct DeutschSolution {
  DensityMatrix rho_ctc;
  /// Trace distance between rho_ctc and its image.
  double residual = 0.0;
  std::size_t iterations = 0;
  DeutschMethod method = DeutschMethod::iterate;
  /// Dimension of the eigenvalue-1 eigenspace of the induced map.
  std::size_t fixed_space_dimension = 0;
  /// True when plain iteration plateaued and Cesaro averaging was used.
  bool averaged = false;

  // Provenance, checked by ctc_output_state.
  CMatrix loop_unitary;
  CMatrix rho_cr_in;
};

DeutschSolution deutsch_fixed_point(const CtcScenario& scenario, const DensityMatrix& rho_cr_in,
                                    DeutschMethod method, const DeutschOptions& options = {});

/// Tr_CTC[ U (rho_cr_in (x) rho_ctc) U^dagger ] on the CR sub-layout.
DensityMatrix ctc_output_state(const CtcScenario& scenario, const DensityMatrix& rho_cr_in,
                               const DeutschSolution& solution);

struct AdmissibilityStats {
  ConsistencyMode mode = ConsistencyMode::strict;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  std::size_t n_consistent = 0;
  double fraction = 0.0;
  double min_residual = 0.0;
  double median_residual = 0.0;
  double max_residual = 0.0;
};

/// Haar-random initial states (sample i uses Rng(derive_seed(seed, i))).
AdmissibilityStats admissible_fraction(const CtcScenario& scenario, std::size_t n_samples, ConsistencyMode mode,
                                       std::uint64_t seed);

enum class GrandfatherVariant { qubit_flip, cr_coupled };

/// qubit_flip: one CTC qubit, loop unitary X.
/// cr_coupled: CR qubit "cr" and CTC qubit "ctc"; CNOT (control ctc, target cr)
/// followed by X on ctc.
CtcScenario grandfather_scenario(GrandfatherVariant variant);

}  // namespace univqm
