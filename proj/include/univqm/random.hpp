#pragma once

// Reproducible randomness.
//
// Draws come from std::mt19937_64, whose state transition and output are
// fixed by the C++ standard. Doubles are built from the top 53 bits of one
// output and Gaussians by Box-Muller, so no implementation-defined standard
// distribution is involved and streams are identical across platforms.
//
// Derived seeds (per round, per sample) are outputs of SplitMix64 seeded with
// the master seed: derive_seed(master, i) is the (i+1)-th SplitMix64 output.

#include <cstdint>
#include <random>

#include "univqm/tensor.hpp"

namespace univqm {

/// One SplitMix64 step: advances `state` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  /// Standard normal.
  double normal();
  /// Complex Gaussian with E|z|^2 = 1.
  Complex complex_normal();

 private:
  std::mt19937_64 engine_;
};

/// Normalized complex Gaussian vector (Haar-distributed pure state).
CVector random_unit_vector(std::size_t dim, Rng& rng);

/// QR of a complex Gaussian matrix with the R diagonal made real positive.
CMatrix random_unitary_matrix(std::size_t dim, Rng& rng);

StateVector haar_state(const SubsystemLayout& layout, Rng& rng);
UnitaryOperator haar_unitary(const SubsystemLayout& layout, Rng& rng);

}  // namespace univqm
