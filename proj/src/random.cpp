#include "univqm/random.hpp"

#include <cmath>
#include <numbers>

namespace univqm {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) noexcept {
  std::uint64_t state = master_seed + index * 0x9E3779B97F4A7C15ULL;
  return splitmix64(state);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Complex Rng::complex_normal() {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(phi), r * std::sin(phi)};
}

CVector random_unit_vector(std::size_t dim, Rng& rng) {
  CVector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.complex_normal();
  return v / v.norm();
}

CMatrix random_unitary_matrix(std::size_t dim, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(dim);
  CMatrix g(d, d);
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) g(r, c) = rng.complex_normal();
  }
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ();
  const CMatrix& r = qr.matrixQR();
  for (Eigen::Index k = 0; k < d; ++k) {
    const Complex diag = r(k, k);
    const double mag = std::abs(diag);
    if (mag > 0.0) q.col(k) *= diag / mag;
  }
  return q;
}

StateVector haar_state(const SubsystemLayout& layout, Rng& rng) {
  return StateVector(layout, random_unit_vector(layout.total_dim(), rng));
}

UnitaryOperator haar_unitary(const SubsystemLayout& layout, Rng& rng) {
  return UnitaryOperator(layout, random_unitary_matrix(layout.total_dim(), rng));
}

}  // namespace univqm
