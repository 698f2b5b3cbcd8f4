#pragma once

// Exact dense linear algebra over labeled tensor-product spaces.
//
// Amplitudes are stored row-major in layout order: the leftmost subsystem is
// the most significant digit of the flat basis index.

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "univqm/errors.hpp"

namespace univqm {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// Absolute tolerance for structural invariants (norm, unitarity, trace...).
inline constexpr double kTolerance = 1e-10;
/// Smallest eigenvalue a DensityMatrix may have.
inline constexpr double kEigenvalueFloor = -1e-9;

struct BasisLabel {
  std::string name;
  std::size_t index = 0;

  bool operator==(const BasisLabel&) const = default;
};

class Subsystem {
 public:
  Subsystem(std::string id, std::vector<std::string> label_names);

  /// Subsystem whose basis labels are "0", "1", ..., "dim-1".
  static Subsystem numbered(std::string id, std::size_t dim);

  const std::string& id() const noexcept { return id_; }
  std::size_t dim() const noexcept { return basis_.size(); }
  const std::vector<BasisLabel>& basis() const noexcept { return basis_; }

  bool has_label(std::string_view name) const;
  std::size_t label_index(std::string_view name) const;
  const std::string& label_name(std::size_t index) const;

  bool operator==(const Subsystem&) const = default;

 private:
  std::string id_;
  std::vector<BasisLabel> basis_;
};

class SubsystemLayout {
 public:
  SubsystemLayout() = default;
  explicit SubsystemLayout(std::vector<Subsystem> subsystems);

  const std::vector<Subsystem>& subsystems() const noexcept { return subsystems_; }
  std::size_t size() const noexcept { return subsystems_.size(); }
  bool empty() const noexcept { return subsystems_.empty(); }

  /// Product of subsystem dimensions (1 for the empty layout).
  std::size_t total_dim() const noexcept { return total_dim_; }

  bool contains(std::string_view id) const;
  std::size_t position(std::string_view id) const;
  const Subsystem& at(std::string_view id) const;
  std::vector<std::string> ids() const;

  /// Flat-index stride of the subsystem at `position`.
  std::size_t stride(std::size_t position) const { return strides_.at(position); }

  /// Layout restricted to `ids`, in the order given.
  SubsystemLayout sub_layout(std::span<const std::string> ids) const;
  /// Layout restricted to `ids`, in this layout's order.
  SubsystemLayout ordered_sub_layout(std::span<const std::string> ids) const;
  /// Every subsystem not named in `ids`, in this layout's order.
  SubsystemLayout complement(std::span<const std::string> ids) const;

  /// Concatenation; throws LayoutConflictError on shared ids.
  SubsystemLayout concat(const SubsystemLayout& other) const;

  /// Flat index of the basis state with one label per subsystem.
  std::size_t basis_index(std::span<const std::string> labels) const;
  std::vector<std::size_t> digits(std::size_t flat) const;
  std::string describe_index(std::size_t flat) const;

  /// Flat offsets (in this layout) of every basis state of the subsystems
  /// `ids`, enumerated in the row-major order of `ids` as given.
  std::vector<std::size_t> offsets(std::span<const std::string> ids) const;

  bool operator==(const SubsystemLayout& other) const { return subsystems_ == other.subsystems_; }

 private:
  std::vector<Subsystem> subsystems_;
  std::vector<std::size_t> strides_;
  std::size_t total_dim_ = 1;
};

/// Normalized pure state. Constructors normalize and remember the factor.
class StateVector {
 public:
  StateVector(SubsystemLayout layout, CVector amplitudes);

  static StateVector basis(SubsystemLayout layout, std::span<const std::string> labels);
  static StateVector basis(SubsystemLayout layout, std::initializer_list<std::string> labels);

  const SubsystemLayout& layout() const noexcept { return layout_; }
  const CVector& amplitudes() const noexcept { return amplitudes_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(amplitudes_.size()); }
  Complex operator[](std::size_t i) const { return amplitudes_(static_cast<Eigen::Index>(i)); }

  /// Factor applied to the raw amplitudes to reach unit norm.
  double normalization() const noexcept { return normalization_; }

 private:
  SubsystemLayout layout_;
  CVector amplitudes_;
  double normalization_ = 1.0;
};

/// Hermitian, positive, unit-trace operator. Validated on construction.
class DensityMatrix {
 public:
  DensityMatrix(SubsystemLayout layout, CMatrix matrix);

  static DensityMatrix maximally_mixed(SubsystemLayout layout);

  const SubsystemLayout& layout() const noexcept { return layout_; }
  const CMatrix& matrix() const noexcept { return matrix_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }

  double purity() const;
  double min_eigenvalue() const;

 private:
  SubsystemLayout layout_;
  CMatrix matrix_;
};

/// Square matrix with U^dagger U = 1 within kTolerance.
class UnitaryOperator {
 public:
  UnitaryOperator(SubsystemLayout layout, CMatrix matrix);

  static UnitaryOperator identity(SubsystemLayout layout);

  const SubsystemLayout& layout() const noexcept { return layout_; }
  const CMatrix& matrix() const noexcept { return matrix_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }

  UnitaryOperator adjoint() const;
  /// this * other; both must share a layout.
  UnitaryOperator compose(const UnitaryOperator& other) const;

 private:
  SubsystemLayout layout_;
  CMatrix matrix_;
};

/// max_ij |(A^dagger A - 1)_ij|
double unitarity_deviation(const CMatrix& m);
double max_abs_deviation(const CMatrix& a, const CMatrix& b);

StateVector tensor_product(const StateVector& a, const StateVector& b);
DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b);

StateVector apply_unitary(const UnitaryOperator& u, const StateVector& s);

/// Lift `u` (acting on a subset of `target`'s subsystems) to all of `target`,
/// acting as identity on the rest. Also serves to re-express an operator in a
/// permuted layout.
UnitaryOperator embed_operator(const UnitaryOperator& u, const SubsystemLayout& target);

/// (B U B^dagger) where B applies `basis_change` to subsystem `id`.
/// Column k of `basis_change` is the image of basis label k.
UnitaryOperator change_basis(const UnitaryOperator& u, std::string_view id,
                             const CMatrix& basis_change);

DensityMatrix to_density(const StateVector& s);

/// Reduced density matrix on `keep`; the result follows the input layout order.
DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const std::string> keep);
DensityMatrix partial_trace(const DensityMatrix& rho, std::initializer_list<std::string> keep);

/// <a|b>
Complex overlap(const StateVector& a, const StateVector& b);

/// Squared norm of the projection of `s` onto label `label` of subsystem `id`.
double label_weight(const StateVector& s, std::string_view id, std::string_view label);

/// Half the trace norm of (a - b) for Hermitian a, b.
double trace_distance(const CMatrix& a, const CMatrix& b);

}  // namespace univqm
