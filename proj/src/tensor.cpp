#include "univqm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>
#include <unsupported/Eigen/KroneckerProduct>

namespace univqm {

namespace {

bool contains_id(std::span<const std::string> ids, std::string_view id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

}  // namespace

// ---------------------------------------------------------------------------
// Subsystem

Subsystem::Subsystem(std::string id, std::vector<std::string> label_names) : id_(std::move(id)) {
  if (id_.empty()) throw LayoutError("subsystem id must not be empty");
  if (label_names.empty()) throw LayoutError(fmt::format("subsystem '{}' has dimension 0", id_));
  std::set<std::string> seen;
  basis_.reserve(label_names.size());
  for (std::size_t i = 0; i < label_names.size(); ++i) {
    if (!seen.insert(label_names[i]).second) {
      throw LayoutError(fmt::format("duplicate basis label '{}' in subsystem '{}'", label_names[i], id_));
    }
    basis_.push_back({std::move(label_names[i]), i});
  }
}

Subsystem Subsystem::numbered(std::string id, std::size_t dim) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < dim; ++i) names.push_back(std::to_string(i));
  return Subsystem(std::move(id), std::move(names));
}

bool Subsystem::has_label(std::string_view name) const {
  return std::any_of(basis_.begin(), basis_.end(), [&](const BasisLabel& l) { return l.name == name; });
}

std::size_t Subsystem::label_index(std::string_view name) const {
  for (const auto& l : basis_) {
    if (l.name == name) return l.index;
  }
  throw LayoutError(fmt::format("subsystem '{}' has no basis label '{}'", id_, name));
}

const std::string& Subsystem::label_name(std::size_t index) const {
  if (index >= basis_.size()) {
    throw LayoutError(fmt::format("label index {} out of range for subsystem '{}'", index, id_));
  }
  return basis_[index].name;
}

// ---------------------------------------------------------------------------
// SubsystemLayout

SubsystemLayout::SubsystemLayout(std::vector<Subsystem> subsystems) : subsystems_(std::move(subsystems)) {
  std::set<std::string> seen;
  for (const auto& s : subsystems_) {
    if (!seen.insert(s.id()).second) {
      throw LayoutConflictError(fmt::format("duplicate subsystem id '{}'", s.id()));
    }
  }
  strides_.assign(subsystems_.size(), 1);
  total_dim_ = 1;
  for (std::size_t k = subsystems_.size(); k-- > 0;) {
    strides_[k] = total_dim_;
    total_dim_ *= subsystems_[k].dim();
  }
}

bool SubsystemLayout::contains(std::string_view id) const {
  return std::any_of(subsystems_.begin(), subsystems_.end(), [&](const Subsystem& s) { return s.id() == id; });
}

std::size_t SubsystemLayout::position(std::string_view id) const {
  for (std::size_t k = 0; k < subsystems_.size(); ++k) {
    if (subsystems_[k].id() == id) return k;
  }
  throw LayoutError(fmt::format("unknown subsystem id '{}'", id));
}

const Subsystem& SubsystemLayout::at(std::string_view id) const { return subsystems_[position(id)]; }

std::vector<std::string> SubsystemLayout::ids() const {
  std::vector<std::string> out;
  out.reserve(subsystems_.size());
  for (const auto& s : subsystems_) out.push_back(s.id());
  return out;
}

SubsystemLayout SubsystemLayout::sub_layout(std::span<const std::string> ids) const {
  std::vector<Subsystem> subs;
  subs.reserve(ids.size());
  for (const auto& id : ids) subs.push_back(at(id));
  return SubsystemLayout(std::move(subs));
}

SubsystemLayout SubsystemLayout::ordered_sub_layout(std::span<const std::string> ids) const {
  for (const auto& id : ids) position(id);
  std::vector<Subsystem> subs;
  for (const auto& s : subsystems_) {
    if (contains_id(ids, s.id())) subs.push_back(s);
  }
  return SubsystemLayout(std::move(subs));
}

SubsystemLayout SubsystemLayout::complement(std::span<const std::string> ids) const {
  for (const auto& id : ids) position(id);
  std::vector<Subsystem> subs;
  for (const auto& s : subsystems_) {
    if (!contains_id(ids, s.id())) subs.push_back(s);
  }
  return SubsystemLayout(std::move(subs));
}

SubsystemLayout SubsystemLayout::concat(const SubsystemLayout& other) const {
  for (const auto& s : other.subsystems_) {
    if (contains(s.id())) {
      throw LayoutConflictError(fmt::format("subsystem id '{}' appears in both layouts", s.id()));
    }
  }
  std::vector<Subsystem> subs = subsystems_;
  subs.insert(subs.end(), other.subsystems_.begin(), other.subsystems_.end());
  return SubsystemLayout(std::move(subs));
}

std::size_t SubsystemLayout::basis_index(std::span<const std::string> labels) const {
  if (labels.size() != subsystems_.size()) {
    throw DimensionError(fmt::format("expected {} basis labels, got {}", subsystems_.size(), labels.size()));
  }
  std::size_t flat = 0;
  for (std::size_t k = 0; k < subsystems_.size(); ++k) {
    flat += subsystems_[k].label_index(labels[k]) * strides_[k];
  }
  return flat;
}

std::vector<std::size_t> SubsystemLayout::digits(std::size_t flat) const {
  std::vector<std::size_t> out(subsystems_.size());
  for (std::size_t k = 0; k < subsystems_.size(); ++k) {
    out[k] = (flat / strides_[k]) % subsystems_[k].dim();
  }
  return out;
}

std::string SubsystemLayout::describe_index(std::size_t flat) const {
  std::string out;
  const auto d = digits(flat);
  for (std::size_t k = 0; k < subsystems_.size(); ++k) {
    if (k) out += ',';
    out += subsystems_[k].label_name(d[k]);
  }
  return out;
}

std::vector<std::size_t> SubsystemLayout::offsets(std::span<const std::string> ids) const {
  std::vector<std::size_t> out{0};
  std::set<std::string_view> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw LayoutError(fmt::format("subsystem id '{}' listed twice", id));
    const std::size_t pos = position(id);
    const std::size_t dim = subsystems_[pos].dim();
    std::vector<std::size_t> next;
    next.reserve(out.size() * dim);
    for (std::size_t base : out) {
      for (std::size_t v = 0; v < dim; ++v) next.push_back(base + v * strides_[pos]);
    }
    out = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// StateVector

StateVector::StateVector(SubsystemLayout layout, CVector amplitudes)
    : layout_(std::move(layout)), amplitudes_(std::move(amplitudes)) {
  if (static_cast<std::size_t>(amplitudes_.size()) != layout_.total_dim()) {
    throw DimensionError(fmt::format("state has {} amplitudes but layout dimension is {}",
                                     amplitudes_.size(), layout_.total_dim()));
  }
  const double norm = amplitudes_.norm();
  if (!std::isfinite(norm) || norm == 0.0) {
    throw InvariantError("state vector has zero or non-finite norm");
  }
  // Vectors normalized to rounding are kept bit-exact.
  if (std::abs(norm - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) return;
  normalization_ = 1.0 / norm;
  amplitudes_ *= normalization_;
}

StateVector StateVector::basis(SubsystemLayout layout, std::span<const std::string> labels) {
  const std::size_t index = layout.basis_index(labels);
  CVector amps = CVector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
  amps(static_cast<Eigen::Index>(index)) = 1.0;
  return StateVector(std::move(layout), std::move(amps));
}

StateVector StateVector::basis(SubsystemLayout layout, std::initializer_list<std::string> labels) {
  const std::vector<std::string> v(labels);
  return basis(std::move(layout), std::span<const std::string>(v));
}

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(SubsystemLayout layout, CMatrix matrix)
    : layout_(std::move(layout)), matrix_(std::move(matrix)) {
  const auto d = static_cast<Eigen::Index>(layout_.total_dim());
  if (matrix_.rows() != d || matrix_.cols() != d) {
    throw DimensionError(fmt::format("density matrix is {}x{} but layout dimension is {}",
                                     matrix_.rows(), matrix_.cols(), d));
  }
  if (!matrix_.allFinite()) throw InvariantError("density matrix has non-finite entries");
  const double herm = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kTolerance) {
    throw InvariantError(fmt::format("density matrix not Hermitian (deviation {:.3e})", herm));
  }
  const Complex tr = matrix_.trace();
  if (std::abs(tr - 1.0) > kTolerance) {
    throw InvariantError(fmt::format("density matrix trace is {:.17g}{:+.3e}i", tr.real(), tr.imag()));
  }
  const double lo = min_eigenvalue();
  if (lo < kEigenvalueFloor) {
    throw InvariantError(fmt::format("density matrix has negative eigenvalue {:.3e}", lo));
  }
}

DensityMatrix DensityMatrix::maximally_mixed(SubsystemLayout layout) {
  const auto d = static_cast<Eigen::Index>(layout.total_dim());
  CMatrix m = CMatrix::Identity(d, d) / static_cast<double>(d);
  return DensityMatrix(std::move(layout), std::move(m));
}

double DensityMatrix::purity() const { return (matrix_ * matrix_).trace().real(); }

double DensityMatrix::min_eigenvalue() const {
  const CMatrix herm = 0.5 * (matrix_ + matrix_.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------
// UnitaryOperator

double unitarity_deviation(const CMatrix& m) {
  const CMatrix id = CMatrix::Identity(m.rows(), m.cols());
  return (m.adjoint() * m - id).cwiseAbs().maxCoeff();
}

double max_abs_deviation(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("matrices differ in shape");
  }
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

UnitaryOperator::UnitaryOperator(SubsystemLayout layout, CMatrix matrix)
    : layout_(std::move(layout)), matrix_(std::move(matrix)) {
  const auto d = static_cast<Eigen::Index>(layout_.total_dim());
  if (matrix_.rows() != d || matrix_.cols() != d) {
    throw DimensionError(fmt::format("operator is {}x{} but layout dimension is {}",
                                     matrix_.rows(), matrix_.cols(), d));
  }
  if (!matrix_.allFinite()) throw InvariantError("operator has non-finite entries");
  const double dev = unitarity_deviation(matrix_);
  if (dev > kTolerance) {
    throw InvariantError(fmt::format("operator is not unitary (max |U^dagger U - 1| = {:.3e})", dev));
  }
}

UnitaryOperator UnitaryOperator::identity(SubsystemLayout layout) {
  const auto d = static_cast<Eigen::Index>(layout.total_dim());
  return UnitaryOperator(std::move(layout), CMatrix::Identity(d, d));
}

UnitaryOperator UnitaryOperator::adjoint() const { return UnitaryOperator(layout_, matrix_.adjoint()); }

UnitaryOperator UnitaryOperator::compose(const UnitaryOperator& other) const {
  if (!(layout_ == other.layout_)) throw DimensionError("cannot compose operators on different layouts");
  return UnitaryOperator(layout_, matrix_ * other.matrix_);
}

// ---------------------------------------------------------------------------
// Operations

StateVector tensor_product(const StateVector& a, const StateVector& b) {
  SubsystemLayout layout = a.layout().concat(b.layout());
  CVector amps = Eigen::kroneckerProduct(a.amplitudes(), b.amplitudes()).eval();
  return StateVector(std::move(layout), std::move(amps));
}

DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b) {
  SubsystemLayout layout = a.layout().concat(b.layout());
  CMatrix m = Eigen::kroneckerProduct(a.matrix(), b.matrix()).eval();
  return DensityMatrix(std::move(layout), std::move(m));
}

StateVector apply_unitary(const UnitaryOperator& u, const StateVector& s) {
  if (!(u.layout() == s.layout())) {
    throw DimensionError("operator and state are defined on different layouts");
  }
  return StateVector(s.layout(), u.matrix() * s.amplitudes());
}

UnitaryOperator embed_operator(const UnitaryOperator& u, const SubsystemLayout& target) {
  const auto sub_ids = u.layout().ids();
  for (const auto& sub : u.layout().subsystems()) {
    if (!target.contains(sub.id())) {
      throw LayoutError(fmt::format("subsystem '{}' is not part of the target layout", sub.id()));
    }
    if (!(target.at(sub.id()) == sub)) {
      throw LayoutError(fmt::format("subsystem '{}' differs between operator and target layout", sub.id()));
    }
  }
  const auto inner = target.offsets(sub_ids);
  const auto rest_ids = target.complement(sub_ids).ids();
  const auto outer = target.offsets(rest_ids);

  const auto d = static_cast<Eigen::Index>(target.total_dim());
  CMatrix m = CMatrix::Zero(d, d);
  const CMatrix& um = u.matrix();
  for (std::size_t base : outer) {
    for (std::size_t i = 0; i < inner.size(); ++i) {
      for (std::size_t j = 0; j < inner.size(); ++j) {
        m(static_cast<Eigen::Index>(base + inner[i]), static_cast<Eigen::Index>(base + inner[j])) =
            um(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
  }
  return UnitaryOperator(target, std::move(m));
}

UnitaryOperator change_basis(const UnitaryOperator& u, std::string_view id, const CMatrix& basis_change) {
  const Subsystem& sub = u.layout().at(id);
  const SubsystemLayout single(std::vector<Subsystem>{sub});
  const UnitaryOperator b = embed_operator(UnitaryOperator(single, basis_change), u.layout());
  return UnitaryOperator(u.layout(), b.matrix() * u.matrix() * b.matrix().adjoint());
}

DensityMatrix to_density(const StateVector& s) {
  return DensityMatrix(s.layout(), s.amplitudes() * s.amplitudes().adjoint());
}

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const std::string> keep) {
  if (keep.empty()) throw ArgumentError("partial_trace: keep set is empty");
  for (const auto& id : keep) {
    if (!rho.layout().contains(id)) {
      throw ArgumentError(fmt::format("partial_trace: unknown subsystem id '{}'", id));
    }
  }
  SubsystemLayout kept = rho.layout().ordered_sub_layout(keep);
  const auto kept_ids = kept.ids();
  if (kept_ids.size() != keep.size()) throw ArgumentError("partial_trace: keep set lists an id twice");
  const auto koff = rho.layout().offsets(kept_ids);
  const auto toff = rho.layout().offsets(rho.layout().complement(kept_ids).ids());

  const auto dk = static_cast<Eigen::Index>(koff.size());
  CMatrix out = CMatrix::Zero(dk, dk);
  const CMatrix& m = rho.matrix();
  for (Eigen::Index r = 0; r < dk; ++r) {
    for (Eigen::Index c = 0; c < dk; ++c) {
      Complex acc = 0.0;
      for (std::size_t t : toff) {
        acc += m(static_cast<Eigen::Index>(koff[r] + t), static_cast<Eigen::Index>(koff[c] + t));
      }
      out(r, c) = acc;
    }
  }
  return DensityMatrix(std::move(kept), std::move(out));
}

DensityMatrix partial_trace(const DensityMatrix& rho, std::initializer_list<std::string> keep) {
  const std::vector<std::string> v(keep);
  return partial_trace(rho, std::span<const std::string>(v));
}

Complex overlap(const StateVector& a, const StateVector& b) {
  if (!(a.layout() == b.layout())) throw DimensionError("overlap of states on different layouts");
  return a.amplitudes().dot(b.amplitudes());
}

double label_weight(const StateVector& s, std::string_view id, std::string_view label) {
  const std::size_t pos = s.layout().position(id);
  const std::size_t value = s.layout().subsystems()[pos].label_index(label);
  const std::string id_str(id);
  const auto rest = s.layout().offsets(s.layout().complement(std::span<const std::string>(&id_str, 1)).ids());
  const std::size_t shift = value * s.layout().stride(pos);
  double w = 0.0;
  for (std::size_t r : rest) w += std::norm(s[r + shift]);
  return w;
}

double trace_distance(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("trace_distance: shape mismatch");
  const CMatrix diff = a - b;
  const CMatrix herm = 0.5 * (diff + diff.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace univqm
