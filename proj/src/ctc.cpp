#include "univqm/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include <fmt/format.h>

#include "univqm/random.hpp"

namespace univqm {

namespace {

constexpr double kNullSpaceTolerance = 1e-9;

double wrap_phase(double phi) {
  // Map into (-pi, pi].
  while (phi <= -std::numbers::pi) phi += 2.0 * std::numbers::pi;
  while (phi > std::numbers::pi) phi -= 2.0 * std::numbers::pi;
  return phi;
}

CMatrix project_to_states(const CMatrix& m) {
  const CMatrix herm = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm);
  Eigen::VectorXd values = es.eigenvalues().cwiseMax(0.0);
  const double total = values.sum();
  if (!(total > 0.0)) throw SolverError("fixed-point candidate has no positive part", 1.0);
  values /= total;
  const CMatrix& vecs = es.eigenvectors();
  CMatrix out = vecs * values.cast<Complex>().asDiagonal() * vecs.adjoint();
  return 0.5 * (out + out.adjoint());
}

std::size_t fixed_space_dimension(const CMatrix& superop) {
  const CMatrix a = superop - CMatrix::Identity(superop.rows(), superop.cols());
  Eigen::JacobiSVD<CMatrix> svd(a);
  const auto& sv = svd.singularValues();
  return static_cast<std::size_t>((sv.array() <= kNullSpaceTolerance).count());
}

DeutschSolution make_solution(const DeutschMap& map, const CMatrix& rho, std::size_t iterations,
                              DeutschMethod method, std::size_t fixed_dim, bool averaged,
                              const CtcScenario& scenario, const DensityMatrix& rho_cr_in) {
  const CMatrix state = project_to_states(rho);
  const double residual = trace_distance(map.apply(state), state);
  if (residual > kFixedPointResidualTolerance) {
    throw SolverError(fmt::format("Deutsch fixed point residual {:.3e} exceeds {:.0e}", residual,
                                  kFixedPointResidualTolerance),
                      residual);
  }
  return DeutschSolution{DensityMatrix(map.ctc_layout(), state), residual, iterations, method, fixed_dim,
                         averaged, scenario.loop_unitary().matrix(), rho_cr_in.matrix()};
}

DeutschSolution solve_by_iteration(const DeutschMap& map, const DeutschOptions& options, std::size_t fixed_dim,
                                   const CtcScenario& scenario, const DensityMatrix& rho_cr_in) {
  const auto d = static_cast<Eigen::Index>(map.ctc_layout().total_dim());
  CMatrix rho = options.initial.value_or(CMatrix::Identity(d, d) / static_cast<double>(d));
  if (rho.rows() != d || rho.cols() != d) throw DimensionError("initial CTC state has the wrong size");

  std::vector<double> history;
  CMatrix best = rho;
  double best_residual = std::numeric_limits<double>::infinity();

  std::size_t it = 0;
  bool averaging = false;
  CMatrix sum = CMatrix::Zero(d, d);
  std::size_t averaged_terms = 0;

  while (it < options.max_iterations) {
    ++it;
    const CMatrix next = map.apply(rho);
    if (!averaging) {
      const double dist = trace_distance(next, rho);
      if (dist < best_residual) best_residual = dist, best = rho;
      if (dist <= options.convergence_tolerance) {
        return make_solution(map, rho, it, DeutschMethod::iterate, fixed_dim, false, scenario, rho_cr_in);
      }
      history.push_back(dist);
      const std::size_t w = options.plateau_window;
      if (w > 0 && history.size() > w && history.back() > 0.5 * history[history.size() - 1 - w]) {
        averaging = true;
      }
      rho = next;
      continue;
    }
    // Slow but convergent iterations may still settle on their own.
    const double plain = trace_distance(next, rho);
    if (plain < best_residual) best_residual = plain, best = rho;
    if (plain <= options.convergence_tolerance) {
      return make_solution(map, rho, it, DeutschMethod::iterate, fixed_dim, false, scenario, rho_cr_in);
    }
    // Cesaro averaging of the iterates from the plateau onwards.
    sum += rho;
    ++averaged_terms;
    const CMatrix mean = sum / static_cast<double>(averaged_terms);
    const double dist = trace_distance(map.apply(mean), mean);
    if (dist < best_residual) best_residual = dist, best = mean;
    if (dist <= options.convergence_tolerance) {
      return make_solution(map, mean, it, DeutschMethod::iterate, fixed_dim, true, scenario, rho_cr_in);
    }
    rho = next;
  }
  if (best_residual <= kFixedPointResidualTolerance) {
    return make_solution(map, best, it, DeutschMethod::iterate, fixed_dim, averaging, scenario, rho_cr_in);
  }
  throw SolverError(fmt::format("Deutsch iteration did not converge in {} iterations (best residual {:.3e})",
                                options.max_iterations, best_residual),
                    best_residual);
}

DeutschSolution solve_spectrally(const DeutschMap& map, const CtcScenario& scenario,
                                 const DensityMatrix& rho_cr_in) {
  const auto d = static_cast<Eigen::Index>(map.ctc_layout().total_dim());
  const CMatrix superop = map.superoperator();
  const CMatrix a = superop - CMatrix::Identity(d * d, d * d);
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const auto k = static_cast<Eigen::Index>((sv.array() <= kNullSpaceTolerance).count());
  if (k == 0) {
    throw SolverError("induced CTC map has no eigenvalue 1 within tolerance", sv.minCoeff());
  }
  // Right and left null vectors of (S - 1); P = R (L^dagger R)^{-1} L^dagger is
  // the spectral projector onto the fixed space, i.e. the Cesaro limit of the
  // iteration. Applied to the maximally mixed state it gives the same
  // representative as `iterate`.
  const CMatrix right = svd.matrixV().rightCols(k);
  const CMatrix left = svd.matrixU().rightCols(k);
  const CMatrix gram = left.adjoint() * right;
  CVector start = CVector::Zero(d * d);
  for (Eigen::Index i = 0; i < d; ++i) start(i * d + i) = 1.0 / static_cast<double>(d);
  const CVector fixed = right * gram.fullPivLu().solve(left.adjoint() * start);
  CMatrix rho(d, d);
  for (Eigen::Index c = 0; c < d; ++c) rho.col(c) = fixed.segment(c * d, d);
  const Complex tr = rho.trace();
  if (std::abs(tr) < 1e-12) throw SolverError("spectral fixed point has vanishing trace", 1.0);
  rho /= tr;
  return make_solution(map, rho, 0, DeutschMethod::spectral, static_cast<std::size_t>(k), false, scenario,
                       rho_cr_in);
}

}  // namespace

const char* to_string(ConsistencyMode m) noexcept { return m == ConsistencyMode::strict ? "strict" : "ray"; }
const char* to_string(DeutschMethod m) noexcept { return m == DeutschMethod::iterate ? "iterate" : "spectral"; }

CtcScenario::CtcScenario(SubsystemLayout layout, std::vector<std::string> cr_ids, std::vector<std::string> ctc_ids,
                         UnitaryOperator loop_unitary)
    : layout_(std::move(layout)),
      cr_ids_(std::move(cr_ids)),
      ctc_ids_(std::move(ctc_ids)),
      loop_unitary_(std::move(loop_unitary)) {
  if (!(loop_unitary_.layout() == layout_)) throw DimensionError("loop unitary must act on the scenario layout");
  if (ctc_ids_.empty()) throw ArgumentError("a scenario needs at least one CTC subsystem");
  std::set<std::string> seen;
  for (const auto* group : {&cr_ids_, &ctc_ids_}) {
    for (const auto& id : *group) {
      if (!layout_.contains(id)) throw LayoutError(fmt::format("unknown subsystem id '{}' in partition", id));
      if (!seen.insert(id).second) throw ArgumentError(fmt::format("subsystem '{}' listed twice in the partition", id));
    }
  }
  if (seen.size() != layout_.size()) throw ArgumentError("CR and CTC ids must cover every subsystem");
}

SubsystemLayout CtcScenario::cr_layout() const { return layout_.ordered_sub_layout(cr_ids_); }
SubsystemLayout CtcScenario::ctc_layout() const { return layout_.ordered_sub_layout(ctc_ids_); }

std::size_t ConsistencySubspace::dimension() const noexcept {
  std::size_t n = 0;
  for (const auto& e : eigenspaces) n += e.dimension();
  return n;
}

ConsistencySubspace linear_consistency_basis(const CtcScenario& scenario, ConsistencyMode mode) {
  const CMatrix& u = scenario.loop_unitary().matrix();
  Eigen::ComplexSchur<CMatrix> schur(u);
  const CMatrix& t = schur.matrixT();
  const CMatrix& q = schur.matrixU();
  const auto n = t.rows();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::vector<double> phase(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    order[static_cast<std::size_t>(i)] = i;
    phase[static_cast<std::size_t>(i)] = wrap_phase(std::arg(t(i, i)));
  }
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return phase[static_cast<std::size_t>(a)] < phase[static_cast<std::size_t>(b)];
  });

  std::vector<std::vector<Eigen::Index>> groups;
  for (Eigen::Index idx : order) {
    if (!groups.empty() &&
        phase[static_cast<std::size_t>(idx)] - phase[static_cast<std::size_t>(groups.back().back())] <=
            kPhaseMergeTolerance) {
      groups.back().push_back(idx);
    } else {
      groups.push_back({idx});
    }
  }
  // Phases just above -pi and at pi are the same eigenvalue.
  if (groups.size() > 1) {
    const double lo = phase[static_cast<std::size_t>(groups.front().front())];
    const double hi = phase[static_cast<std::size_t>(groups.back().back())];
    if (lo + 2.0 * std::numbers::pi - hi <= kPhaseMergeTolerance) {
      groups.back().insert(groups.back().end(), groups.front().begin(), groups.front().end());
      groups.erase(groups.begin());
    }
  }

  // Basis columns are fixed up to phase: first nonzero entry real positive.
  ConsistencySubspace out;
  out.mode = mode;
  for (const auto& g : groups) {
    Complex sum = 0.0;
    for (Eigen::Index i : g) sum += t(i, i);
    Eigenspace space;
    space.phase = wrap_phase(std::arg(sum));
    if (mode == ConsistencyMode::strict && std::abs(space.phase) > kPhaseMergeTolerance) continue;
    space.basis.resize(n, static_cast<Eigen::Index>(g.size()));
    const Complex eig = std::polar(1.0, space.phase);
    for (std::size_t c = 0; c < g.size(); ++c) {
      CVector v = q.col(g[c]);
      for (Eigen::Index r = 0; r < n; ++r) {
        if (std::abs(v(r)) > 1e-12) {
          v *= std::conj(v(r)) / std::abs(v(r));
          break;
        }
      }
      space.basis.col(static_cast<Eigen::Index>(c)) = v;
      space.max_residual = std::max(space.max_residual, (u * v - eig * v).norm());
    }
    out.eigenspaces.push_back(std::move(space));
  }
  return out;
}

ConsistencyCheck is_consistent_initial_state(const CtcScenario& scenario, const StateVector& s, ConsistencyMode mode) {
  if (!(s.layout() == scenario.layout())) throw DimensionError("state does not live on the scenario layout");
  const CVector us = scenario.loop_unitary().matrix() * s.amplitudes();
  double residual = 0.0;
  if (mode == ConsistencyMode::strict) {
    residual = (us - s.amplitudes()).norm();
  } else {
    const Complex z = s.amplitudes().dot(us);
    const Complex phase = std::abs(z) > 0.0 ? z / std::abs(z) : Complex(1.0);
    residual = (us - phase * s.amplitudes()).norm();
  }
  return {residual <= kConsistencyTolerance, residual};
}

DeutschMap::DeutschMap(const CtcScenario& scenario, const DensityMatrix& rho_cr_in)
    : cr_layout_(scenario.cr_layout()), ctc_layout_(scenario.ctc_layout()), rho_cr_in_(rho_cr_in.matrix()) {
  if (!(rho_cr_in.layout() == cr_layout_)) {
    throw DimensionError("CR input state does not match the scenario's CR subsystems");
  }
  unitary_ = embed_operator(scenario.loop_unitary(), cr_layout_.concat(ctc_layout_)).matrix();
}

CMatrix DeutschMap::joint_output(const CMatrix& rho_ctc) const {
  const auto dc = static_cast<Eigen::Index>(ctc_layout_.total_dim());
  if (rho_ctc.rows() != dc || rho_ctc.cols() != dc) throw DimensionError("CTC operator has the wrong size");
  const auto dr = rho_cr_in_.rows();
  CMatrix joint(dr * dc, dr * dc);
  for (Eigen::Index a = 0; a < dr; ++a) {
    for (Eigen::Index b = 0; b < dr; ++b) joint.block(a * dc, b * dc, dc, dc) = rho_cr_in_(a, b) * rho_ctc;
  }
  return unitary_ * joint * unitary_.adjoint();
}

CMatrix DeutschMap::apply(const CMatrix& rho_ctc) const {
  const auto dc = static_cast<Eigen::Index>(ctc_layout_.total_dim());
  const auto dr = rho_cr_in_.rows();
  const CMatrix joint = joint_output(rho_ctc);
  CMatrix out = CMatrix::Zero(dc, dc);
  for (Eigen::Index a = 0; a < dr; ++a) out += joint.block(a * dc, a * dc, dc, dc);
  return out;
}

CMatrix DeutschMap::superoperator() const {
  const auto d = static_cast<Eigen::Index>(ctc_layout_.total_dim());
  CMatrix s(d * d, d * d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      CMatrix e = CMatrix::Zero(d, d);
      e(i, j) = 1.0;
      const CMatrix image = apply(e);
      for (Eigen::Index c = 0; c < d; ++c) s.col(j * d + i).segment(c * d, d) = image.col(c);
    }
  }
  return s;
}

DeutschSolution deutsch_fixed_point(const CtcScenario& scenario, const DensityMatrix& rho_cr_in,
                                    DeutschMethod method, const DeutschOptions& options) {
  const DeutschMap map(scenario, rho_cr_in);
  if (method == DeutschMethod::spectral) return solve_spectrally(map, scenario, rho_cr_in);
  return solve_by_iteration(map, options, fixed_space_dimension(map.superoperator()), scenario, rho_cr_in);
}

DensityMatrix ctc_output_state(const CtcScenario& scenario, const DensityMatrix& rho_cr_in,
                               const DeutschSolution& solution) {
  if (solution.loop_unitary != scenario.loop_unitary().matrix() || solution.rho_cr_in != rho_cr_in.matrix()) {
    throw ArgumentError("Deutsch solution was computed for a different scenario or CR input");
  }
  const DeutschMap map(scenario, rho_cr_in);
  const CMatrix joint = map.joint_output(solution.rho_ctc.matrix());
  const auto dc = static_cast<Eigen::Index>(map.ctc_layout().total_dim());
  const auto dr = static_cast<Eigen::Index>(map.cr_layout().total_dim());
  CMatrix out(dr, dr);
  for (Eigen::Index a = 0; a < dr; ++a) {
    for (Eigen::Index b = 0; b < dr; ++b) out(a, b) = joint.block(a * dc, b * dc, dc, dc).trace();
  }
  return DensityMatrix(map.cr_layout(), 0.5 * (out + out.adjoint()));
}

AdmissibilityStats admissible_fraction(const CtcScenario& scenario, std::size_t n_samples, ConsistencyMode mode,
                                       std::uint64_t seed) {
  if (n_samples < 1) throw ArgumentError("admissible_fraction needs at least one sample");
  std::vector<double> residuals(n_samples);
  std::size_t consistent = 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    Rng rng(derive_seed(seed, i));
    const auto check = is_consistent_initial_state(scenario, haar_state(scenario.layout(), rng), mode);
    residuals[i] = check.residual;
    if (check.consistent) ++consistent;
  }
  std::sort(residuals.begin(), residuals.end());
  AdmissibilityStats stats;
  stats.mode = mode;
  stats.seed = seed;
  stats.n_samples = n_samples;
  stats.n_consistent = consistent;
  stats.fraction = static_cast<double>(consistent) / static_cast<double>(n_samples);
  stats.min_residual = residuals.front();
  stats.max_residual = residuals.back();
  const std::size_t mid = n_samples / 2;
  stats.median_residual = n_samples % 2 ? residuals[mid] : 0.5 * (residuals[mid - 1] + residuals[mid]);
  return stats;
}

CtcScenario grandfather_scenario(GrandfatherVariant variant) {
  if (variant == GrandfatherVariant::qubit_flip) {
    SubsystemLayout layout(std::vector<Subsystem>{Subsystem::numbered("ctc", 2)});
    CMatrix x(2, 2);
    x << 0, 1, 1, 0;
    return CtcScenario(layout, {}, {"ctc"}, UnitaryOperator(layout, x));
  }
  SubsystemLayout layout(std::vector<Subsystem>{Subsystem::numbered("cr", 2), Subsystem::numbered("ctc", 2)});
  // |cr, ctc> -> |cr xor ctc, not ctc>
  CMatrix u = CMatrix::Zero(4, 4);
  for (int cr = 0; cr < 2; ++cr) {
    for (int ctc = 0; ctc < 2; ++ctc) u(2 * (cr ^ ctc) + (1 - ctc), 2 * cr + ctc) = 1.0;
  }
  return CtcScenario(layout, {"cr"}, {"ctc"}, UnitaryOperator(layout, u));
}

}  // namespace univqm
