#include "univqm/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "univqm/random.hpp"

namespace univqm {

namespace {

// Amplitudes below this (on a unit vector) do not define the branch phase.
constexpr double kPhaseAnchorThreshold = 1e-12;

std::vector<std::string> as_vector(std::string_view id) { return {std::string(id)}; }

}  // namespace

PointerScheme PointerScheme::standard(const Subsystem& measured, std::string apparatus_id) {
  PointerScheme scheme;
  scheme.measured_subsystem = measured.id();
  scheme.apparatus_subsystem = std::move(apparatus_id);
  for (const auto& l : measured.basis()) scheme.outcome_map.emplace_back(l.name, "observes_" + l.name);
  return scheme;
}

Subsystem make_apparatus(std::string id, const Subsystem& measured) {
  std::vector<std::string> labels{"ready"};
  for (const auto& l : measured.basis()) labels.push_back("observes_" + l.name);
  return Subsystem(std::move(id), std::move(labels));
}

void validate_scheme(const PointerScheme& scheme, const SubsystemLayout& layout) {
  if (scheme.measured_subsystem == scheme.apparatus_subsystem) {
    throw SchemeError("measured and apparatus subsystems must differ");
  }
  if (!layout.contains(scheme.measured_subsystem)) {
    throw SchemeError(fmt::format("measured subsystem '{}' not in layout", scheme.measured_subsystem));
  }
  if (!layout.contains(scheme.apparatus_subsystem)) {
    throw SchemeError(fmt::format("apparatus subsystem '{}' not in layout", scheme.apparatus_subsystem));
  }
  const Subsystem& measured = layout.at(scheme.measured_subsystem);
  const Subsystem& apparatus = layout.at(scheme.apparatus_subsystem);
  if (!apparatus.has_label(scheme.ready_label)) {
    throw SchemeError(fmt::format("apparatus has no ready label '{}'", scheme.ready_label));
  }
  if (apparatus.dim() < measured.dim() + 1) {
    throw SchemeError(fmt::format("apparatus dimension {} < number of outcomes + 1 ({})", apparatus.dim(),
                                  measured.dim() + 1));
  }
  std::set<std::string> keys;
  std::set<std::string> images;
  for (const auto& [from, to] : scheme.outcome_map) {
    if (!measured.has_label(from)) throw SchemeError(fmt::format("outcome map key '{}' is not a measured label", from));
    if (!apparatus.has_label(to)) throw SchemeError(fmt::format("outcome map value '{}' is not an apparatus label", to));
    if (to == scheme.ready_label) throw SchemeError("ready label may not be an outcome pointer");
    if (!keys.insert(from).second) throw SchemeError(fmt::format("measured label '{}' mapped twice", from));
    if (!images.insert(to).second) throw SchemeError(fmt::format("pointer '{}' used for two outcomes", to));
  }
  if (keys.size() != measured.dim()) throw SchemeError("outcome map does not cover every measured label");
}

UnitaryOperator build_premeasurement_unitary(const PointerScheme& scheme, const SubsystemLayout& layout) {
  validate_scheme(scheme, layout);
  const Subsystem& measured = layout.at(scheme.measured_subsystem);
  const Subsystem& apparatus = layout.at(scheme.apparatus_subsystem);
  SubsystemLayout pair(std::vector<Subsystem>{measured, apparatus});

  const auto da = static_cast<Eigen::Index>(apparatus.dim());
  const auto d = static_cast<Eigen::Index>(pair.total_dim());
  const auto ready = static_cast<Eigen::Index>(apparatus.label_index(scheme.ready_label));
  CMatrix m = CMatrix::Zero(d, d);
  for (const auto& [from, to] : scheme.outcome_map) {
    const auto k = static_cast<Eigen::Index>(measured.label_index(from));
    const auto out = static_cast<Eigen::Index>(apparatus.label_index(to));
    for (Eigen::Index a = 0; a < da; ++a) {
      Eigen::Index image = a;
      if (a == ready) image = out;
      else if (a == out) image = ready;
      m(k * da + image, k * da + a) = 1.0;
    }
  }
  return UnitaryOperator(std::move(pair), std::move(m));
}

UnitaryOperator build_premeasurement_unitary(const PointerScheme& scheme, const SubsystemLayout& layout,
                                             const CMatrix& measured_basis) {
  return change_basis(build_premeasurement_unitary(scheme, layout), scheme.measured_subsystem, measured_basis);
}

StateVector premeasure(const StateVector& s, const PointerScheme& scheme) {
  validate_scheme(scheme, s.layout());
  const double ready = label_weight(s, scheme.apparatus_subsystem, scheme.ready_label);
  if (std::abs(ready - 1.0) > kTolerance) {
    throw PreconditionError(fmt::format("apparatus '{}' is not in its ready state (weight {:.12g})",
                                        scheme.apparatus_subsystem, ready));
  }
  const auto u = build_premeasurement_unitary(scheme, s.layout());
  return apply_unitary(embed_operator(u, s.layout()), s);
}

std::string Branch::pointer_label() const {
  std::string out;
  for (std::size_t i = 0; i < pointer_labels.size(); ++i) {
    if (i) out += ',';
    out += pointer_labels[i];
  }
  return out;
}

std::vector<Branch> branch_decomposition(const StateVector& s, std::string_view apparatus) {
  const auto ids = as_vector(apparatus);
  return branch_decomposition(s, std::span<const std::string>(ids));
}

std::vector<Branch> branch_decomposition(const StateVector& s, std::span<const std::string> apparatus_ids) {
  const SubsystemLayout& layout = s.layout();
  for (const auto& id : apparatus_ids) {
    if (!layout.contains(id)) throw LayoutError(fmt::format("unknown apparatus subsystem '{}'", id));
  }
  const SubsystemLayout app_layout = layout.sub_layout(apparatus_ids);
  const SubsystemLayout rest_layout = layout.complement(apparatus_ids);
  const auto app_off = layout.offsets(apparatus_ids);
  const auto rest_off = layout.offsets(rest_layout.ids());

  std::vector<Branch> out;
  CVector component(static_cast<Eigen::Index>(rest_off.size()));
  for (std::size_t k = 0; k < app_off.size(); ++k) {
    for (std::size_t r = 0; r < rest_off.size(); ++r) {
      component(static_cast<Eigen::Index>(r)) = s[app_off[k] + rest_off[r]];
    }
    const double weight = component.squaredNorm();
    if (weight <= kBranchPruneThreshold) continue;
    const double norm = std::sqrt(weight);
    Complex phase = 1.0;
    for (Eigen::Index r = 0; r < component.size(); ++r) {
      const double mag = std::abs(component(r)) / norm;
      if (mag > kPhaseAnchorThreshold) {
        phase = component(r) / std::abs(component(r));
        break;
      }
    }
    const auto digits = app_layout.digits(k);
    std::vector<std::string> labels;
    for (std::size_t a = 0; a < digits.size(); ++a) {
      labels.push_back(app_layout.subsystems()[a].label_name(digits[a]));
    }
    out.push_back(Branch{std::move(labels), weight, norm * phase,
                         StateVector(rest_layout, component / (norm * phase))});
  }
  return out;
}

StateVector recombine_branches(std::span<const Branch> branches, std::span<const std::string> apparatus_ids,
                               const SubsystemLayout& layout) {
  const SubsystemLayout app_layout = layout.sub_layout(apparatus_ids);
  const SubsystemLayout rest_layout = layout.complement(apparatus_ids);
  const auto app_off = layout.offsets(apparatus_ids);
  const auto rest_off = layout.offsets(rest_layout.ids());
  CVector amps = CVector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
  for (const auto& b : branches) {
    if (!(b.conditional_state.layout() == rest_layout)) {
      throw DimensionError("branch conditional state does not match the complement layout");
    }
    const std::size_t k = app_layout.basis_index(b.pointer_labels);
    for (std::size_t r = 0; r < rest_off.size(); ++r) {
      amps(static_cast<Eigen::Index>(app_off[k] + rest_off[r])) += b.amplitude * b.conditional_state[r];
    }
  }
  return StateVector(layout, std::move(amps));
}

std::size_t select_branch(std::span<const Branch> branches, std::uint64_t seed) {
  if (branches.empty()) throw ArgumentError("no branches to select from");
  Rng rng(seed);
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (std::size_t k = 0; k < branches.size(); ++k) {
    cumulative += branches[k].weight;
    if (u < cumulative) return k;
  }
  return branches.size() - 1;
}

SampledBranch sample_branch(const StateVector& s, std::string_view apparatus, std::uint64_t seed) {
  const auto ids = as_vector(apparatus);
  return sample_branch(s, std::span<const std::string>(ids), seed);
}

SampledBranch sample_branch(const StateVector& s, std::span<const std::string> apparatus_ids, std::uint64_t seed) {
  const auto branches = branch_decomposition(s, apparatus_ids);
  Branch chosen = branches[select_branch(branches, seed)];
  Branch unit = chosen;
  unit.amplitude = 1.0;
  StateVector collapsed = recombine_branches(std::span<const Branch>(&unit, 1), apparatus_ids, s.layout());
  return {std::move(chosen), std::move(collapsed)};
}

}  // namespace univqm
