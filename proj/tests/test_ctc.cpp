#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "univqm/ctc.hpp"
#include "univqm/random.hpp"

using namespace univqm;

namespace {

CtcScenario random_scenario(Rng& rng, std::size_t cr_dim, std::size_t ctc_dim) {
  std::vector<Subsystem> subs;
  std::vector<std::string> cr;
  if (cr_dim > 0) {
    subs.push_back(Subsystem::numbered("cr", cr_dim));
    cr.push_back("cr");
  }
  subs.push_back(Subsystem::numbered("ctc", ctc_dim));
  const SubsystemLayout layout(subs);
  return CtcScenario(layout, cr, {"ctc"}, haar_unitary(layout, rng));
}

DensityMatrix random_mixed(const SubsystemLayout& layout, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(layout.total_dim());
  CMatrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = rng.complex_normal();
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace();
  return DensityMatrix(layout, 0.5 * (rho + rho.adjoint()));
}

CtcScenario identity_scenario() {
  const SubsystemLayout layout({Subsystem::numbered("ctc", 2)});
  return CtcScenario(layout, {}, {"ctc"}, UnitaryOperator::identity(layout));
}

}  // namespace

TEST(CtcScenario, Validation) {
  const SubsystemLayout layout({Subsystem::numbered("a", 2), Subsystem::numbered("b", 2)});
  const auto id = UnitaryOperator::identity(layout);
  EXPECT_THROW(CtcScenario(layout, {"a"}, {}, id), ArgumentError);
  EXPECT_THROW(CtcScenario(layout, {"a"}, {"a"}, id), ArgumentError);
  EXPECT_THROW(CtcScenario(layout, {}, {"b"}, id), ArgumentError);
  EXPECT_THROW(CtcScenario(layout, {"a"}, {"zz"}, id), LayoutError);
  EXPECT_NO_THROW(CtcScenario(layout, {"a"}, {"b"}, id));
}

TEST(LinearConsistency, QubitFlipHasOneStrictDirection) {
  const auto scenario = grandfather_scenario(GrandfatherVariant::qubit_flip);
  const auto strict = linear_consistency_basis(scenario, ConsistencyMode::strict);
  ASSERT_EQ(strict.dimension(), 1u);
  const CVector v = strict.eigenspaces[0].basis.col(0);
  EXPECT_LT(std::abs(v(0) - std::sqrt(0.5)), 1e-10);
  EXPECT_LT(std::abs(v(1) - std::sqrt(0.5)), 1e-10);

  const auto ray = linear_consistency_basis(scenario, ConsistencyMode::ray);
  ASSERT_EQ(ray.eigenspaces.size(), 2u);
  EXPECT_EQ(ray.dimension(), 2u);
  // Eigenspaces come in ascending phase order within (-pi, pi].
  EXPECT_NEAR(ray.eigenspaces[0].phase, 0.0, 1e-12);
  EXPECT_NEAR(ray.eigenspaces[1].phase, std::numbers::pi, 1e-12);
}

TEST(LinearConsistency, RepeatedTraversalsStayConsistent) {
  const auto scenario = grandfather_scenario(GrandfatherVariant::qubit_flip);
  const CVector v = linear_consistency_basis(scenario, ConsistencyMode::strict).eigenspaces[0].basis.col(0);
  StateVector s(scenario.layout(), v);
  for (int i = 0; i < 100; ++i) s = apply_unitary(scenario.loop_unitary(), s);
  EXPECT_LE((s.amplitudes() - v).norm(), 1e-7);
}

TEST(LinearConsistency, CrCoupledGrandfather) {
  const auto scenario = grandfather_scenario(GrandfatherVariant::cr_coupled);
  // The loop unitary is a 4-cycle 00 -> 01 -> 10 -> 11 -> 00: one eigenvector per fourth root of unity.
  EXPECT_EQ(linear_consistency_basis(scenario, ConsistencyMode::strict).dimension(), 1u);
  EXPECT_EQ(linear_consistency_basis(scenario, ConsistencyMode::ray).eigenspaces.size(), 4u);
}

TEST(LinearConsistency, IdentityIsEverywhereConsistent) {
  const auto scenario = identity_scenario();
  EXPECT_EQ(linear_consistency_basis(scenario, ConsistencyMode::strict).dimension(), 2u);
  const auto stats = admissible_fraction(scenario, 200, ConsistencyMode::strict, 4);
  EXPECT_EQ(stats.fraction, 1.0);
}

TEST(LinearConsistency, PhasesMergeAcrossBranchCut) {
  const SubsystemLayout layout({Subsystem::numbered("ctc", 2)});
  CMatrix u = CMatrix::Zero(2, 2);
  u(0, 0) = std::polar(1.0, std::numbers::pi);
  u(1, 1) = std::polar(1.0, -std::numbers::pi + 1e-10);
  const CtcScenario scenario(layout, {}, {"ctc"}, UnitaryOperator(layout, u));
  const auto ray = linear_consistency_basis(scenario, ConsistencyMode::ray);
  ASSERT_EQ(ray.eigenspaces.size(), 1u);
  EXPECT_EQ(ray.eigenspaces[0].dimension(), 2u);
  EXPECT_EQ(linear_consistency_basis(scenario, ConsistencyMode::strict).dimension(), 0u);
}

TEST(LinearConsistency, BasisIsOrthonormalEigenbasis) {
  Rng rng(61);
  for (int t = 0; t < 20; ++t) {
    const auto scenario = random_scenario(rng, 2, 3);
    const auto ray = linear_consistency_basis(scenario, ConsistencyMode::ray);
    EXPECT_EQ(ray.dimension(), 6u);
    for (const auto& e : ray.eigenspaces) {
      EXPECT_LE(e.max_residual, 1e-10);
      EXPECT_LT(max_abs_deviation(e.basis.adjoint() * e.basis, CMatrix::Identity(e.basis.cols(), e.basis.cols())),
                1e-10);
    }
  }
}

TEST(LinearConsistency, CombinationsOfConsistentStatesAreConsistent) {
  Rng rng(62);
  // Loop unitary with a 3-dimensional eigenvalue-1 subspace.
  const SubsystemLayout layout({Subsystem::numbered("cr", 2), Subsystem::numbered("ctc", 3)});
  const CMatrix w = random_unitary_matrix(6, rng);
  CVector phases(6);
  phases << 1.0, 1.0, 1.0, std::polar(1.0, 0.5), std::polar(1.0, 2.0), std::polar(1.0, -1.0);
  const CtcScenario scenario(layout, {"cr"}, {"ctc"}, UnitaryOperator(layout, w * phases.asDiagonal() * w.adjoint()));
  const auto strict = linear_consistency_basis(scenario, ConsistencyMode::strict);
  ASSERT_EQ(strict.dimension(), 3u);
  const CMatrix& basis = strict.eigenspaces[0].basis;
  for (int t = 0; t < 100; ++t) {
    CVector c(3);
    for (int i = 0; i < 3; ++i) c(i) = rng.complex_normal();
    const auto check = is_consistent_initial_state(scenario, StateVector(layout, basis * c), ConsistencyMode::strict);
    EXPECT_TRUE(check.consistent);
    EXPECT_LE(check.residual, 1e-8);
  }
}

TEST(LinearConsistency, RayModeAcceptsPhaseStrictRejects) {
  const auto scenario = grandfather_scenario(GrandfatherVariant::qubit_flip);
  const StateVector minus(scenario.layout(), (CVector(2) << 1.0, -1.0).finished());
  EXPECT_FALSE(is_consistent_initial_state(scenario, minus, ConsistencyMode::strict).consistent);
  EXPECT_TRUE(is_consistent_initial_state(scenario, minus, ConsistencyMode::ray).consistent);
}

TEST(Admissibility, QubitFlipStrictScanFindsNothing) {
  const auto stats =
      admissible_fraction(grandfather_scenario(GrandfatherVariant::qubit_flip), 2000, ConsistencyMode::strict, 8);
  EXPECT_EQ(stats.n_consistent, 0u);
  EXPECT_GT(stats.min_residual, 1e-3);
  EXPECT_LE(stats.min_residual, stats.median_residual);
  EXPECT_LE(stats.median_residual, stats.max_residual);
  EXPECT_THROW(admissible_fraction(identity_scenario(), 0, ConsistencyMode::strict, 1), ArgumentError);
}

TEST(Admissibility, HaarUnitariesRarelyAdmitStrictStates) {
  Rng rng(63);
  int zero = 0;
  for (int t = 0; t < 100; ++t) {
    if (linear_consistency_basis(random_scenario(rng, 2, 2), ConsistencyMode::strict).dimension() == 0) ++zero;
  }
  EXPECT_GE(zero, 99);
}

TEST(DeutschMap, MatchesBruteForcePartialTrace) {
  Rng rng(64);
  for (int t = 0; t < 10; ++t) {
    const auto scenario = random_scenario(rng, 3, 2);
    const auto rho_cr = random_mixed(scenario.cr_layout(), rng);
    const auto rho_ctc = random_mixed(scenario.ctc_layout(), rng);
    const DeutschMap map(scenario, rho_cr);
    const auto u = support::to_mat(scenario.loop_unitary().matrix());
    const auto joint = oracle::kron(support::to_mat(rho_cr.matrix()), support::to_mat(rho_ctc.matrix()));
    const auto out = oracle::multiply(oracle::multiply(u, joint), oracle::adjoint(u));
    EXPECT_LT(support::max_diff(map.apply(rho_ctc.matrix()), oracle::partial_trace(out, {3, 2}, {false, true})), 1e-12);
    // Superoperator acts on column-stacked matrices.
    CVector vec(4);
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < 2; ++r) vec(c * 2 + r) = rho_ctc.matrix()(r, c);
    const CVector image = map.superoperator() * vec;
    const CMatrix direct = map.apply(rho_ctc.matrix());
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < 2; ++r) EXPECT_LT(std::abs(image(c * 2 + r) - direct(r, c)), 1e-12);
  }
}

TEST(Deutsch, GrandfatherFixedPointIsMaximallyMixed) {
  const auto scenario = grandfather_scenario(GrandfatherVariant::qubit_flip);
  const auto rho_cr = DensityMatrix::maximally_mixed(scenario.cr_layout());
  for (auto method : {DeutschMethod::iterate, DeutschMethod::spectral}) {
    const auto sol = deutsch_fixed_point(scenario, rho_cr, method);
    EXPECT_LT(max_abs_deviation(sol.rho_ctc.matrix(), 0.5 * CMatrix::Identity(2, 2)), 1e-10);
    EXPECT_LE(sol.residual, 1e-10);
  }
}

TEST(Deutsch, CrCoupledFixedPointIsUnique) {
  const auto scenario = grandfather_scenario(GrandfatherVariant::cr_coupled);
  const auto rho_cr = to_density(StateVector::basis(scenario.cr_layout(), {"0"}));
  const auto a = deutsch_fixed_point(scenario, rho_cr, DeutschMethod::iterate);
  const auto b = deutsch_fixed_point(scenario, rho_cr, DeutschMethod::spectral);
  EXPECT_EQ(a.fixed_space_dimension, 1u);
  EXPECT_LT(max_abs_deviation(a.rho_ctc.matrix(), 0.5 * CMatrix::Identity(2, 2)), 1e-10);
  EXPECT_LT(max_abs_deviation(a.rho_ctc.matrix(), b.rho_ctc.matrix()), 1e-6);
  const auto out = ctc_output_state(scenario, rho_cr, a);
  EXPECT_LT(max_abs_deviation(out.matrix(), 0.5 * CMatrix::Identity(2, 2)), 1e-10);
}

TEST(Deutsch, OscillationFallsBackToAveraging) {
  const auto scenario = grandfather_scenario(GrandfatherVariant::qubit_flip);
  DeutschOptions options;
  CMatrix start = CMatrix::Zero(2, 2);
  start(0, 0) = 1.0;
  options.initial = start;
  const auto sol =
      deutsch_fixed_point(scenario, DensityMatrix::maximally_mixed(scenario.cr_layout()), DeutschMethod::iterate, options);
  EXPECT_TRUE(sol.averaged);
  EXPECT_LT(max_abs_deviation(sol.rho_ctc.matrix(), 0.5 * CMatrix::Identity(2, 2)), 1e-10);
}

TEST(Deutsch, IterationLimitRaisesSolverError) {
  const auto scenario = grandfather_scenario(GrandfatherVariant::qubit_flip);
  DeutschOptions options;
  CMatrix start = CMatrix::Zero(2, 2);
  start(0, 0) = 1.0;
  options.initial = start;
  options.max_iterations = 5;
  try {
    deutsch_fixed_point(scenario, DensityMatrix::maximally_mixed(scenario.cr_layout()), DeutschMethod::iterate, options);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_GT(e.best_residual(), 1e-8);
  }
}

TEST(Deutsch, RandomScenariosHaveFixedPoints) {
  Rng rng(65);
  int unique = 0;
  for (int t = 0; t < 100; ++t) {
    const auto scenario = random_scenario(rng, 2, 2);
    const auto rho_cr = random_mixed(scenario.cr_layout(), rng);
    const auto a = deutsch_fixed_point(scenario, rho_cr, DeutschMethod::iterate);
    const auto b = deutsch_fixed_point(scenario, rho_cr, DeutschMethod::spectral);
    EXPECT_LE(a.residual, 1e-8);
    EXPECT_LE(b.residual, 1e-8);
    EXPECT_GE(a.rho_ctc.min_eigenvalue(), -1e-9);
    if (b.fixed_space_dimension == 1) {
      ++unique;
      EXPECT_LT(max_abs_deviation(a.rho_ctc.matrix(), b.rho_ctc.matrix()), 1e-6);
    }
  }
  EXPECT_GT(unique, 90);
}

TEST(Deutsch, OutputStateChecksProvenance) {
  Rng rng(66);
  const auto s1 = random_scenario(rng, 2, 2);
  const auto s2 = random_scenario(rng, 2, 2);
  const auto rho_cr = DensityMatrix::maximally_mixed(s1.cr_layout());
  const auto sol = deutsch_fixed_point(s1, rho_cr, DeutschMethod::spectral);
  EXPECT_NO_THROW(ctc_output_state(s1, rho_cr, sol));
  EXPECT_THROW(ctc_output_state(s2, rho_cr, sol), ArgumentError);
  EXPECT_THROW(ctc_output_state(s1, random_mixed(s1.cr_layout(), rng), sol), ArgumentError);
}

TEST(Deutsch, CrInputMustMatchLayout) {
  const auto scenario = grandfather_scenario(GrandfatherVariant::cr_coupled);
  const SubsystemLayout other({Subsystem::numbered("x", 2)});
  EXPECT_THROW(deutsch_fixed_point(scenario, DensityMatrix::maximally_mixed(other), DeutschMethod::iterate),
               DimensionError);
}
