#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qnlab/broyden.hpp"
#include "qnlab/diagnostics.hpp"
#include "test_util.hpp"

using namespace qnlab;
using qnlab::test::diag;
using qnlab::test::rel_err;
using qnlab::test::vec;

namespace {

Matrix random_spd(SeededRng& rng, Index d, Scalar shift = Scalar(0.05)) {
  const Matrix g = Matrix::NullaryExpr(d, d, [&] { return rng.normal(); });
  return g * g.transpose() / static_cast<Scalar>(d) + shift * Matrix::Identity(d, d);
}

StoppingRule fgap_rule(const ReferenceSolution& ref, Scalar tol, int max_iters) {
  StoppingRule s;
  s.fgap_tol = tol;
  s.max_iters = max_iters;
  s.x_star = ref.x_star;
  return s;
}

// Hard cubic d = 40, kappa = 1e3, from the default starting point.
struct CubicRun {
  ObjectiveModel obj = make_hard_cubic_for_kappa(40, 1e3);
  ReferenceSolution ref = reference_solution(obj);
  Vector x0 = random_start(40, 0);

  Trajectory run_with(const Method& m, const Matrix& b0, int max_iters = 300) const {
    return run(obj, x0, b0, m, fgap_rule(ref, 1e-16, max_iters));
  }
  Matrix LI() const { return obj.constants().L * Matrix::Identity(40, 40); }
  Matrix muI() const { return obj.constants().mu * Matrix::Identity(40, 40); }
};

const CubicRun& cubic() {
  static const CubicRun r;
  return r;
}

const Trajectory& cubic_bfgs_LI() {
  static const Trajectory t = cubic().run_with(Method::bfgs(), cubic().LI());
  return t;
}

}  // namespace

TEST(Potential, IdentityIsZero) {
  for (Index d : {1, 3, 40}) EXPECT_EQ(potential(Matrix::Identity(d, d)), 0);
}

TEST(Potential, ScaledIdentityMatchesOracle) {
  const Scalar kappa = 1e3;
  const Matrix a = Matrix::Identity(40, 40) / kappa;
  EXPECT_NEAR(static_cast<double>(potential(a)), 236.350211159285482082159, 1e-12);
  EXPECT_NEAR(static_cast<double>(potential_scaled_identity(40, 1 / kappa)), 236.350211159285482082159, 1e-12);
  EXPECT_NEAR(static_cast<double>(potential(a)), static_cast<double>(40 * (1 / kappa - 1 + std::log(kappa))), 1e-12);
}

TEST(Potential, DiagonalMatchesOracle) {
  EXPECT_NEAR(static_cast<double>(potential(diag({1, std::numbers::e_v<Scalar>}))), 0.7182818284590452353602875, 1e-17);
}

TEST(Potential, RejectsIndefinite) {
  EXPECT_THROW(potential(diag({1, -1})), DiagnosticsError);
  EXPECT_THROW(potential(diag({1, 0})), DiagnosticsError);
}

TEST(PotentialProperty, NonNegativeOnRandomSpd) {
  SeededRng rng(31);
  for (int i = 0; i < 1000; ++i) {
    const Index d = 1 + i % 12;
    const Matrix a = random_spd(rng, d, Scalar(1e-3));
    const Scalar psi = potential(a);
    EXPECT_GE(psi, 0);
    if ((a - Matrix::Identity(d, d)).norm() > 1e-6) {
      EXPECT_GT(psi, 0);
    }
  }
}

TEST(WeightScheme, SquareRootsCompose) {
  SeededRng rng(4);
  const Matrix h = random_spd(rng, 7);
  const auto w = WeightScheme::minimizer_hessian(h);
  for (int i = 0; i < 5; ++i) {
    const Vector v = rng.normal_vector(7);
    EXPECT_LE((w.sqrt_apply(w.sqrt_apply(v)) - h * v).norm(), 1e-10 * (h * v).norm());
    EXPECT_LE((w.inv_sqrt_apply(w.sqrt_apply(v)) - v).norm(), 1e-12 * v.norm());
    EXPECT_NEAR(static_cast<double>(w.quad(v)), static_cast<double>(v.dot(h * v)), 1e-12 * static_cast<double>(w.quad(v)));
    EXPECT_NEAR(static_cast<double>(w.inv_quad(v)), static_cast<double>(w.inv_sqrt_apply(v).squaredNorm()),
                1e-12 * static_cast<double>(w.inv_quad(v)));
  }
  const auto l = WeightScheme::gradient_lipschitz(4, 3);
  const Vector v = vec({1, 2, 3});
  EXPECT_EQ(l.sqrt_apply(l.sqrt_apply(v)), 4 * v);
  EXPECT_EQ(l.P(), Matrix(4 * Matrix::Identity(3, 3)));
  EXPECT_THROW(WeightScheme::gradient_lipschitz(0, 3), DiagnosticsError);
}

TEST(WeightScheme, WeightedTraceAndPotentialAgreeWithExplicitWeighting) {
  SeededRng rng(5);
  const Matrix h = random_spd(rng, 6);
  const Matrix b = random_spd(rng, 6);
  for (const auto& w : {WeightScheme::minimizer_hessian(h), WeightScheme::gradient_lipschitz(3, 6), WeightScheme::identity(6)}) {
    const Matrix bh = w.weigh(b);
    EXPECT_NEAR(static_cast<double>(w.weighted_trace(b)), static_cast<double>(bh.trace()), 1e-12);
    EXPECT_NEAR(static_cast<double>(w.weighted_potential(b, linalg::log_det_spd(b))), static_cast<double>(potential(bh)),
                1e-11);
  }
}

TEST(StepQuantities, HalfStepRatioOnQuadratics) {
  const auto q = make_random_quadratic(8, 50, 2);
  const auto ref = reference_solution(q);
  StoppingRule stop;
  stop.grad_tol = 1e-6;
  stop.max_iters = 20;
  const auto traj = run(q, random_start(8, 1), Matrix::Identity(8, 8), Method::bfgs(), stop);
  const auto& c = q.constants();
  const auto& A = dynamic_cast<const QuadraticObjective&>(q.impl()).A();
  int checked = 0;
  for (const auto& w : {WeightScheme::gradient_lipschitz(c.L, 8), WeightScheme::minimizer_hessian(A), WeightScheme::identity(8)}) {
    for (const auto& rec : traj.records) {
      if (!rec.has_step) continue;
      const auto d = weighted_step_quantities(q, rec, w, ref, c);
      EXPECT_NEAR(static_cast<double>(d.alpha_hat), 0.5, 1e-8) << "k=" << rec.k;
      EXPECT_EQ(d.C_k, 0);
      EXPECT_GT(d.m_hat, 0);
      EXPECT_GT(d.cos_theta, 0);
      EXPECT_LE(d.cos_theta, 1);
      // The step-size lower bound holds with equality when C_k = 0.
      EXPECT_NEAR(static_cast<double>(check_step_bounds(d, WeightKind::gradient_lipschitz, c).alpha), 0.0, 1e-7);
      ++checked;
    }
  }
  EXPECT_GT(checked, 3);
}

TEST(StepQuantities, GradientRatioOnDiagonalQuadratic) {
  const auto q = make_quadratic(diag({1, 4}), Vector::Zero(2));
  const auto ref = reference_solution(q);
  StoppingRule stop;
  stop.grad_tol = 1e-8;
  stop.max_iters = 30;
  const auto traj = run(q, vec({1, 1}), Matrix::Identity(2, 2), Method::gradient_descent(), stop);
  const auto w = WeightScheme::gradient_lipschitz(4, 2);
  ASSERT_GT(traj.iterations(), 5);
  for (const auto& rec : traj.records) {
    if (!rec.has_step) continue;
    const auto d = weighted_step_quantities(q, rec, w, ref, q.constants());
    EXPECT_GE(d.q_hat, 0.5 * (1 - 1e-12));
  }
}

TEST(StepQuantities, SteepestDescentCosineIsOneUnderIdentity) {
  const auto& r = cubic();
  StoppingRule stop;
  stop.max_iters = 5;
  const auto traj = run(r.obj, r.x0, r.LI(), Method::gradient_descent(), stop);
  for (const auto& rec : traj.records)
    if (rec.has_step) {
      const auto d = weighted_step_quantities(r.obj, rec, WeightScheme::identity(40), r.ref, r.obj.constants());
      EXPECT_NEAR(static_cast<double>(d.cos_theta), 1.0, 1e-15);
    }
}

TEST(StepQuantities, DistortionVanishesAtMinimizer) {
  EXPECT_EQ(distortion(cubic().obj.constants(), 0), 0);
  EXPECT_GT(distortion(cubic().obj.constants(), 1e-6), 0);
}

TEST(StepQuantities, RejectsGapAtOrBelowReference) {
  const auto w = WeightScheme::identity(2);
  SmoothnessConstants c;
  c.mu = c.L = c.kappa = 1;
  EXPECT_THROW(weighted_step_quantities(vec({1, 0}), vec({-1, 0}), vec({-1, 0}), 0.5, 0, w, c), DiagnosticsError);
}

TEST(Quadrature, GaussLegendreMatchesOracle) {
  const auto [nodes, weights] = gauss_legendre(16);
  ASSERT_EQ(nodes.size(), 16u);
  EXPECT_LE(std::abs(nodes[0] - 0.005299532504175033701922913L), 1e-19);
  EXPECT_LE(std::abs(weights[0] - 0.01357622970587704742589029L), 1e-19);
  Scalar sum = 0, moment = 0;
  for (int i = 0; i < 16; ++i) {
    sum += weights[i];
    moment += weights[i] * std::pow(nodes[i], 31);
  }
  EXPECT_NEAR(static_cast<double>(sum), 1.0, 1e-17);
  EXPECT_NEAR(static_cast<double>(moment), 1.0 / 32, 1e-17);
}

TEST(AverageHessian, ConstantOnQuadratic) {
  const auto q = make_random_quadratic(5, 10, 1);
  const auto& A = dynamic_cast<const QuadraticObjective&>(q.impl()).A();
  for (int order : {1, 4, 16}) EXPECT_LE(rel_err(average_hessian(q, random_start(5, 1), random_start(5, 2), order), A), 1e-15);
}

TEST(AverageHessian, DegenerateSegmentIsPointHessian) {
  const auto& r = cubic();
  EXPECT_EQ(average_hessian(r.obj, r.x0, r.x0), r.obj.hessian_at(r.x0));
}

TEST(AverageHessian, ReproducesGradientDifference) {
  const auto& traj = cubic_bfgs_LI();
  const auto& obj = cubic().obj;
  for (const auto& rec : traj.records) {
    if (!rec.has_step) continue;
    const Matrix J = average_hessian(obj, rec.x, rec.x + rec.s);
    EXPECT_LE((rec.y - J * rec.s).norm(), 1e-6 * rec.y.norm()) << "k=" << rec.k;
  }
}

TEST(OneStepIdentity, HoldsForBfgsAndGradientDescentUnderEveryScheme) {
  const auto& r = cubic();
  const auto& c = r.obj.constants();
  const auto schemes = {WeightScheme::identity(40), WeightScheme::gradient_lipschitz(c.L, 40),
                        WeightScheme::minimizer_hessian(r.ref.hess_star)};
  for (const Trajectory& traj : {cubic_bfgs_LI(), r.run_with(Method::gradient_descent(), r.LI(), 60)}) {
    for (std::size_t i = 0; i + 1 < traj.records.size(); ++i) {
      const auto& rec = traj.records[i];
      const Scalar gap = r.obj.value_change(r.ref.x_star, rec.x);
      const Scalar gap_next = r.obj.value_change(r.ref.x_star, traj.records[i + 1].x);
      for (const auto& w : schemes) {
        const auto chk = check_one_step_identity(weighted_step_quantities(rec, gap, w, c), gap, gap_next, 1e-10);
        EXPECT_TRUE(chk.pass) << traj.method.name() << " k=" << rec.k << " residual " << static_cast<double>(chk.residual);
        EXPECT_LE(std::abs(chk.residual), 1e-7);
      }
    }
  }
}

TEST(TraceDetIdentities, ScalarCase) {
  const Matrix b = Matrix::Constant(1, 1, 1);
  const auto next = bfgs_update_pair(HessianPair::from_b0(b), vec({1}), vec({2}));
  EXPECT_NEAR(static_cast<double>(next.B.trace()), 2.0, 1e-18);
  const auto r = check_trace_det_identities(b, next.B, vec({1}), vec({2}));
  EXPECT_LE(r.trace, 1e-18);
  EXPECT_LE(r.log_det, 1e-18);
}

TEST(TraceDetIdentities, SecantFixedPointLeavesTraceAndDetUnchanged) {
  SeededRng rng(8);
  const Matrix b = random_spd(rng, 5);
  const Vector s = rng.normal_vector(5);
  const Vector y = b * s;
  const auto next = bfgs_update_pair(HessianPair::from_b0(b), s, y);
  const auto r = check_trace_det_identities(b, next.B, s, y);
  EXPECT_LE(r.trace, 1e-15);
  EXPECT_LE(r.log_det, 1e-15);
  EXPECT_NEAR(static_cast<double>(next.B.trace()), static_cast<double>(b.trace()), 1e-14);
}

TEST(TraceDetIdentities, HoldAlongBfgsRunInBothWeightings) {
  const auto& traj = cubic_bfgs_LI();
  const auto& r = cubic();
  const auto mats = detail::replay_matrices(traj);
  const auto lip = WeightScheme::gradient_lipschitz(r.obj.constants().L, 40);
  const auto hess = WeightScheme::minimizer_hessian(r.ref.hess_star);
  for (std::size_t i = 0; i + 1 < mats.size(); i += 7) {
    const auto& rec = traj.records[i];
    for (const auto* w : {&lip, &hess}) {
      const auto fast = weighted_trace_det_residuals(*w, mats[i], mats[i + 1], linalg::log_det_spd(mats[i]),
                                                     linalg::log_det_spd(mats[i + 1]), rec.s, rec.y);
      EXPECT_LE(fast.trace, 1e-8) << "k=" << i;
      EXPECT_LE(fast.log_det, 1e-8) << "k=" << i;
    }
    // The explicit weighted form agrees.
    const auto slow = check_trace_det_identities(lip.weigh(mats[i]), lip.weigh(mats[i + 1]), lip.sqrt_apply(rec.s),
                                                 lip.inv_sqrt_apply(rec.y));
    EXPECT_LE(slow.trace, 1e-8);
    EXPECT_LE(slow.log_det, 1e-8);
  }
}

TEST(PotentialRecursion, EqualityOnFirstStepFromLipschitzIdentity) {
  const auto& r = cubic();
  const AnalysisContext ctx{r.obj, r.ref, r.obj.constants()};
  const auto rec = check_potential_recursion(ctx, cubic_bfgs_LI(), WeightScheme::gradient_lipschitz(r.obj.constants().L, 40));
  ASSERT_FALSE(rec.step_margin.empty());
  EXPECT_NEAR(static_cast<double>(rec.step_margin[0]), 0.0, 1e-8);
}

TEST(PotentialRecursion, StepAndCumulativeMarginsHoldAlongRun) {
  const auto& r = cubic();
  const AnalysisContext ctx{r.obj, r.ref, r.obj.constants()};
  for (const Matrix& b0 : {r.LI(), r.muI()}) {
    const Trajectory traj = r.run_with(Method::bfgs(), b0);
    for (const auto& w : {WeightScheme::gradient_lipschitz(r.obj.constants().L, 40), WeightScheme::minimizer_hessian(r.ref.hess_star)}) {
      const auto rec = check_potential_recursion(ctx, traj, w);
      const Scalar psi0 = w.weighted_potential(b0, linalg::log_det_spd(b0));
      for (std::size_t k = 0; k < rec.step_margin.size(); ++k) {
        EXPECT_GE(rec.step_margin[k], -1e-7 * std::max<Scalar>(1, psi0)) << "k=" << k;
        EXPECT_GE(rec.cumulative_margin[k], -1e-6 * std::max<Scalar>(1, psi0)) << "k=" << k;
      }
    }
  }
}

TEST(PotentialRecursion, RequiresBfgs) {
  const auto& r = cubic();
  const AnalysisContext ctx{r.obj, r.ref, r.obj.constants()};
  const Trajectory dfp = r.run_with(Method::dfp(), r.LI(), 3);
  EXPECT_THROW(check_potential_recursion(ctx, dfp, WeightScheme::identity(40)), DiagnosticsError);
}

TEST(StepBounds, HoldAlongHardCubicRun) {
  const auto& r = cubic();
  const auto& c = r.obj.constants();
  const auto lip = WeightScheme::gradient_lipschitz(c.L, 40);
  const auto hess = WeightScheme::minimizer_hessian(r.ref.hess_star);
  const Scalar slack = 1e-9 + 10 * 1e-10;
  for (const auto& rec : cubic_bfgs_LI().records) {
    if (!rec.has_step) continue;
    const auto ml = check_step_bounds(weighted_step_quantities(r.obj, rec, lip, r.ref, c), WeightKind::gradient_lipschitz, c);
    const auto mh = check_step_bounds(weighted_step_quantities(r.obj, rec, hess, r.ref, c), WeightKind::minimizer_hessian, c);
    for (Scalar m : {ml.alpha, ml.q, ml.ray, *ml.m_lower, *ml.m_upper, mh.alpha, mh.q, mh.ray})
      EXPECT_GE(m, -slack) << "k=" << rec.k;
  }
}

TEST(StepBounds, IdentityWeightHasNoBound) {
  StepDiagnostics d;
  d.alpha_hat = d.q_hat = d.m_hat = d.cos_theta = 1;
  EXPECT_THROW(check_step_bounds(d, WeightKind::identity, cubic().obj.constants()), DiagnosticsError);
}

TEST(HessianSandwich, EqualityOnQuadratic) {
  const auto q = make_random_quadratic(6, 30, 3);
  const auto ref = reference_solution(q);
  const auto m = check_hessian_sandwich(q, random_start(6, 1), random_start(6, 2), ref, q.constants(), 0);
  EXPECT_NEAR(static_cast<double>(m.worst()), 0.0, 1e-12);
  EXPECT_GE(m.worst(), -1e-12);
}

TEST(HessianSandwich, MinimizerSegmentIsExact) {
  const auto& r = cubic();
  EXPECT_EQ(average_hessian(r.obj, r.ref.x_star, r.ref.x_star), r.ref.hess_star);
}

TEST(HessianSandwich, HoldsAlongHardCubicRun) {
  const auto& r = cubic();
  const auto& c = r.obj.constants();
  const auto& traj = cubic_bfgs_LI();
  for (std::size_t i = 0; i + 1 < traj.records.size(); i += 10) {
    const Scalar gap = r.obj.value_change(r.ref.x_star, traj.records[i].x);
    const auto m = check_hessian_sandwich(r.obj, traj.records[i].x, traj.records[i + 1].x, r.ref, c, distortion(c, gap));
    EXPECT_GE(m.worst(), -1e-8) << "k=" << i;
  }
}

// Oracle values from tests/oracles/generate_oracles.py.
TEST(LinearBounds, MatchOracle) {
  struct Case {
    int k;
    Scalar psi, kappa, C0;
    double first, improved, second, threshold;
    bool improved_active, second_active;
  };
  const Case cases[] = {
      {1, 0, 4, 0, 0.75, 11.0 / 12.0, 11.0 / 12.0, 0, true, true},
      {50, 7.5L, 100, 0.2L, 0.69773168923858233283, 0.87015654382071061756, 0.84624610004886937924, 153, true, false},
      {400, 30, 1000, 0.01L, 0.69239961200895583173, 0.87631033203165048797, 0.87515386664023107337, 90.9, true, true},
  };
  for (const auto& c : cases) {
    const auto b = global_linear_bounds(c.k, c.psi, c.kappa, c.C0);
    EXPECT_NEAR(static_cast<double>(b.first_phase), c.first, 1e-15) << c.k;
    EXPECT_NEAR(static_cast<double>(b.improved), c.improved, 1e-15) << c.k;
    EXPECT_NEAR(static_cast<double>(b.second_phase), c.second, 1e-15) << c.k;
    EXPECT_NEAR(static_cast<double>(b.second_phase_threshold), c.threshold, 1e-12) << c.k;
    EXPECT_EQ(b.improved_active, c.improved_active) << c.k;
    EXPECT_EQ(b.second_phase_active, c.second_active) << c.k;
  }
}

TEST(LinearBounds, ImprovedRateInactiveBeforePotentialThreshold) {
  const auto b = global_linear_bounds(5, 7.5L, 100, 0);
  EXPECT_FALSE(b.improved_active);
  EXPECT_EQ(b.tightest(), b.first_phase);
  EXPECT_TRUE(global_linear_bounds(8, 7.5L, 100, 0).improved_active);
}

TEST(LinearBounds, LipschitzInitializationMatchesClosedForm) {
  for (int k : {1, 10, 200})
    for (Scalar C0 : {Scalar(0), Scalar(0.3), Scalar(5)}) {
      const auto t = global_linear_bounds(k, 0, 1e3, C0);
      const auto c = closed_form_linear_L(k, 1e3, C0);
      EXPECT_EQ(t.first_phase, c.first);
      EXPECT_EQ(t.second_phase, c.second);
      EXPECT_EQ(t.second_phase_active, c.second_active);
    }
}

TEST(LinearBounds, RejectsInvalidInputs) {
  EXPECT_THROW(global_linear_bounds(0, 0, 4, 0), DiagnosticsError);
  EXPECT_THROW(global_linear_bounds(1, -1, 4, 0), DiagnosticsError);
  EXPECT_THROW(global_linear_bounds(1, 0, 0.5L, 0), DiagnosticsError);
}

TEST(SuperlinearBounds, MatchOracle) {
  {
    const auto b = global_superlinear_bounds(40, 3, 2, 0, 10, 5);
    EXPECT_NEAR(static_cast<double>(b.surrogate / 1.0056585161637496769e-45L), 1.0, 1e-14);
    EXPECT_EQ(b.li_closed_form, 1);
    EXPECT_NEAR(static_cast<double>(b.mu_closed_form / 2.3175444272158467514e-22L), 1.0, 1e-14);
    EXPECT_TRUE(b.measured_is_surrogate);
  }
  {
    const auto b = global_superlinear_bounds(200, 25, 10, 0.001L, 100, 4);
    EXPECT_NEAR(static_cast<double>(b.surrogate / 3.0089774286098968682e-173L), 1.0, 1e-13);
    EXPECT_EQ(b.li_closed_form, 1);
    EXPECT_NEAR(static_cast<double>(b.mu_closed_form / 6.4536624907718407294e-197L), 1.0, 1e-13);
  }
}

TEST(SuperlinearBounds, ExactNewtonSeedGivesZero) {
  for (int k : {1, 5, 50}) EXPECT_EQ(global_superlinear_bounds(k, 0, 3, 0, 100, 10).surrogate, 0);
}

TEST(SuperlinearBounds, MeasuredSumIsNeverLooserThanSurrogate) {
  const Scalar psi_bar0 = 4, C0 = 0.2L, kappa = 50;
  const Scalar cap = sum_C_bound(psi_bar0, C0, kappa);
  for (Scalar frac : {Scalar(0), Scalar(0.5), Scalar(1)}) {
    const auto b = global_superlinear_bounds(300, 9, psi_bar0, C0, kappa, 10, frac * cap);
    EXPECT_LE(b.measured, b.surrogate);
  }
}

TEST(SuperlinearBounds, PotentialsOfIdentityInitializationsRespectClosedForms) {
  SeededRng rng(12);
  const Index d = 10;
  const Matrix h = random_spd(rng, d, 1);
  const Vector ev = linalg::symmetric_eigenvalues(h);
  const Scalar mu = ev.minCoeff(), L = ev.maxCoeff(), kappa = L / mu;
  const auto w = WeightScheme::minimizer_hessian(h);
  const Matrix LI = L * Matrix::Identity(d, d), muI = mu * Matrix::Identity(d, d);
  EXPECT_LE(w.weighted_potential(LI, linalg::log_det_spd(LI)), static_cast<Scalar>(d) * kappa);
  EXPECT_LE(w.weighted_potential(muI, linalg::log_det_spd(muI)), static_cast<Scalar>(d) * std::log(kappa));
}

TEST(PhaseThresholds, ExplicitForms) {
  const auto li = phase_thresholds(40, 1e3, 0, B0Kind::L);
  EXPECT_EQ(li.linear_phase_one, 1);
  EXPECT_EQ(li.linear_phase_two, 0);
  EXPECT_EQ(li.superlinear, 40 * Scalar(1e3));
  const auto mu = phase_thresholds(40, 1e3, 0, B0Kind::mu);
  EXPECT_NEAR(static_cast<double>(mu.linear_phase_one), 236.350211159285482082159, 1e-12);
  EXPECT_LE(mu.linear_phase_one, 40 * std::log(Scalar(1e3)));
  EXPECT_NEAR(static_cast<double>(mu.superlinear), static_cast<double>(40 * std::log(Scalar(1e3))), 1e-12);
  EXPECT_THROW(phase_thresholds(40, 1e3, 0, B0Kind::other), DiagnosticsError);
}

TEST(ClassifyB0, ExactMatchesOnly) {
  SmoothnessConstants c;
  c.mu = 0.5;
  c.L = 3;
  EXPECT_EQ(classify_b0(3 * Matrix::Identity(4, 4), c), B0Kind::L);
  EXPECT_EQ(classify_b0(0.5L * Matrix::Identity(4, 4), c), B0Kind::mu);
  EXPECT_EQ(classify_b0(Matrix::Identity(4, 4), c), B0Kind::other);
}

TEST(Analysis, ReplayMatchesRetainedMatrices) {
  const auto& r = cubic();
  StoppingRule stop;
  stop.max_iters = 25;
  const Trajectory kept = run(r.obj, r.x0, r.LI(), Method::bfgs(), stop, {}, true);
  Trajectory bare = kept;
  for (auto& rec : bare.records) rec.B_before.reset(), rec.H_before.reset();
  const auto mats = detail::replay_matrices(bare);
  ASSERT_EQ(mats.size(), kept.records.size());
  for (std::size_t i = 0; i < mats.size(); ++i) EXPECT_EQ(mats[i], *kept.records[i].B_before) << "k=" << i;
}

TEST(Analysis, RelativeGapStartsAtOneAndBoundsDominate) {
  const auto& r = cubic();
  const AnalysisContext ctx{r.obj, r.ref, r.obj.constants()};
  const auto an = analyze_trajectory(ctx, cubic_bfgs_LI());
  ASSERT_FALSE(an.rows.empty());
  EXPECT_EQ(an.rows[0].rel_gap, 1);
  EXPECT_FALSE(an.rows[0].bound_thm1.has_value());
  EXPECT_EQ(an.b0_kind, B0Kind::L);
  EXPECT_NEAR(static_cast<double>(*an.psi_bar0), 0.0, 1e-15);
  for (const auto& row : an.rows) {
    if (!row.bound_thm1) continue;
    EXPECT_LE(row.rel_gap, *row.bound_thm1 * (1 + 1e-7)) << "k=" << row.k;
    EXPECT_LE(row.rel_gap, *row.bound_thm2 * (1 + 1e-7)) << "k=" << row.k;
  }
}

TEST(Validate, HardCubicLipschitzRunPasses) {
  const auto& r = cubic();
  const auto rep = validate_trajectory(r.obj, cubic_bfgs_LI(), r.ref, r.obj.constants());
  EXPECT_TRUE(rep.passed()) << rep.failures().front().name << " at k=" << rep.failures().front().k_begin;
  for (const char* name : {"recorded_step", "orthogonality", "one_step_identity[LI]", "one_step_identity[hess*]",
                           "trace_identity[LI]", "det_identity[hess*]", "potential_recursion[LI]",
                           "potential_cumulative[hess*]", "hessian_sandwich", "linear_rate_first_phase",
                           "linear_rate_improved", "superlinear_rate_measured", "li_linear_rate", "li_superlinear_rate",
                           "secant_curvature_range[LI]", "sum_C_bound"})
    EXPECT_TRUE(rep.has_check(name)) << name;
  EXPECT_EQ(rep.metadata.at("b0"), "LI");
}

TEST(Validate, MuInitializationAndGradientDescentPass) {
  const auto& r = cubic();
  const auto mu = validate_trajectory(r.obj, r.run_with(Method::bfgs(), r.muI()), r.ref, r.obj.constants());
  EXPECT_TRUE(mu.passed());
  EXPECT_TRUE(mu.has_check("mu_linear_rate"));
  EXPECT_TRUE(mu.has_check("mu_superlinear_rate"));
  const auto gd = validate_trajectory(r.obj, r.run_with(Method::gradient_descent(), r.LI(), 120), r.ref, r.obj.constants());
  EXPECT_TRUE(gd.passed());
  EXPECT_FALSE(gd.has_check("linear_rate_first_phase"));
  EXPECT_FALSE(gd.has_check("potential_recursion[LI]"));
}

TEST(Validate, CorruptedStepLengthIsDetectedAtThatIteration) {
  const auto& r = cubic();
  Trajectory bad = cubic_bfgs_LI();
  bad.records[3].eta *= 2;
  const auto rep = validate_trajectory(r.obj, bad, r.ref, r.obj.constants());
  EXPECT_FALSE(rep.passed());
  EXPECT_EQ(rep.first_failure_iteration(), 3);
  EXPECT_EQ(rep.failing_iterations("one_step_identity[LI]"), std::vector<int>{3});
  EXPECT_EQ(rep.failing_iterations("orthogonality"), std::vector<int>{3});
  EXPECT_EQ(rep.failing_iterations("recorded_step"), std::vector<int>{3});
}

TEST(Validate, QuadraticSuperlinearBoundDominates) {
  const auto q = make_random_quadratic(10, 30, 6);
  const auto ref = reference_solution(q);
  const Matrix b0 = q.constants().L * Matrix::Identity(10, 10);
  StoppingRule stop;
  stop.grad_tol = 1e-7;
  stop.max_iters = 50;
  const auto traj = run(q, random_start(10, 2), b0, Method::bfgs(), stop);
  const auto rep = validate_trajectory(q, traj, ref, q.constants());
  EXPECT_TRUE(rep.passed());
  const AnalysisContext ctx{q, ref, q.constants()};
  const auto an = analyze_trajectory(ctx, traj);
  EXPECT_EQ(an.C0, 0);
  for (const auto& row : an.rows) {
    if (!row.bound_thm2) continue;
    const Scalar closed = std::min<Scalar>(1, std::pow(*an.psi_tilde0 / row.k, row.k));
    EXPECT_NEAR(static_cast<double>(*row.bound_thm2), static_cast<double>(closed), 1e-12 * static_cast<double>(closed) + 1e-300);
    EXPECT_LE(row.rel_gap, *row.bound_thm2 * (1 + 1e-7));
  }
}

TEST(Validate, DixonCompanionsAgree) {
  const auto& r = cubic();
  const auto obj = make_hard_cubic_for_kappa(20, 1e2);
  const auto ref = reference_solution(obj);
  LineSearchConfig ls;
  ls.dd_rel_tol = 1e-12;
  StoppingRule stop;
  stop.max_iters = 30;
  const Matrix b0 = obj.constants().L * Matrix::Identity(20, 20);
  const Vector x0 = random_start(20, 3);
  const auto bfgs = run(obj, x0, b0, Method::bfgs(), stop, ls);
  const auto dfp = run(obj, x0, b0, Method::dfp(), stop, ls);
  const auto bro = run(obj, x0, b0, Method::broyden(0.5L), stop, ls);
  ValidationConfig cfg;
  cfg.ls_tol = 1e-12;
  const auto rep = validate_trajectory(obj, bfgs, ref, obj.constants(), cfg, {&dfp, &bro});
  EXPECT_TRUE(rep.passed_prefix("dixon_agreement"));
  EXPECT_TRUE(rep.has_check("dixon_agreement[dfp]"));
  EXPECT_TRUE(rep.has_check("dixon_agreement[broyden:0.5]"));
  (void)r;
}

TEST(Validate, ReferenceMustBeTighterThanFinalGap) {
  const auto& r = cubic();
  ReferenceSolution loose = r.ref;
  loose.grad_norm_certificate = 1e-3;
  EXPECT_THROW(validate_trajectory(r.obj, cubic_bfgs_LI(), loose, r.obj.constants()), ReferencePrecisionError);
}

TEST(Report, PassIffMarginAboveNegativeSlack) {
  BoundReport rep;
  rep.add("a", 0, -1e-9, 1e-8);
  rep.add("a", 1, 0.5, 0);
  EXPECT_TRUE(rep.passed());
  rep.add("b", 2, -1e-7, 1e-8);
  rep.add("b", 4, std::numeric_limits<Scalar>::quiet_NaN(), 1);
  EXPECT_FALSE(rep.passed());
  EXPECT_TRUE(rep.passed("a"));
  EXPECT_FALSE(rep.passed("b"));
  EXPECT_EQ(rep.first_failure_iteration(), 2);
  EXPECT_EQ(rep.failing_iterations("b"), (std::vector<int>{2, 4}));
  EXPECT_EQ(rep.min_margin(), Scalar(-1e-7));
  const auto s = rep.summary();
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].failures, 2);
  EXPECT_EQ(s[1].first_failure_k, 2);
}
