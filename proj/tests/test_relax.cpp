#include <gtest/gtest.h>

#include "momsos/gmp.hpp"
#include "momsos/relax.hpp"

using namespace momsos;

namespace {

Polynomial x1() { return Polynomial::variable(1, 0); }
Polynomial c1(double v) { return Polynomial::constant(1, v); }
SemialgebraicSet interval_set() { return normalize(1, {x1() * (c1(1) - x1())}); }
GmpProblem interval_pop() { return make_pop((c1(1) - x1()) * x1(), interval_set()); }

GmpProblem volume_problem(std::size_t cap) {
  return make_volume(normalize(1, {x1() * (c1(0.5) - x1())}), Box{{0.0}, {1.0}}, cap);
}

LinearForm form(std::initializer_list<std::pair<const std::size_t, double>> f) { return f; }

// LMI point reproducing a given slot vector; T selects free slots exactly.
std::vector<double> lmi_point(const RelaxationPlan& plan, const Eigen::VectorXd& z) {
  std::vector<double> y;
  for (auto s : plan.free_slots) y.push_back(z(static_cast<Eigen::Index>(s)));
  return y;
}

double min_eigenvalue(const std::vector<Eigen::MatrixXd>& blocks) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks) {
    lo = std::min(lo, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b).eigenvalues().minCoeff());
  }
  return lo;
}

struct Solved {
  double primal, dual;
  SdpSolution moment, sos;
};

Solved solve_both(const GmpProblem& p, std::size_t d) {
  const MomentRelaxation r = build_relaxation(p, d);
  const SosProgram s = build_sos_dual(p, d);
  const auto boxes = measure_boxes(p);
  Solved out;
  out.moment = solve_preconditioned(r.sdp, relaxation_congruence(r, boxes));
  out.sos = solve_preconditioned(s.sdp, sos_congruence(s, p, boxes));
  out.primal = p.reported_value(r.value(out.moment));
  out.dual = p.reported_value(s.value(out.sos));
  return out;
}

}  // namespace

TEST(LocalizingMatrix, MomentMatrixOrderOne) {
  const LinearFormMatrix m = localizing_matrix(c1(1), 1);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0][0], form({{0, 1.0}}));
  EXPECT_EQ(m[0][1], form({{1, 1.0}}));
  EXPECT_EQ(m[1][0], form({{1, 1.0}}));
  EXPECT_EQ(m[1][1], form({{2, 1.0}}));
}

TEST(LocalizingMatrix, IntervalConstraintOrderOne) {
  const LinearFormMatrix m = localizing_matrix(x1() - x1() * x1(), 1);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0][0], form({{1, 1.0}, {2, -1.0}}));
}

TEST(LocalizingMatrix, BallConstraintOrderTwo) {
  const LinearFormMatrix m = localizing_matrix(c1(1) - x1() * x1(), 2);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0][0], form({{0, 1.0}, {2, -1.0}}));
  EXPECT_EQ(m[0][1], form({{1, 1.0}, {3, -1.0}}));
  EXPECT_EQ(m[1][1], form({{2, 1.0}, {4, -1.0}}));
}

TEST(LocalizingMatrix, DegreeTooHigh) {
  EXPECT_THROW(localizing_matrix(x1().pow(3), 1), DegreeError);
}

TEST(BuildRelaxation, IntervalPopOrderOne) {
  const GmpProblem p = interval_pop();
  const MomentRelaxation r = build_relaxation(p, 1);
  EXPECT_EQ(r.sdp.block_sizes, (std::vector<std::size_t>{2, 1, 1}));
  EXPECT_EQ(r.plan.eq_rows.size(), 1u);
  EXPECT_TRUE(r.plan.consistent());
  // z0 = 1 is eliminated; the engine maximizes -(z1 - z2).
  EXPECT_DOUBLE_EQ(r.plan.z0(0), 1.0);
  EXPECT_EQ(r.plan.free_slots, (std::vector<std::size_t>{1, 2}));
  EXPECT_DOUBLE_EQ(r.plan.objective(1), -1.0);
  EXPECT_DOUBLE_EQ(r.plan.objective(2), 1.0);
  const PseudoMoments pm = r.plan.moments({0.4, 0.3});
  EXPECT_EQ(pm.z[0], (std::vector<double>{1.0, 0.4, 0.3}));
  EXPECT_DOUBLE_EQ(r.value({0.4, 0.3}), -(0.4 - 0.3));
  // Slack blocks are M_1(z), L(x - x^2), L(1 - x^2).
  const auto s = r.sdp.slack({0.4, 0.3});
  EXPECT_DOUBLE_EQ(s[0](0, 1), 0.4);
  EXPECT_DOUBLE_EQ(s[1](0, 0), 0.1);
  EXPECT_DOUBLE_EQ(s[2](0, 0), 0.7);
}

TEST(BuildRelaxation, VolumeOrderTwoHasFiveRows) {
  const MomentRelaxation r = build_relaxation(volume_problem(4), 2);
  EXPECT_EQ(r.plan.eq_rows.size(), 5u);
  EXPECT_TRUE(r.plan.consistent());
}

TEST(BuildRelaxation, InequalityBecomesScalarBlock) {
  const GmpProblem p = interval_pop().with_enforced_mass();
  const MomentRelaxation r = build_relaxation(p, 1);
  ASSERT_EQ(r.sdp.block_sizes.size(), 4u);
  EXPECT_EQ(r.sdp.block_sizes.back(), 1u);
  EXPECT_EQ(r.plan.blocks.back().kind, BlockOrigin::Kind::inequality);
}

TEST(BuildRelaxation, InconsistentRowsReported) {
  const GmpProblem p = interval_pop().with_equality({{c1(2)}, 3.0});
  EXPECT_FALSE(build_relaxation(p, 1).plan.consistent());
}

TEST(BuildRelaxation, BelowMinimalOrderThrows) {
  EXPECT_THROW(build_relaxation(make_pop(x1().pow(4), interval_set()), 1), DegreeError);
}

TEST(BuildRelaxation, TrueMomentsAreFeasible) {
  // Dirac masses and the Lebesgue split satisfy every block.
  const GmpProblem p = interval_pop();
  for (std::size_t d = 1; d <= 4; ++d) {
    const MomentRelaxation r = build_relaxation(p, d);
    for (double t : {0.0, 0.25, 0.7, 1.0}) {
      MomentGenerator g{{{1.0, {t}}}, {}};
      const auto z = g.moments(MonomialBasis(1, 2 * d));
      const Eigen::VectorXd zv = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
      const auto y = lmi_point(r.plan, zv);
      EXPECT_LE((r.plan.slots_from(y) - zv).norm(), 1e-12);
      EXPECT_GE(min_eigenvalue(r.sdp.slack(y)), -1e-12);
      EXPECT_NEAR(p.reported_value(r.value(y)), t - t * t, 1e-12);
    }
  }
  const GmpProblem v = volume_problem(6);
  const MomentRelaxation r = build_relaxation(v, 3);
  std::vector<double> z;
  for (const Box& box : {Box{{0.0}, {0.5}}, Box{{0.5}, {1.0}}}) {
    MomentGenerator g{{}, {{1.0, box}}};
    for (double m : g.moments(MonomialBasis(1, 6))) z.push_back(m);
  }
  const Eigen::VectorXd zv = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  const auto y = lmi_point(r.plan, zv);
  EXPECT_LE((r.plan.slots_from(y) - zv).norm(), 1e-12);
  EXPECT_GE(min_eigenvalue(r.sdp.slack(y)), -1e-12);
  EXPECT_NEAR(r.value(y), 0.5, 1e-12);
}

TEST(BuildRelaxation, PrefixLayout) {
  const GmpProblem p = volume_problem(8);
  for (std::size_t d = 1; d <= 3; ++d) {
    const RelaxationPlan a = build_relaxation(p, d).plan;
    const RelaxationPlan b = build_relaxation(p, d + 1).plan;
    for (std::size_t i = 0; i < 2; ++i) {
      const MonomialBasis ba(1, 2 * d);
      for (std::size_t k = 0; k < ba.size(); ++k) {
        EXPECT_EQ(a.slot(i, ba[k]) - a.measures[i].offset, b.slot(i, ba[k]) - b.measures[i].offset);
      }
    }
  }
}

TEST(SosDual, IntervalPopValueZero) {
  const GmpProblem p = interval_pop();
  const SosProgram s = build_sos_dual(p, 1);
  const SdpSolution sol = solve(s.sdp);
  ASSERT_EQ(sol.status, SdpStatus::optimal) << sol.message;
  EXPECT_NEAR(p.reported_value(s.value(sol)), 0.0, 1e-7);
}

TEST(SosDual, ZeroObjectiveWithMassBound) {
  const GmpProblem p(
      {{"mu", interval_set(), {}}}, {Polynomial(1)}, {}, {{{c1(1)}, 1.0}});
  const SosProgram s = build_sos_dual(p, 1);
  const SdpSolution sol = solve(s.sdp);
  ASSERT_EQ(sol.status, SdpStatus::optimal) << sol.message;
  EXPECT_NEAR(s.value(sol), 0.0, 1e-7);
  const SosCertificate cert = s.certificate(sol.y, p);
  ASSERT_EQ(cert.y.size(), 1u);
  EXPECT_GE(cert.y[0], -1e-9);
}

TEST(SosDual, StrongDualityOnInstances) {
  const GmpProblem pop = interval_pop();
  for (std::size_t d = 1; d <= 4; ++d) {
    const Solved s = solve_both(pop, d);
    ASSERT_EQ(s.moment.status, SdpStatus::optimal);
    ASSERT_EQ(s.sos.status, SdpStatus::optimal);
    EXPECT_NEAR(s.primal, s.dual, 1e-6 * (1 + std::abs(s.primal))) << "pop d=" << d;
  }
  const GmpProblem vol = volume_problem(21);
  for (std::size_t d = 1; d <= 4; ++d) {
    const Solved s = solve_both(vol, d);
    ASSERT_EQ(s.moment.status, SdpStatus::optimal);
    ASSERT_EQ(s.sos.status, SdpStatus::optimal);
    EXPECT_NEAR(s.primal, s.dual, 1e-6 * (1 + std::abs(s.primal))) << "volume d=" << d;
    // Weak duality for a maximization: every SOS value bounds the relaxation.
    EXPECT_GE(s.dual, s.primal - 1e-7);
    EXPECT_GE(s.primal, 0.5 - 1e-6);
  }
}

TEST(VerifyCertificate, AcceptsSolverCertificate) {
  const GmpProblem p = interval_pop();
  for (std::size_t d = 1; d <= 3; ++d) {
    const SosProgram s = build_sos_dual(p, d);
    const SdpSolution sol = solve(s.sdp);
    ASSERT_EQ(sol.status, SdpStatus::optimal);
    const CertificateReport rep = verify_certificate(s.certificate(sol.y, p), p, d, 500, 7);
    EXPECT_TRUE(rep.passed) << "d=" << d;
    EXPECT_EQ(rep.samples_checked, 500u);
    EXPECT_LE(rep.identity_residual, 1e-6);
  }
}

TEST(VerifyCertificate, NegativeGramEigenvalue) {
  const GmpProblem p = interval_pop();
  const SosProgram s = build_sos_dual(p, 2);
  const SdpSolution sol = solve(s.sdp);
  SosCertificate cert = s.certificate(sol.y, p);
  Eigen::MatrixXd& g = cert.grams[0][0];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  const Eigen::VectorXd v = es.eigenvectors().col(0);
  g += (-0.1 - es.eigenvalues()(0)) * v * v.transpose();
  const CertificateReport rep = verify_certificate(cert, p, 2, 100);
  EXPECT_FALSE(rep.passed);
  EXPECT_NEAR(rep.min_gram_eigenvalue, -0.1, 1e-9);
  bool psd_flag = false;
  for (const auto& v2 : rep.violations) psd_flag |= v2.kind == CertificateViolation::Kind::gram_psd;
  EXPECT_TRUE(psd_flag);
}

TEST(VerifyCertificate, PerturbedMultiplier) {
  const GmpProblem p = interval_pop();
  const SosProgram s = build_sos_dual(p, 2);
  const SdpSolution sol = solve(s.sdp);
  SosCertificate cert = s.certificate(sol.y, p);
  cert.x[0] += 0.1;
  const CertificateReport rep = verify_certificate(cert, p, 2, 100);
  EXPECT_FALSE(rep.passed);
  bool identity_flag = false;
  for (const auto& v : rep.violations) identity_flag |= v.kind == CertificateViolation::Kind::identity;
  EXPECT_TRUE(identity_flag);
  EXPECT_NEAR(rep.identity_residual, 0.1, 1e-6);
}

TEST(VerifyCertificate, WrongShape) {
  const GmpProblem p = interval_pop();
  SosCertificate cert;
  cert.order = 1;
  const CertificateReport rep = verify_certificate(cert, p, 1, 10);
  EXPECT_FALSE(rep.passed);
  ASSERT_FALSE(rep.violations.empty());
  EXPECT_STREQ(to_string(rep.violations[0].kind), "shape");
}

TEST(TracePenalty, MatchesPenalizedProblem) {
  const GmpProblem p = interval_pop();
  for (std::size_t d = 1; d <= 3; ++d) {
    const MomentRelaxation a = add_trace_penalty(build_relaxation(p, d), 0.01);
    const MomentRelaxation b = build_relaxation(penalized_problem(p, d, 0.01), d);
    EXPECT_LE((a.plan.objective - b.plan.objective).norm(), 1e-15);
    EXPECT_EQ(a.sdp.b, b.sdp.b);
  }
  EXPECT_THROW(penalized_problem(p, 1, 0.0), Error);
}

TEST(TracePenalty, TracePolynomial) {
  // Tr M_2(z) = z0 + z2 + z4 in one variable.
  EXPECT_EQ(trace_polynomial(1, 2), c1(1) + x1().pow(2) + x1().pow(4));
}
