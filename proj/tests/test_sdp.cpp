#include <gtest/gtest.h>

#include <random>

#include "momsos/gmp.hpp"
#include "momsos/relax.hpp"
#include "momsos/sdp.hpp"
#include "support.hpp"

using namespace momsos;

namespace {

SdpProblem scalar_bound() {
  SdpProblem p;
  p.block_sizes = {1};
  p.c.add(0, 0, 0, 1.0);
  p.a.resize(1);
  p.a[0].add(0, 0, 0, 1.0);
  p.b = {1.0};
  return p;
}

bool is_psd(const std::vector<Eigen::MatrixXd>& blocks) {
  for (const auto& b : blocks) {
    if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b).eigenvalues().minCoeff() < -1e-9) return false;
  }
  return true;
}

}  // namespace

TEST(Solve, ScalarBound) {
  const SdpSolution s = solve(scalar_bound());
  ASSERT_EQ(s.status, SdpStatus::optimal) << s.message;
  ASSERT_EQ(s.y.size(), 1u);
  EXPECT_NEAR(s.y[0], 1.0, 1e-7);
  EXPECT_NEAR(s.dual_value, 1.0, 1e-7);
  EXPECT_NEAR(s.primal_value, 1.0, 1e-7);
}

TEST(Solve, IntervalPopOrderOne) {
  const Polynomial x = Polynomial::variable(1, 0), one = Polynomial::constant(1, 1);
  const GmpProblem p = make_pop((one - x) * x, normalize(1, {x * (one - x)}));
  const MomentRelaxation r = build_relaxation(p, 1);
  const SdpSolution s = solve(r.sdp);
  ASSERT_EQ(s.status, SdpStatus::optimal) << s.message;
  EXPECT_NEAR(p.reported_value(r.value(s)), 0.0, 1e-7);
}

TEST(Solve, RandomInstanceBeatsSampling) {
  std::mt19937_64 rng(2024);
  // Strictly feasible at y0 by construction; bounded because b = A(X0), X0 > 0.
  const Eigen::Index n = 3;
  const int m = 2;
  Eigen::MatrixXd s0 = fixtures::random_symmetric(n, rng);
  s0 = s0 * s0.transpose() + Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd x0 = fixtures::random_symmetric(n, rng);
  x0 = x0 * x0.transpose() + Eigen::MatrixXd::Identity(n, n);
  const std::vector<double> y0 = {0.3, -0.2};
  SdpProblem p;
  p.block_sizes = {3};
  Eigen::MatrixXd c = s0;
  std::vector<Eigen::MatrixXd> a;
  for (int k = 0; k < m; ++k) {
    a.push_back(fixtures::random_symmetric(n, rng));
    c += y0[static_cast<std::size_t>(k)] * a.back();
    p.a.push_back(BlockMatrix::from_dense({a.back()}));
    p.b.push_back(a.back().cwiseProduct(x0).sum());
  }
  p.c = BlockMatrix::from_dense({c}, 1e-12);

  const SdpSolution s = solve(p);
  ASSERT_EQ(s.status, SdpStatus::optimal) << s.message;
  const ResidualReport rep = residual_report(p, s);
  EXPECT_TRUE(rep.ok());
  EXPECT_LE(rep.primal_residual, 1e-7);
  EXPECT_LE(rep.slack_mismatch, 1e-7);

  // Oracle: best feasible point among 1e6 uniform samples of a box that
  // contains the feasible set (|y_k| is bounded via <X0, C - sum y A> >= 0).
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double radius = 0;
  for (int k = 0; k < m; ++k) radius = std::max(radius, std::abs(s.y[static_cast<std::size_t>(k)]));
  radius = 4 * radius + 4;
  double best = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < 1000000; ++t) {
    const double y1 = radius * u(rng), y2 = radius * u(rng);
    const Eigen::MatrixXd sl = c - y1 * a[0] - y2 * a[1];
    if (Eigen::LLT<Eigen::MatrixXd>(sl).info() != Eigen::Success) continue;
    best = std::max(best, p.b[0] * y1 + p.b[1] * y2);
  }
  ASSERT_TRUE(std::isfinite(best));
  EXPECT_LE(best, s.dual_value + 1e-4);
}

TEST(Solve, PlantedOptimaMatch) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 50; ++t) {
    const fixtures::PlantedSdp inst = fixtures::planted_sdp(rng);
    const SdpSolution s = solve(inst.problem);
    ASSERT_EQ(s.status, SdpStatus::optimal) << "instance " << t << ": " << s.message;
    EXPECT_LE(std::abs(s.dual_value - inst.value) / (1 + std::abs(inst.value)), 1e-6)
        << "instance " << t;
    EXPECT_TRUE(is_psd(inst.problem.slack(inst.y)));
  }
}

TEST(Solve, PreconditionedAgreesWithPlain) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const fixtures::PlantedSdp inst = fixtures::planted_sdp(rng);
    const SdpSolution s = solve_preconditioned(inst.problem, {});
    ASSERT_EQ(s.status, SdpStatus::optimal) << s.message;
    EXPECT_NEAR(s.dual_value, inst.value, 1e-6 * (1 + std::abs(inst.value)));
  }
}

TEST(Solve, InfeasibleDetected) {
  // max y s.t. diag(1 - y, y - 2) PSD has no feasible point.
  SdpProblem p;
  p.block_sizes = {2};
  p.diagonal = {true};
  p.c.add(0, 0, 0, 1.0);
  p.c.add(0, 1, 1, -2.0);
  p.a.resize(1);
  p.a[0].add(0, 0, 0, 1.0);
  p.a[0].add(0, 1, 1, -1.0);
  p.b = {1.0};
  EXPECT_EQ(solve(p).status, SdpStatus::infeasible);
}

TEST(Solve, UnboundedDetected) {
  // max y s.t. 1 + y >= 0.
  SdpProblem p;
  p.block_sizes = {1};
  p.c.add(0, 0, 0, 1.0);
  p.a.resize(1);
  p.a[0].add(0, 0, 0, -1.0);
  p.b = {1.0};
  EXPECT_EQ(solve(p).status, SdpStatus::unbounded);
}

TEST(Solve, Deterministic) {
  std::mt19937_64 rng(17);
  const fixtures::PlantedSdp inst = fixtures::planted_sdp(rng);
  const SdpSolution a = solve(inst.problem), b = solve(inst.problem);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Solve, ValidatesInput) {
  SdpProblem p = scalar_bound();
  p.b.push_back(1.0);
  EXPECT_THROW(solve(p), Error);
  SdpProblem q = scalar_bound();
  q.c.add(0, 0, 3, 1.0);
  EXPECT_THROW(solve(q), Error);
}

TEST(ResidualReport, OptimalSolutionPasses) {
  const SdpProblem p = scalar_bound();
  const SdpSolution s = solve(p);
  const ResidualReport rep = residual_report(p, s);
  EXPECT_TRUE(rep.ok());
  EXPECT_LE(rep.gap, 1e-7);
}

TEST(ResidualReport, PerturbationIsFlagged) {
  std::mt19937_64 rng(3);
  fixtures::PlantedSdp inst = fixtures::planted_sdp(rng);
  SdpSolution s = solve(inst.problem);
  ASSERT_EQ(s.status, SdpStatus::optimal);
  ASSERT_TRUE(residual_report(inst.problem, s).ok());
  s.y[0] += 1e-3;
  EXPECT_FALSE(residual_report(inst.problem, s).ok());
}

TEST(ResidualReport, ZeroProblem) {
  SdpProblem p;
  p.block_sizes = {2};
  p.a.resize(1);
  p.b = {0.0};
  const SdpSolution s = solve(p);
  ASSERT_EQ(s.status, SdpStatus::optimal);
  ASSERT_EQ(s.y.size(), 1u);
  EXPECT_EQ(s.y[0], 0.0);
  const ResidualReport rep = residual_report(p, s);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.primal_value, 0.0);
  EXPECT_EQ(rep.dual_value, 0.0);
  EXPECT_EQ(rep.primal_residual, 0.0);
  EXPECT_EQ(rep.slack_mismatch, 0.0);
}
