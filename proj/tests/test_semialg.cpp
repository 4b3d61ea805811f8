#include <gtest/gtest.h>

#include <cmath>

#include "momsos/semialg.hpp"

using namespace momsos;

namespace {

Polynomial x1() { return Polynomial::variable(1, 0); }
Polynomial c1(double v) { return Polynomial::constant(1, v); }

SemialgebraicSet interval_set() { return normalize(1, {x1() * (c1(1) - x1())}); }

}  // namespace

TEST(Normalize, IntervalGetsUnitAndBall) {
  const SemialgebraicSet s = interval_set();
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0], c1(1));
  EXPECT_EQ(s[1], x1() - x1() * x1());
  EXPECT_EQ(s[2], c1(1) - x1() * x1());
  EXPECT_TRUE(s.has_unit_first());
  ASSERT_TRUE(s.ball_index());
  EXPECT_EQ(*s.ball_index(), 2u);
}

TEST(Normalize, AlreadyNormalIsUnchanged) {
  const std::vector<Polynomial> g = {c1(1), c1(1) - x1() * x1()};
  const SemialgebraicSet s = normalize(1, g);
  EXPECT_EQ(s.constraints(), g);
}

TEST(Normalize, EmptyListIsUnitBall) {
  const SemialgebraicSet s = normalize(2, {});
  ASSERT_EQ(s.size(), 2u);
  const Polynomial x = Polynomial::variable(2, 0), y = Polynomial::variable(2, 1);
  EXPECT_EQ(s[0], Polynomial::constant(2, 1));
  EXPECT_EQ(s[1], Polynomial::constant(2, 1) - x * x - y * y);
}

TEST(Normalize, Idempotent) {
  const SemialgebraicSet s = interval_set();
  EXPECT_EQ(normalize(s), s);
}

TEST(Rescale, SubstitutesScaledVariable) {
  const SemialgebraicSet s(1, {c1(1), c1(4) - x1() * x1()});
  const auto [r, map] = rescale(s, 2.0);
  EXPECT_EQ(r[1], c1(4) - 4.0 * x1() * x1());
  const double in[] = {1.0}, out[] = {1.01};
  EXPECT_TRUE(r.contains(in));
  EXPECT_FALSE(r.contains(out));
  EXPECT_DOUBLE_EQ(map.radius, 2.0);
}

TEST(Rescale, UnitRadiusIsIdentity) {
  const SemialgebraicSet s = interval_set();
  EXPECT_EQ(rescale(s, 1.0).first, s);
  EXPECT_THROW(rescale(s, 0.0), Error);
  EXPECT_THROW(rescale(s, -1.0), Error);
}

TEST(Rescale, DiracMomentsMapBack) {
  const SemialgebraicSet s(1, {c1(1), c1(4) - x1() * x1()});
  const auto [r, map] = rescale(s, 2.0);
  const MonomialBasis b(1, 6);
  std::vector<double> at1, at2;
  for (const auto& m : b.monomials()) {
    at1.push_back(std::pow(1.0, m[0]));
    at2.push_back(std::pow(2.0, m[0]));
  }
  const auto back = map.to_original(at1, b);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_DOUBLE_EQ(back[i], at2[i]);
  const auto fwd = map.to_rescaled(at2, b);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_DOUBLE_EQ(fwd[i], at1[i]);
}

TEST(Membership, Examples) {
  const SemialgebraicSet s = interval_set();
  const double mid[] = {0.5}, outside[] = {1.5};
  EXPECT_TRUE(membership_oracle(s, mid));
  EXPECT_FALSE(membership_oracle(s, outside));
  const double edge[] = {1.0, 0.0};
  EXPECT_TRUE(membership_oracle(normalize(2, {}), edge));
}

TEST(Membership, DimensionMismatchThrows) {
  const double pt[] = {0.1, 0.2};
  EXPECT_THROW(interval_set().contains(pt), DimensionError);
  EXPECT_THROW(SemialgebraicSet(2, {x1()}), DimensionError);
}
