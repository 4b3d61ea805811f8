#include <gtest/gtest.h>

#include <random>
#include <set>

#include "momsos/poly.hpp"

using namespace momsos;

namespace {

// Counts exponent vectors with sum <= d by brute force.
std::size_t count_exponents(std::size_t n, int d) {
  std::size_t count = 0;
  std::vector<int> e(n, 0);
  while (true) {
    int s = 0;
    for (int v : e) s += v;
    if (s <= d) ++count;
    std::size_t j = 0;
    while (j < n && ++e[j] > d) e[j++] = 0;
    if (j == n) break;
  }
  return count;
}

Polynomial x1() { return Polynomial::variable(1, 0); }
Polynomial one1() { return Polynomial::constant(1, 1.0); }

}  // namespace

TEST(BasisSize, SmallCases) {
  EXPECT_EQ(basis_size(1, 2), 3u);
  EXPECT_EQ(basis_size(2, 0), 1u);
  EXPECT_EQ(basis_size(3, 4), 35u);
  EXPECT_EQ(basis_size(3, 4), count_exponents(3, 4));
}

TEST(BasisSize, MatchesEnumeration) {
  for (std::size_t n = 1; n <= 4; ++n) {
    for (int d = 0; d <= 6; ++d) {
      EXPECT_EQ(basis_size(n, static_cast<std::size_t>(d)), count_exponents(n, d))
          << "n=" << n << " d=" << d;
    }
  }
}

TEST(BasisSize, OverflowIsReported) {
  EXPECT_THROW(basis_size(200, 200), SizeLimitError);
}

TEST(MonomialBasis, UnivariateOrder) {
  const MonomialBasis b(1, 2);
  EXPECT_EQ(b.unrank(0), Monomial(std::vector<int>{0}));
  EXPECT_EQ(b.unrank(1), Monomial(std::vector<int>{1}));
  EXPECT_EQ(b.unrank(2), Monomial(std::vector<int>{2}));
}

TEST(MonomialBasis, RankUnrankBijection) {
  for (std::size_t n = 1; n <= 3; ++n) {
    const MonomialBasis b(n, 5);
    std::set<std::vector<int>> seen;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const Monomial m = b.unrank(i);
      EXPECT_EQ(b.rank(m), i);
      std::vector<int> e;
      for (std::size_t j = 0; j < n; ++j) e.push_back(m[j]);
      EXPECT_TRUE(seen.insert(e).second);
    }
    EXPECT_EQ(seen.size(), count_exponents(n, 5));
  }
}

TEST(MonomialBasis, GradedAndPrefixStable) {
  const MonomialBasis small(2, 2), big(2, 4);
  for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small[i], big[i]);
  for (std::size_t i = 1; i < big.size(); ++i) EXPECT_LE(big[i - 1].degree(), big[i].degree());
}

TEST(Polynomial, ProductExpands) {
  const Polynomial p = x1() * (one1() - x1());
  EXPECT_DOUBLE_EQ(p.coefficient(Monomial(std::vector<int>{1})), 1.0);
  EXPECT_DOUBLE_EQ(p.coefficient(Monomial(std::vector<int>{2})), -1.0);
  EXPECT_DOUBLE_EQ(p.coefficient(Monomial(std::vector<int>{0})), 0.0);
  EXPECT_EQ(p.degree(), 2);
  EXPECT_EQ(p, x1() - x1() * x1());
}

TEST(Polynomial, AdditiveIdentity) {
  const Polynomial p = x1() * x1() + 3.0 * x1();
  EXPECT_EQ(p + Polynomial(1), p);
}

TEST(Polynomial, Eval) {
  const Polynomial p = x1() - x1() * x1();
  const double x[] = {0.5};
  EXPECT_DOUBLE_EQ(p.eval(x), 0.25);
}

TEST(Polynomial, EvalAgreesWithDirectFormula) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  const Polynomial x = Polynomial::variable(2, 0), y = Polynomial::variable(2, 1);
  const Polynomial p = (x + 2.0 * y).pow(3) - x * y + Polynomial::constant(2, 0.5);
  for (int t = 0; t < 100; ++t) {
    const double pt[] = {u(rng), u(rng)};
    const double direct = std::pow(pt[0] + 2 * pt[1], 3) - pt[0] * pt[1] + 0.5;
    EXPECT_NEAR(p.eval(pt), direct, 1e-12);
  }
}

TEST(Riesz, Examples) {
  const MonomialBasis b(1, 2);
  const std::vector<double> z = {1.0, 0.3, 0.2};
  EXPECT_DOUBLE_EQ(riesz(z, b, one1()), 1.0);
  EXPECT_DOUBLE_EQ(riesz(z, b, x1() - x1() * x1()), 0.3 - 0.2);
  EXPECT_DOUBLE_EQ(riesz(z, b, 3.0 * x1() * x1()), 3 * 0.2);
}

TEST(Riesz, LinearityAndDirac) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  const MonomialBasis b(2, 4);
  const Polynomial x = Polynomial::variable(2, 0), y = Polynomial::variable(2, 1);
  const Polynomial p = x * x * y - y.pow(4) + 2.0 * x;
  const Polynomial q = (x - y).pow(2) + Polynomial::constant(2, 1.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> z(b.size());
    for (auto& v : z) v = u(rng);
    const double a = u(rng), c = u(rng);
    EXPECT_NEAR(riesz(z, b, a * p + c * q), a * riesz(z, b, p) + c * riesz(z, b, q), 1e-12);
    // Moments of a Dirac mass turn L_z into point evaluation.
    const double pt[] = {u(rng), u(rng)};
    std::vector<double> dirac;
    for (const auto& m : b.monomials()) dirac.push_back(std::pow(pt[0], m[0]) * std::pow(pt[1], m[1]));
    EXPECT_NEAR(riesz(dirac, b, p), p.eval(pt), 1e-12);
  }
}

TEST(Riesz, RejectsMismatchedInput) {
  const MonomialBasis b(1, 2);
  const std::vector<double> z = {1.0, 0.3};
  EXPECT_THROW(riesz(z, b, one1()), DimensionError);
  const std::vector<double> ok = {1.0, 0.3, 0.2};
  EXPECT_THROW(riesz(ok, b, x1().pow(3)), DegreeError);
}
