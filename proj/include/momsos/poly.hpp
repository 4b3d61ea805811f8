#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "momsos/error.hpp"

namespace momsos {

/// Binomial coefficient C(n, k), throwing SizeLimitError when the result does
/// not fit in 64 bits.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // result * (n - k + i) / i is exact at every step.
    result = result * (n - k + i) / i;
    if (result > std::numeric_limits<std::uint64_t>::max()) {
      throw SizeLimitError("binomial(" + std::to_string(n) + ", " +
                           std::to_string(k) + ") overflows 64 bits");
    }
  }
  return static_cast<std::uint64_t>(result);
}

/// Number of monomials in `n` variables of total degree at most `d`.
inline std::size_t basis_size(std::size_t n, std::size_t d) {
  const std::uint64_t count = binomial(static_cast<std::uint64_t>(n) + d, n);
  if (count > std::numeric_limits<std::size_t>::max()) {
    throw SizeLimitError("monomial basis size overflows size_t");
  }
  return static_cast<std::size_t>(count);
}

/// Exponent vector x^k with cached total degree.
class Monomial {
 public:
  Monomial() = default;

  explicit Monomial(std::vector<int> exponents) : exps_(std::move(exponents)) {
    for (int e : exps_) {
      if (e < 0) throw Error("negative exponent in monomial");
      degree_ += e;
    }
  }

  static Monomial one(std::size_t nvars) {
    return Monomial(std::vector<int>(nvars, 0));
  }

  static Monomial variable(std::size_t nvars, std::size_t index,
                           int power = 1) {
    if (index >= nvars) throw DimensionError("variable index out of range");
    std::vector<int> e(nvars, 0);
    e[index] = power;
    return Monomial(std::move(e));
  }

  std::size_t nvars() const { return exps_.size(); }
  int degree() const { return degree_; }
  int operator[](std::size_t i) const { return exps_[i]; }
  std::span<const int> exponents() const { return exps_; }

  Monomial operator*(const Monomial& other) const {
    check_same(other);
    std::vector<int> e(exps_);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += other.exps_[i];
    return Monomial(std::move(e));
  }

  bool divides(const Monomial& other) const {
    check_same(other);
    for (std::size_t i = 0; i < exps_.size(); ++i) {
      if (exps_[i] > other.exps_[i]) return false;
    }
    return true;
  }

  /// other / *this; requires divides(other).
  Monomial cofactor_in(const Monomial& other) const {
    if (!divides(other)) throw Error("monomial does not divide");
    std::vector<int> e(other.exps_);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] -= exps_[i];
    return Monomial(std::move(e));
  }

  double eval(std::span<const double> x) const {
    if (x.size() != exps_.size()) {
      throw DimensionError("point dimension does not match monomial");
    }
    double v = 1.0;
    for (std::size_t i = 0; i < exps_.size(); ++i) {
      if (exps_[i] != 0) v *= std::pow(x[i], exps_[i]);
    }
    return v;
  }

  std::string to_string(std::span<const std::string> names = {}) const {
    std::ostringstream os;
    bool first = true;
    for (std::size_t i = 0; i < exps_.size(); ++i) {
      if (exps_[i] == 0) continue;
      if (!first) os << '*';
      first = false;
      if (i < names.size()) {
        os << names[i];
      } else {
        os << 'x' << (i + 1);
      }
      if (exps_[i] > 1) os << '^' << exps_[i];
    }
    if (first) os << '1';
    return os.str();
  }

  friend bool operator==(const Monomial& a, const Monomial& b) {
    return a.exps_ == b.exps_;
  }

 private:
  void check_same(const Monomial& other) const {
    if (other.exps_.size() != exps_.size()) {
      throw DimensionError("monomials have different numbers of variables");
    }
  }

  std::vector<int> exps_;
  int degree_ = 0;
};

/// Graded lexicographic order: lower total degree first; within a degree,
/// exponent vectors in decreasing lexicographic order, so x1 precedes x2 and
/// x1^2 precedes x1*x2 precedes x2^2.
struct GradedLexLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    if (a.degree() != b.degree()) return a.degree() < b.degree();
    const auto ea = a.exponents();
    const auto eb = b.exponents();
    return std::lexicographical_compare(eb.begin(), eb.end(), ea.begin(),
                                        ea.end());
  }
};

/// All monomials in `nvars` variables of degree <= `degree`, indexed in
/// graded lexicographic order. Truncating to a lower degree is a prefix.
class MonomialBasis {
 public:
  MonomialBasis(std::size_t nvars, std::size_t degree)
      : nvars_(nvars), degree_(degree), size_(basis_size(nvars, degree)) {
    monomials_.reserve(size_);
    for (std::size_t i = 0; i < size_; ++i) monomials_.push_back(unrank(i));
  }

  std::size_t nvars() const { return nvars_; }
  std::size_t degree() const { return degree_; }
  std::size_t size() const { return size_; }
  const std::vector<Monomial>& monomials() const { return monomials_; }
  const Monomial& operator[](std::size_t i) const { return monomials_[i]; }

  bool contains(const Monomial& m) const {
    return m.nvars() == nvars_ &&
           static_cast<std::size_t>(m.degree()) <= degree_;
  }

  std::size_t rank(const Monomial& m) const {
    if (m.nvars() != nvars_) {
      throw DimensionError("monomial has " + std::to_string(m.nvars()) +
                           " variables, basis has " + std::to_string(nvars_));
    }
    const auto deg = static_cast<std::size_t>(m.degree());
    if (deg > degree_) {
      throw DegreeError("monomial degree " + std::to_string(deg) +
                        " exceeds basis degree " + std::to_string(degree_));
    }
    if (nvars_ == 0) return 0;
    std::size_t r = deg == 0 ? 0 : basis_size(nvars_, deg - 1);
    std::size_t rem = deg;
    for (std::size_t i = 0; i + 1 < nvars_; ++i) {
      const std::size_t tail = nvars_ - i - 1;
      const auto mi = static_cast<std::size_t>(m[i]);
      // Monomials with a larger exponent in position i come first.
      for (std::size_t e = rem; e > mi; --e) r += compositions(rem - e, tail);
      rem -= mi;
    }
    return r;
  }

  Monomial unrank(std::size_t index) const {
    if (index >= size_) {
      throw DegreeError("basis index " + std::to_string(index) +
                        " out of range [0, " + std::to_string(size_) + ")");
    }
    if (nvars_ == 0) return Monomial();
    std::size_t deg = 0;
    while (basis_size(nvars_, deg) <= index) ++deg;
    std::size_t offset = index - (deg == 0 ? 0 : basis_size(nvars_, deg - 1));
    std::vector<int> e(nvars_, 0);
    std::size_t rem = deg;
    for (std::size_t i = 0; i + 1 < nvars_; ++i) {
      const std::size_t tail = nvars_ - i - 1;
      for (std::size_t ei = rem + 1; ei-- > 0;) {
        const std::size_t cnt = compositions(rem - ei, tail);
        if (offset < cnt) {
          e[i] = static_cast<int>(ei);
          rem -= ei;
          break;
        }
        offset -= cnt;
      }
    }
    e[nvars_ - 1] = static_cast<int>(rem);
    return Monomial(std::move(e));
  }

 private:
  // Number of ways to write s as an ordered sum of `parts` nonnegative ints.
  static std::size_t compositions(std::size_t s, std::size_t parts) {
    if (parts == 0) return s == 0 ? 1 : 0;
    return static_cast<std::size_t>(binomial(s + parts - 1, parts - 1));
  }

  std::size_t nvars_;
  std::size_t degree_;
  std::size_t size_;
  std::vector<Monomial> monomials_;
};

/// Sparse multivariate polynomial with real coefficients. Zero coefficients
/// are never stored.
class Polynomial {
 public:
  using Terms = std::map<Monomial, double, GradedLexLess>;

  explicit Polynomial(std::size_t nvars = 0) : nvars_(nvars) {}

  Polynomial(std::size_t nvars, const Terms& terms) : nvars_(nvars) {
    for (const auto& [m, c] : terms) accumulate(m, c);
  }

  static Polynomial constant(std::size_t nvars, double c) {
    Polynomial p(nvars);
    p.accumulate(Monomial::one(nvars), c);
    return p;
  }

  static Polynomial monomial(const Monomial& m, double c = 1.0) {
    Polynomial p(m.nvars());
    p.accumulate(m, c);
    return p;
  }

  static Polynomial variable(std::size_t nvars, std::size_t index) {
    return monomial(Monomial::variable(nvars, index));
  }

  std::size_t nvars() const { return nvars_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  /// Maximum total degree of a stored term; 0 for the zero polynomial.
  int degree() const {
    return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
  }

  double coefficient(const Monomial& m) const {
    const auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
  }

  bool is_constant(double value) const {
    if (value == 0.0) return terms_.empty();
    return terms_.size() == 1 && terms_.begin()->first.degree() == 0 &&
           terms_.begin()->second == value;
  }

  Polynomial operator+(const Polynomial& q) const {
    check_same(q);
    Polynomial r(*this);
    for (const auto& [m, c] : q.terms_) r.accumulate(m, c);
    return r;
  }

  Polynomial operator-(const Polynomial& q) const { return *this + (-q); }

  Polynomial operator-() const { return scaled(-1.0); }

  Polynomial operator*(const Polynomial& q) const {
    check_same(q);
    Polynomial r(nvars_);
    for (const auto& [ma, ca] : terms_) {
      for (const auto& [mb, cb] : q.terms_) r.accumulate(ma * mb, ca * cb);
    }
    return r;
  }

  Polynomial scaled(double s) const {
    Polynomial r(nvars_);
    for (const auto& [m, c] : terms_) r.accumulate(m, c * s);
    return r;
  }

  Polynomial pow(int k) const {
    if (k < 0) throw Error("negative polynomial power");
    Polynomial r = constant(nvars_, 1.0);
    for (int i = 0; i < k; ++i) r = r * *this;
    return r;
  }

  /// p(R x): every coefficient of x^k is multiplied by R^|k|.
  Polynomial substitute_scaled(double radius) const {
    Polynomial r(nvars_);
    for (const auto& [m, c] : terms_) {
      r.accumulate(m, c * std::pow(radius, m.degree()));
    }
    return r;
  }

  double eval(std::span<const double> x) const {
    if (x.size() != nvars_) {
      throw DimensionError("evaluation point has " + std::to_string(x.size()) +
                           " coordinates, polynomial has " +
                           std::to_string(nvars_) + " variables");
    }
    double v = 0.0;
    for (const auto& [m, c] : terms_) v += c * m.eval(x);
    return v;
  }

  /// Largest coefficient-wise difference.
  double distance(const Polynomial& q) const {
    check_same(q);
    double d = 0.0;
    for (const auto& [m, c] : (*this - q).terms_) d = std::max(d, std::abs(c));
    return d;
  }

  std::string to_string(std::span<const std::string> names = {}) const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& [m, c] : terms_) {
      if (first) {
        if (c < 0) os << '-';
      } else {
        os << (c < 0 ? " - " : " + ");
      }
      first = false;
      const double mag = std::abs(c);
      if (m.degree() == 0) {
        os << mag;
      } else {
        if (mag != 1.0) os << mag << '*';
        os << m.to_string(names);
      }
    }
    return os.str();
  }

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.nvars_ == b.nvars_ && a.terms_ == b.terms_;
  }

 private:
  void accumulate(const Monomial& m, double c) {
    if (m.nvars() != nvars_) {
      throw DimensionError("term has " + std::to_string(m.nvars()) +
                           " variables, polynomial has " +
                           std::to_string(nvars_));
    }
    if (c == 0.0) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  void check_same(const Polynomial& q) const {
    if (q.nvars_ != nvars_) {
      throw DimensionError("polynomials have " + std::to_string(nvars_) +
                           " and " + std::to_string(q.nvars_) + " variables");
    }
  }

  std::size_t nvars_;
  Terms terms_;
};

inline Polynomial operator*(double s, const Polynomial& p) {
  return p.scaled(s);
}

/// Sum of squares of the variables, ||x||^2.
inline Polynomial squared_norm(std::size_t nvars) {
  Polynomial r(nvars);
  for (std::size_t i = 0; i < nvars; ++i) {
    r = r + Polynomial::monomial(Monomial::variable(nvars, i, 2));
  }
  return r;
}

/// Riesz functional L_z(p) = sum_k p_k z_k, with z indexed by `basis`.
inline double riesz(std::span<const double> z, const MonomialBasis& basis,
                    const Polynomial& p) {
  if (z.size() != basis.size()) {
    throw DimensionError("moment vector length " + std::to_string(z.size()) +
                         " does not match basis size " +
                         std::to_string(basis.size()));
  }
  if (p.nvars() != basis.nvars()) {
    throw DimensionError("polynomial and basis have different variables");
  }
  if (static_cast<std::size_t>(p.degree()) > basis.degree()) {
    throw DegreeError("Riesz functional: polynomial degree " +
                      std::to_string(p.degree()) + " exceeds truncation " +
                      std::to_string(basis.degree()));
  }
  double v = 0.0;
  for (const auto& [m, c] : p.terms()) v += c * z[basis.rank(m)];
  return v;
}

}  // namespace momsos
