#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "momsos/error.hpp"
#include "momsos/poly.hpp"

namespace momsos {

inline constexpr double kCoefficientMatchTol = 1e-12;
inline constexpr double kMembershipTol = 1e-12;

/// 1 - ||x||^2.
inline Polynomial unit_ball_polynomial(std::size_t nvars) {
  return Polynomial::constant(nvars, 1.0) - squared_norm(nvars);
}

/// K = { x in R^n : g_j(x) >= 0 for all j }.
///
/// The flags are derived from the constraint list: `has_unit_first` when
/// g[0] is the constant 1, and `ball_index` pointing at the first entry that
/// matches 1 - ||x||^2 coefficient-wise.
class SemialgebraicSet {
 public:
  SemialgebraicSet(std::size_t nvars, std::vector<Polynomial> g)
      : nvars_(nvars), g_(std::move(g)) {
    for (const auto& p : g_) {
      if (p.nvars() != nvars_) {
        throw DimensionError("constraint polynomial has " +
                             std::to_string(p.nvars()) +
                             " variables, set has " + std::to_string(nvars_));
      }
    }
    const Polynomial one = Polynomial::constant(nvars_, 1.0);
    has_unit_first_ =
        !g_.empty() && g_.front().distance(one) <= kCoefficientMatchTol;
    const Polynomial ball = unit_ball_polynomial(nvars_);
    for (std::size_t j = 0; j < g_.size(); ++j) {
      if (g_[j].distance(ball) <= kCoefficientMatchTol) {
        ball_index_ = j;
        break;
      }
    }
  }

  std::size_t nvars() const { return nvars_; }
  const std::vector<Polynomial>& constraints() const { return g_; }
  std::size_t size() const { return g_.size(); }
  const Polynomial& operator[](std::size_t j) const { return g_[j]; }
  bool has_unit_first() const { return has_unit_first_; }
  std::optional<std::size_t> ball_index() const { return ball_index_; }

  /// True iff every g_j(x) >= -tol.
  bool contains(std::span<const double> x, double tol = kMembershipTol) const {
    if (x.size() != nvars_) {
      throw DimensionError("point has " + std::to_string(x.size()) +
                           " coordinates, set lives in R^" +
                           std::to_string(nvars_));
    }
    for (const auto& p : g_) {
      if (p.eval(x) < -tol) return false;
    }
    return true;
  }

  friend bool operator==(const SemialgebraicSet& a, const SemialgebraicSet& b) {
    return a.nvars_ == b.nvars_ && a.g_ == b.g_;
  }

 private:
  std::size_t nvars_;
  std::vector<Polynomial> g_;
  bool has_unit_first_ = false;
  std::optional<std::size_t> ball_index_;
};

/// Puts a constraint list in ball normal form: the constant 1 first, the
/// original constraints in order, and 1 - ||x||^2 appended unless an entry
/// already matches it. The caller is responsible for K lying in the unit
/// ball (see rescale).
inline SemialgebraicSet normalize(std::size_t nvars, std::vector<Polynomial> g) {
  std::vector<Polynomial> out;
  out.reserve(g.size() + 2);
  const Polynomial one = Polynomial::constant(nvars, 1.0);
  if (g.empty() || g.front().nvars() != nvars ||
      g.front().distance(one) > kCoefficientMatchTol) {
    out.push_back(one);
  }
  for (auto& p : g) out.push_back(std::move(p));
  SemialgebraicSet s(nvars, std::move(out));
  if (s.ball_index()) return s;
  auto with_ball = s.constraints();
  with_ball.push_back(unit_ball_polynomial(nvars));
  return SemialgebraicSet(nvars, std::move(with_ball));
}

inline SemialgebraicSet normalize(const SemialgebraicSet& s) {
  return normalize(s.nvars(), s.constraints());
}

/// Maps moments of the rescaled measure (supported on K/R) back to moments
/// of the original one: z_k -> R^|k| z_k.
struct MomentRescaling {
  double radius = 1.0;

  std::vector<double> to_original(std::span<const double> z,
                                  const MonomialBasis& basis) const {
    if (z.size() != basis.size()) {
      throw DimensionError("moment vector does not match basis");
    }
    std::vector<double> out(z.begin(), z.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] *= std::pow(radius, basis[i].degree());
    }
    return out;
  }

  std::vector<double> to_rescaled(std::span<const double> z,
                                  const MonomialBasis& basis) const {
    return MomentRescaling{1.0 / radius}.to_original(z, basis);
  }
};

/// Substitutes x <- R x in every constraint, so the returned set is K / R.
inline std::pair<SemialgebraicSet, MomentRescaling> rescale(
    const SemialgebraicSet& s, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw Error("rescale: radius must be positive and finite");
  }
  std::vector<Polynomial> g;
  g.reserve(s.size());
  for (const auto& p : s.constraints()) g.push_back(p.substitute_scaled(radius));
  return {SemialgebraicSet(s.nvars(), std::move(g)), MomentRescaling{radius}};
}

inline bool membership_oracle(const SemialgebraicSet& s,
                              std::span<const double> x) {
  return s.contains(x);
}

}  // namespace momsos
