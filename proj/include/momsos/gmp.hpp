#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "momsos/detail/row_reduction.hpp"
#include "momsos/error.hpp"
#include "momsos/poly.hpp"
#include "momsos/semialg.hpp"

namespace momsos {

/// One polynomial per measure.
using PolyTuple = std::vector<Polynomial>;

struct Measure {
  std::string name;
  SemialgebraicSet set;
  std::vector<std::string> variables;  // display names, one per coordinate
};

/// sum_i <phi_i, mu_i> == rhs
struct EqualityConstraint {
  PolyTuple phi;
  double rhs = 0.0;
};

/// sum_i <psi_i, mu_i> <= bound
struct InequalityConstraint {
  PolyTuple psi;
  double bound = 0.0;
};

/// Sense in which values are reported. The engine always maximizes; a
/// minimization problem stores the negated objective.
enum class Sense { maximize, minimize };

inline std::vector<std::string> default_variable_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("x" + std::to_string(i + 1));
  return names;
}

/// Generalized moment problem over N measures:
///
///   sup  sum_i <c_i, mu_i>
///   s.t. mu_i >= 0 supported on K_i
///        sum_i <phi_{a,i}, mu_i> == a_a
///        sum_i <psi_{b,i}, mu_i> <= b_b
class GmpProblem {
 public:
  GmpProblem(std::vector<Measure> measures, PolyTuple objective,
             std::vector<EqualityConstraint> equalities = {},
             std::vector<InequalityConstraint> inequalities = {},
             std::vector<std::optional<double>> mass_bounds = {},
             Sense sense = Sense::maximize)
      : measures_(std::move(measures)),
        objective_(std::move(objective)),
        equalities_(std::move(equalities)),
        inequalities_(std::move(inequalities)),
        mass_bounds_(std::move(mass_bounds)),
        sense_(sense) {
    if (mass_bounds_.empty()) mass_bounds_.resize(measures_.size());
    validate();
  }

  std::size_t num_measures() const { return measures_.size(); }
  const std::vector<Measure>& measures() const { return measures_; }
  const Measure& measure(std::size_t i) const { return measures_.at(i); }
  const PolyTuple& objective() const { return objective_; }
  const std::vector<EqualityConstraint>& equalities() const {
    return equalities_;
  }
  const std::vector<InequalityConstraint>& inequalities() const {
    return inequalities_;
  }
  const std::vector<std::optional<double>>& mass_bounds() const {
    return mass_bounds_;
  }
  Sense sense() const { return sense_; }

  std::size_t measure_index(const std::string& name) const {
    for (std::size_t i = 0; i < measures_.size(); ++i) {
      if (measures_[i].name == name) return i;
    }
    throw ModelError("unknown measure '" + name + "'");
  }

  /// Converts an engine (maximization) value to the reported sense.
  double reported_value(double internal) const {
    return sense_ == Sense::minimize ? -internal : internal;
  }

  /// Zero tuple matching the measure layout.
  PolyTuple zero_tuple() const {
    PolyTuple t;
    for (const auto& m : measures_) t.emplace_back(m.set.nvars());
    return t;
  }

  GmpProblem with_equality(EqualityConstraint c) const {
    GmpProblem p(*this);
    p.equalities_.push_back(std::move(c));
    p.validate();
    return p;
  }

  GmpProblem with_inequality(InequalityConstraint c) const {
    GmpProblem p(*this);
    p.inequalities_.push_back(std::move(c));
    p.validate();
    return p;
  }

  GmpProblem with_objective(PolyTuple objective) const {
    GmpProblem p(*this);
    p.objective_ = std::move(objective);
    p.validate();
    return p;
  }

  /// Appends <1, mu_i> <= C_i for every measure with a stored mass bound.
  GmpProblem with_enforced_mass() const {
    GmpProblem p(*this);
    for (std::size_t i = 0; i < measures_.size(); ++i) {
      if (!mass_bounds_[i]) continue;
      PolyTuple t = zero_tuple();
      t[i] = Polynomial::constant(measures_[i].set.nvars(), 1.0);
      p.inequalities_.push_back({std::move(t), *mass_bounds_[i]});
    }
    p.validate();
    return p;
  }

 private:
  void check_tuple(const PolyTuple& t, const std::string& what) const {
    if (t.size() != measures_.size()) {
      throw ModelError(what + " has " + std::to_string(t.size()) +
                       " entries, expected one per measure (" +
                       std::to_string(measures_.size()) + ")");
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i].nvars() != measures_[i].set.nvars()) {
        throw DimensionError(what + ": entry for measure '" +
                             measures_[i].name + "' has " +
                             std::to_string(t[i].nvars()) +
                             " variables, expected " +
                             std::to_string(measures_[i].set.nvars()));
      }
    }
  }

  void validate() {
    if (measures_.empty()) throw ModelError("problem declares no measure");
    for (std::size_t i = 0; i < measures_.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (measures_[i].name == measures_[j].name) {
          throw ModelError("duplicate measure '" + measures_[i].name + "'");
        }
      }
      if (measures_[i].variables.empty()) {
        measures_[i].variables =
            default_variable_names(measures_[i].set.nvars());
      }
      if (measures_[i].variables.size() != measures_[i].set.nvars()) {
        throw DimensionError("measure '" + measures_[i].name +
                             "' variable names do not match its dimension");
      }
    }
    check_tuple(objective_, "objective");
    for (std::size_t a = 0; a < equalities_.size(); ++a) {
      check_tuple(equalities_[a].phi, "equality constraint " + std::to_string(a));
      if (!std::isfinite(equalities_[a].rhs)) {
        throw ModelError("equality constraint rhs is not finite");
      }
    }
    for (std::size_t b = 0; b < inequalities_.size(); ++b) {
      check_tuple(inequalities_[b].psi,
                  "inequality constraint " + std::to_string(b));
      if (!std::isfinite(inequalities_[b].bound)) {
        throw ModelError("inequality constraint bound is not finite");
      }
    }
    if (mass_bounds_.size() != measures_.size()) {
      throw ModelError("mass bounds must have one entry per measure");
    }
    for (const auto& c : mass_bounds_) {
      if (c && !(*c > 0.0)) throw ModelError("mass bound must be positive");
    }
  }

  std::vector<Measure> measures_;
  PolyTuple objective_;
  std::vector<EqualityConstraint> equalities_;
  std::vector<InequalityConstraint> inequalities_;
  std::vector<std::optional<double>> mass_bounds_;
  Sense sense_;
};

/// Axis-aligned box prod_j [lo_j, hi_j].
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t nvars() const { return lo.size(); }

  double volume() const {
    double v = 1.0;
    for (std::size_t j = 0; j < lo.size(); ++j) v *= hi[j] - lo[j];
    return v;
  }

  /// Integral of x^k over the box with respect to Lebesgue measure.
  double lebesgue_moment(const Monomial& k) const {
    if (k.nvars() != lo.size()) throw DimensionError("box dimension mismatch");
    double v = 1.0;
    for (std::size_t j = 0; j < lo.size(); ++j) {
      const int e = k[j] + 1;
      v *= (std::pow(hi[j], e) - std::pow(lo[j], e)) / e;
    }
    return v;
  }

  /// Constraints (x_j - lo_j)(hi_j - x_j) >= 0.
  std::vector<Polynomial> constraints() const {
    const std::size_t n = lo.size();
    std::vector<Polynomial> g;
    for (std::size_t j = 0; j < n; ++j) {
      const Polynomial x = Polynomial::variable(n, j);
      g.push_back((x - Polynomial::constant(n, lo[j])) *
                  (Polynomial::constant(n, hi[j]) - x));
    }
    return g;
  }
};

/// Closed-form moments of a signed combination of weighted Dirac masses and
/// box-restricted Lebesgue measures.
struct MomentGenerator {
  struct Atom {
    double weight;
    std::vector<double> point;
  };
  struct BoxPiece {
    double weight;
    Box box;
  };

  std::vector<Atom> atoms;
  std::vector<BoxPiece> boxes;

  double moment(const Monomial& k) const {
    double v = 0.0;
    for (const auto& a : atoms) v += a.weight * k.eval(a.point);
    for (const auto& b : boxes) v += b.weight * b.box.lebesgue_moment(k);
    return v;
  }

  std::vector<double> moments(const MonomialBasis& basis) const {
    std::vector<double> z;
    z.reserve(basis.size());
    for (const auto& m : basis.monomials()) z.push_back(moment(m));
    return z;
  }

  double integrate(const Polynomial& p) const {
    double v = 0.0;
    for (const auto& [m, c] : p.terms()) v += c * moment(m);
    return v;
  }
};

/// Known optimal measures of an instance, one generator per measure.
struct GmpSolutionOracle {
  std::vector<MomentGenerator> measures;

  /// Largest violation of the problem's equality constraints and the most
  /// negative inequality slack (reported as a positive violation).
  double max_violation(const GmpProblem& p) const {
    double worst = 0.0;
    for (const auto& eq : p.equalities()) {
      double lhs = 0.0;
      for (std::size_t i = 0; i < measures.size(); ++i) {
        lhs += measures[i].integrate(eq.phi[i]);
      }
      worst = std::max(worst, std::abs(lhs - eq.rhs));
    }
    for (const auto& in : p.inequalities()) {
      double lhs = 0.0;
      for (std::size_t i = 0; i < measures.size(); ++i) {
        lhs += measures[i].integrate(in.psi[i]);
      }
      worst = std::max(worst, lhs - in.bound);
    }
    return worst;
  }
};

/// inf { f(x) : x in K } as the GMP  -sup -<f, mu>  s.t. <1, mu> = 1.
inline GmpProblem make_pop(const Polynomial& f, const SemialgebraicSet& k,
                           std::string measure_name = "mu",
                           std::vector<std::string> variables = {}) {
  if (f.nvars() != k.nvars()) {
    throw DimensionError("objective and set have different dimensions");
  }
  const std::size_t n = k.nvars();
  std::vector<Measure> ms{
      {std::move(measure_name), normalize(k), std::move(variables)}};
  std::vector<EqualityConstraint> eqs{{{Polynomial::constant(n, 1.0)}, 1.0}};
  return GmpProblem(std::move(ms), {-f}, std::move(eqs), {}, {1.0},
                    Sense::minimize);
}

/// Volume of K inside a box B, with the slack measure on B:
///
///   sup <1, mu>  s.t.  <x^k, mu> + <x^k, mu_bar> = int_B x^k dx, |k| <= cap.
inline GmpProblem make_volume(const SemialgebraicSet& k, const Box& box,
                              std::size_t cap_degree) {
  const std::size_t n = k.nvars();
  if (box.lo.size() != n || box.hi.size() != n) {
    throw DimensionError("box dimension does not match the set");
  }
  double reach = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!(box.lo[j] < box.hi[j])) throw ModelError("empty box interval");
    reach += std::max(box.lo[j] * box.lo[j], box.hi[j] * box.hi[j]);
  }
  if (reach > 1.0 + 1e-12) {
    throw ModelError("box is not contained in the unit ball; rescale first");
  }
  const SemialgebraicSet b_set = normalize(n, box.constraints());
  std::vector<Measure> ms{{"mu", normalize(k), {}}, {"mu_bar", b_set, {}}};
  const MonomialBasis basis(n, cap_degree);
  std::vector<EqualityConstraint> eqs;
  eqs.reserve(basis.size());
  for (const auto& m : basis.monomials()) {
    const double rhs = box.lebesgue_moment(m);
    if (!std::isfinite(rhs)) {
      throw SizeLimitError("box moment of " + m.to_string() + " overflows");
    }
    eqs.push_back({{Polynomial::monomial(m), Polynomial::monomial(m)}, rhs});
  }
  const double vol = box.volume();
  return GmpProblem(std::move(ms),
                    {Polynomial::constant(n, 1.0), Polynomial(n)},
                    std::move(eqs), {}, {vol, vol}, Sense::maximize);
}

/// Existence of mu on K with prescribed moments; zero objective.
inline GmpProblem make_kmoment(
    const std::vector<std::pair<Monomial, double>>& targets,
    const SemialgebraicSet& k) {
  std::vector<EqualityConstraint> eqs;
  for (const auto& [m, z] : targets) {
    if (m.nvars() != k.nvars()) throw DimensionError("target monomial dimension");
    eqs.push_back({{Polynomial::monomial(m)}, z});
  }
  std::vector<Measure> ms{{"mu", normalize(k), {}}};
  return GmpProblem(std::move(ms), {Polynomial(k.nvars())}, std::move(eqs));
}

struct CompatibilityViolation {
  enum class Kind { equality, inequality };
  Kind kind;
  std::size_t row;     // index into equalities() / inequalities()
  double implied_rhs;  // value forced by the earlier rows it depends on
  double actual_rhs;
  double magnitude() const { return std::abs(implied_rhs - actual_rhs); }
};

struct CompatibilityReport {
  bool compatible = true;
  std::size_t equality_rank = 0;
  std::size_t inequality_rank = 0;
  std::vector<CompatibilityViolation> violations;
};

namespace detail {

/// Stacks polynomial tuples into a dense coefficient matrix whose columns are
/// (measure, monomial) pairs.
inline Eigen::MatrixXd stack_tuples(const std::vector<const PolyTuple*>& rows) {
  std::map<std::pair<std::size_t, Monomial>, Eigen::Index,
           bool (*)(const std::pair<std::size_t, Monomial>&,
                    const std::pair<std::size_t, Monomial>&)>
      cols([](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return GradedLexLess{}(a.second, b.second);
      });
  for (const auto* t : rows) {
    for (std::size_t i = 0; i < t->size(); ++i) {
      for (const auto& [m, c] : (*t)[i].terms()) cols.try_emplace({i, m}, 0);
    }
  }
  Eigen::Index next = 0;
  for (auto& [key, idx] : cols) idx = next++;
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(rows.size()), next);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& t = *rows[r];
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (const auto& [m, c] : t[i].terms()) {
        e(static_cast<Eigen::Index>(r), cols.at({i, m})) = c;
      }
    }
  }
  return e;
}

}  // namespace detail

/// Checks that every stored constraint tuple that is a linear combination of
/// earlier ones carries the matching right-hand side.
inline CompatibilityReport check_linear_compatibility(const GmpProblem& p,
                                                      double tol = 1e-9) {
  CompatibilityReport report;
  auto run = [&](auto const& list, auto tuple_of, auto rhs_of,
                 CompatibilityViolation::Kind kind) {
    std::vector<const PolyTuple*> rows;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(list.size()));
    for (std::size_t r = 0; r < list.size(); ++r) {
      rows.push_back(&tuple_of(list[r]));
      rhs(static_cast<Eigen::Index>(r)) = rhs_of(list[r]);
    }
    const auto red = detail::reduce_rows(detail::stack_tuples(rows), rhs,
                                         1e-10, tol);
    for (const auto& bad : red.inconsistent_rows) {
      report.violations.push_back(
          {kind, bad.row, bad.implied_rhs, bad.actual_rhs});
    }
    return red.rank();
  };
  report.equality_rank = run(
      p.equalities(), [](const auto& c) -> const PolyTuple& { return c.phi; },
      [](const auto& c) { return c.rhs; },
      CompatibilityViolation::Kind::equality);
  report.inequality_rank = run(
      p.inequalities(), [](const auto& c) -> const PolyTuple& { return c.psi; },
      [](const auto& c) { return c.bound; },
      CompatibilityViolation::Kind::inequality);
  report.compatible = report.violations.empty();
  return report;
}

}  // namespace momsos
