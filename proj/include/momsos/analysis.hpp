#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "momsos/error.hpp"
#include "momsos/gmp.hpp"
#include "momsos/poly.hpp"
#include "momsos/relax.hpp"
#include "momsos/sdp.hpp"

namespace momsos {

/// Wraps a raw vector as single-measure pseudo-moments of order d.
inline PseudoMoments make_pseudo_moments(std::size_t nvars, std::size_t d,
                                         std::vector<double> z) {
  if (z.size() != basis_size(nvars, 2 * d)) {
    throw DimensionError("pseudo-moment vector has " + std::to_string(z.size()) +
                         " entries, order " + std::to_string(d) + " needs " +
                         std::to_string(basis_size(nvars, 2 * d)));
  }
  PseudoMoments pm;
  pm.order = d;
  pm.nvars = {nvars};
  pm.z = {std::move(z)};
  return pm;
}

// ---------------------------------------------------------------------------
// Boundedness of pseudo-moments

/// Worst margins of the three families; a negative margin is a violation.
/// Margins already include the tolerance.
struct LemmaReport {
  double tol = 0.0;
  double diagonal_margin = std::numeric_limits<double>::infinity();  // (i)
  double bound_margin = std::numeric_limits<double>::infinity();     // (ii)
  double average_margin = std::numeric_limits<double>::infinity();   // (iii)
  std::vector<std::string> violations;

  double margin() const { return std::min({diagonal_margin, bound_margin, average_margin}); }
  bool ok() const { return violations.empty(); }
};

/// Checks, per measure with tol = 1e-7 (1 + z_0):
///   (i)   z_{2k} >= -tol                           for |k| <= d
///   (ii)  |z_k| <= z_0 max(1, R^{2d}) + tol         for |k| <= 2d
///   (iii) |z_{k+k'}| <= (z_{2k} + z_{2k'})/2 + tol  for |k|, |k'| <= d
inline LemmaReport lemma_check(const PseudoMoments& z, double radius = 1.0) {
  LemmaReport rep;
  const std::size_t d = z.order;
  for (std::size_t i = 0; i < z.z.size(); ++i) {
    const auto& zi = z.z[i];
    const MonomialBasis full = z.basis(i);
    const MonomialBasis half(z.nvars.at(i), d);
    if (zi.size() != full.size()) throw DimensionError("pseudo-moment vector has wrong length");
    const double z0 = zi.empty() ? 0.0 : zi[0];
    const double tol = 1e-7 * (1.0 + std::abs(z0));
    rep.tol = std::max(rep.tol, tol);
    const std::string tag = z.z.size() > 1 ? "measure " + std::to_string(i) + ": " : "";
    auto at = [&](const Monomial& m) { return zi[full.rank(m)]; };

    const auto& rows = half.monomials();
    for (const auto& k : rows) {
      const double m = at(k * k) + tol;
      if (m < 0) rep.violations.push_back(tag + "(i) z_" + (k * k).to_string() + " < 0");
      rep.diagonal_margin = std::min(rep.diagonal_margin, m);
    }
    const double bound = z0 * std::max(1.0, std::pow(radius, 2.0 * static_cast<double>(d)));
    for (std::size_t k = 0; k < zi.size(); ++k) {
      const double m = bound + tol - std::abs(zi[k]);
      if (m < 0) {
        rep.violations.push_back(tag + "(ii) |z_" + full.unrank(k).to_string() + "| exceeds bound");
      }
      rep.bound_margin = std::min(rep.bound_margin, m);
    }
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = a; b < rows.size(); ++b) {
        const double avg = (at(rows[a] * rows[a]) + at(rows[b] * rows[b])) / 2;
        const double m = avg + tol - std::abs(at(rows[a] * rows[b]));
        if (m < 0) {
          rep.violations.push_back(tag + "(iii) |z_" + (rows[a] * rows[b]).to_string() +
                                   "| exceeds average");
        }
        rep.average_margin = std::min(rep.average_margin, m);
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Hierarchy runs

struct HierarchyOptions {
  SolverOptions solver;
  std::optional<double> penalty;  // trace penalty eps
  bool solve_dual = true;
  bool parallel = true;
  /// Solve in a Chebyshev basis of each measure's bounding box. Needed for
  /// orders beyond ~5; harmless below.
  bool precondition = true;
  double stabilization_tol = 1e-4;
  double lemma_radius = 1.0;
};

struct HierarchyEntry {
  std::size_t order = 0;
  SdpStatus primal_status = SdpStatus::numerical_failure;
  SdpStatus dual_status = SdpStatus::numerical_failure;
  bool dual_solved = false;
  double primal_value = std::numeric_limits<double>::quiet_NaN();  // reported sense
  double dual_value = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  int primal_iterations = 0;
  int dual_iterations = 0;
  PseudoMoments moments;
  LemmaReport lemma;
  // Per measure, |z_d - z_{d-1}| over the previous order's monomials.
  std::vector<std::vector<double>> monomial_diff;
  double diff = std::numeric_limits<double>::quiet_NaN();  // max of the above
  bool stable = false;  // diff <= stabilization tolerance
};

struct StabilizationReport {
  double tol = 1e-4;
  std::optional<std::size_t> stabilized_at;
  // First order from which each monomial's change stays below tol, per
  // measure, over the monomials of the second-to-last order.
  std::vector<std::vector<std::optional<std::size_t>>> per_monomial;

  bool stabilized() const { return stabilized_at.has_value(); }
  std::string label() const { return stabilized() ? "stabilized" : "oscillating"; }
};

enum class TraceStatus { complete, infeasible, solver_failure };

inline const char* to_string(TraceStatus s) {
  switch (s) {
    case TraceStatus::complete: return "complete";
    case TraceStatus::infeasible: return "infeasible";
    case TraceStatus::solver_failure: return "solver_failure";
  }
  return "?";
}

struct HierarchyTrace {
  Sense sense = Sense::maximize;
  std::size_t first_order = 0;
  std::size_t requested_max = 0;
  std::vector<HierarchyEntry> entries;
  TraceStatus status = TraceStatus::complete;
  std::optional<std::size_t> stopped_at;  // order that ended the run early
  std::string message;
  StabilizationReport stabilization;
};

namespace detail {

struct OrderResult {
  std::size_t order = 0;
  bool consistent = true;
  std::string inconsistency;
  SdpSolution primal;
  SdpSolution dual;
  bool dual_solved = false;
  double primal_value = 0.0;  // engine sense
  double dual_value = 0.0;
  PseudoMoments moments;
};

inline OrderResult solve_order(const GmpProblem& base, std::size_t d,
                               const HierarchyOptions& opts,
                               const std::vector<Box>* boxes) {
  const GmpProblem p =
      opts.penalty ? penalized_problem(base, d, *opts.penalty) : base;
  OrderResult out;
  out.order = d;
  const MomentRelaxation r = build_relaxation(p, d);
  if (!r.plan.consistent()) {
    const auto& bad = r.plan.inconsistent.front();
    out.consistent = false;
    out.inconsistency = "equality row " + std::to_string(r.plan.eq_rows[bad.row]) +
                        " asks for " + std::to_string(bad.actual_rhs) +
                        " but earlier rows imply " + std::to_string(bad.implied_rhs);
    return out;
  }
  out.primal = boxes ? solve_preconditioned(r.sdp, relaxation_congruence(r, *boxes), opts.solver)
                     : solve(r.sdp, opts.solver);
  if (out.primal.y.size() == r.sdp.num_vars()) {
    out.primal_value = r.value(out.primal);
    out.moments = r.plan.moments(out.primal.y);
    out.moments.objective_value = out.primal_value;
    out.moments.provenance = "relaxation order " + std::to_string(d) + ", " +
                             to_string(out.primal.status) + " after " +
                             std::to_string(out.primal.iterations) + " iterations";
  }
  if (opts.solve_dual && out.primal.status == SdpStatus::optimal) {
    const SosProgram sos = build_sos_dual(p, d);
    if (sos.unbounded_direction) {
      out.dual.status = SdpStatus::unbounded;
      out.dual.message = "free certificate direction with nonzero cost";
    } else {
      out.dual = boxes ? solve_preconditioned(sos.sdp, sos_congruence(sos, p, *boxes), opts.solver)
                       : solve(sos.sdp, opts.solver);
    }
    out.dual_solved = true;
    if (out.dual.status == SdpStatus::optimal) out.dual_value = sos.value(out.dual);
  }
  return out;
}

}  // namespace detail

/// Solves the relaxation and its SOS dual at every order d0..d_max.
///
/// A relaxation that is infeasible (or whose equalities are inconsistent)
/// certifies that the GMP itself is infeasible; the trace stops there. A
/// primal solve that fails for numerical reasons also ends the trace.
inline HierarchyTrace run_hierarchy(const GmpProblem& p, std::size_t d_max,
                                    const HierarchyOptions& opts = {}) {
  const std::size_t d0 = min_degree(p);
  if (d_max < d0) {
    throw DegreeError("d_max " + std::to_string(d_max) + " is below the minimal order " +
                      std::to_string(d0));
  }
  HierarchyTrace trace;
  trace.sense = p.sense();
  trace.first_order = d0;
  trace.requested_max = d_max;
  trace.stabilization.tol = opts.stabilization_tol;

  std::vector<Box> boxes;
  if (opts.precondition) boxes = measure_boxes(p);
  const std::vector<Box>* bp = opts.precondition ? &boxes : nullptr;

  std::vector<detail::OrderResult> results;
  if (opts.parallel) {
    std::vector<std::future<detail::OrderResult>> jobs;
    for (std::size_t d = d0; d <= d_max; ++d) {
      jobs.push_back(std::async(std::launch::async, detail::solve_order, std::cref(p), d,
                                std::cref(opts), bp));
    }
    for (auto& j : jobs) results.push_back(j.get());
  } else {
    for (std::size_t d = d0; d <= d_max; ++d) {
      results.push_back(detail::solve_order(p, d, opts, bp));
    }
  }

  for (auto& r : results) {
    if (!r.consistent) {
      trace.status = TraceStatus::infeasible;
      trace.stopped_at = r.order;
      trace.message = "GMP infeasible at order " + std::to_string(r.order) + ": " +
                      r.inconsistency;
      break;
    }
    const SdpStatus st = r.primal.status;
    if (st == SdpStatus::infeasible) {
      trace.status = TraceStatus::infeasible;
      trace.stopped_at = r.order;
      trace.message = "GMP infeasible at order " + std::to_string(r.order) +
                      ": relaxation has no feasible point";
      break;
    }
    if (st != SdpStatus::optimal) {
      trace.status = TraceStatus::solver_failure;
      trace.stopped_at = r.order;
      trace.message = "relaxation at order " + std::to_string(r.order) + " ended with " +
                      to_string(st) + (r.primal.message.empty() ? "" : ": " + r.primal.message);
      break;
    }
    HierarchyEntry e;
    e.order = r.order;
    e.primal_status = st;
    e.primal_iterations = r.primal.iterations;
    e.primal_value = p.reported_value(r.primal_value);
    e.dual_solved = r.dual_solved;
    if (r.dual_solved) {
      e.dual_status = r.dual.status;
      e.dual_iterations = r.dual.iterations;
      if (r.dual.status == SdpStatus::optimal) {
        e.dual_value = p.reported_value(r.dual_value);
        e.gap = std::abs(e.primal_value - e.dual_value) / (1.0 + std::abs(e.primal_value));
      }
    }
    e.moments = std::move(r.moments);
    e.lemma = lemma_check(e.moments, opts.lemma_radius);
    if (!trace.entries.empty()) {
      const PseudoMoments& prev = trace.entries.back().moments;
      e.diff = 0.0;
      for (std::size_t i = 0; i < prev.z.size(); ++i) {
        std::vector<double> di(prev.z[i].size());
        for (std::size_t k = 0; k < di.size(); ++k) {
          // Graded ordering: the previous basis is a prefix of this one.
          di[k] = std::abs(e.moments.z[i][k] - prev.z[i][k]);
          e.diff = std::max(e.diff, di[k]);
        }
        e.monomial_diff.push_back(std::move(di));
      }
      e.stable = e.diff <= opts.stabilization_tol;
    }
    trace.entries.push_back(std::move(e));
  }
  if (trace.status == TraceStatus::complete) {
    trace.message = "solved orders " + std::to_string(d0) + ".." + std::to_string(d_max) +
                    "; feasibility of a relaxation certifies nothing about the GMP";
  }

  // Stabilized from the first order whose diff and every later diff are
  // below tol; needs at least one pair of consecutive orders.
  auto& st = trace.stabilization;
  const auto& en = trace.entries;
  for (std::size_t s = en.size(); s-- > 1;) {
    if (!en[s].stable) break;
    st.stabilized_at = en[s].order;
  }
  if (en.size() >= 2) {
    const std::size_t last = en.size() - 1;
    for (std::size_t i = 0; i < en[last].monomial_diff.size(); ++i) {
      std::vector<std::optional<std::size_t>> col(en[last].monomial_diff[i].size());
      for (std::size_t k = 0; k < col.size(); ++k) {
        for (std::size_t s = last + 1; s-- > 1;) {
          if (en[s].monomial_diff[i][k] > opts.stabilization_tol) break;
          col[k] = en[s].order;
        }
      }
      st.per_monomial.push_back(std::move(col));
    }
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Duality gap audit

struct GapAudit {
  double tol = 1e-6;
  double max_gap = 0.0;
  std::vector<std::size_t> checked_orders;
  std::vector<std::pair<std::size_t, std::string>> excluded;  // order, reason
  std::vector<std::size_t> violations;

  bool ok() const { return violations.empty(); }
};

/// |p^d - d^d| <= tol (1 + |p^d|) at every order where both solves are optimal.
inline GapAudit gap_audit(const HierarchyTrace& trace, double tol = 1e-6) {
  GapAudit a;
  a.tol = tol;
  for (const auto& e : trace.entries) {
    if (e.primal_status != SdpStatus::optimal) {
      a.excluded.emplace_back(e.order, std::string("relaxation ") + to_string(e.primal_status));
      continue;
    }
    if (!e.dual_solved) {
      a.excluded.emplace_back(e.order, "dual not solved");
      continue;
    }
    if (e.dual_status != SdpStatus::optimal) {
      a.excluded.emplace_back(e.order, std::string("dual ") + to_string(e.dual_status));
      continue;
    }
    a.checked_orders.push_back(e.order);
    a.max_gap = std::max(a.max_gap, e.gap);
    if (!(e.gap <= tol)) a.violations.push_back(e.order);
  }
  if (trace.stopped_at) {
    a.excluded.emplace_back(*trace.stopped_at, to_string(trace.status));
  }
  return a;
}

// ---------------------------------------------------------------------------
// Uniqueness repair

/// Appends <x^m, mu> == value. Re-fixing the same moment to the same value
/// is a no-op; a different value is rejected.
inline GmpProblem fix_moment(const GmpProblem& p, const std::string& measure,
                             const Monomial& m, double value) {
  const std::size_t i = p.measure_index(measure);
  const std::size_t n = p.measure(i).set.nvars();
  if (m.nvars() != n) {
    throw DimensionError("monomial has " + std::to_string(m.nvars()) + " variables, measure '" +
                         measure + "' has " + std::to_string(n));
  }
  if (!std::isfinite(value)) throw ModelError("fixed moment value must be finite");
  PolyTuple phi = p.zero_tuple();
  phi[i] = Polynomial::monomial(m);
  for (const auto& eq : p.equalities()) {
    if (eq.phi != phi) continue;
    if (eq.rhs == value) return p;
    throw ModelError("moment " + m.to_string() + " of '" + measure + "' is already fixed to " +
                     std::to_string(eq.rhs));
  }
  return p.with_equality({std::move(phi), value});
}

}  // namespace momsos
