#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "momsos/detail/row_reduction.hpp"
#include "momsos/error.hpp"
#include "momsos/gmp.hpp"
#include "momsos/poly.hpp"
#include "momsos/sdp.hpp"

namespace momsos {

/// Coefficients below this magnitude are dropped when assembling SDP data.
inline constexpr double kAssemblyZeroTol = 1e-13;

/// ceil(deg g / 2).
inline std::size_t localizing_degree(const Polynomial& g) {
  return static_cast<std::size_t>((g.degree() + 1) / 2);
}

/// d0 = max over measures of ceil(deg c_i / 2) and the localizing degrees.
inline std::size_t min_degree(const GmpProblem& p) {
  std::size_t d0 = 0;
  for (std::size_t i = 0; i < p.num_measures(); ++i) {
    d0 = std::max(d0, localizing_degree(p.objective()[i]));
    for (const auto& g : p.measure(i).set.constraints()) {
      d0 = std::max(d0, localizing_degree(g));
    }
  }
  return std::max<std::size_t>(d0, 1);
}

/// Sparse linear form in moment slots: slot -> coefficient.
using LinearForm = std::map<std::size_t, double>;
using LinearFormMatrix = std::vector<std::vector<LinearForm>>;

/// Entry (r, c) is L_z(g e_r e_c) over the graded basis of degree d - d_g.
/// Slots are ranks in MonomialBasis(n, 2d) shifted by `offset`.
inline LinearFormMatrix localizing_matrix(const Polynomial& g, std::size_t d,
                                          std::size_t offset = 0) {
  const std::size_t dg = localizing_degree(g);
  if (dg > d) {
    throw DegreeError("localizing degree " + std::to_string(dg) +
                      " exceeds relaxation order " + std::to_string(d));
  }
  const std::size_t n = g.nvars();
  const MonomialBasis moments(n, 2 * d);
  const MonomialBasis rows(n, d - dg);
  LinearFormMatrix m(rows.size(), std::vector<LinearForm>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = r; c < rows.size(); ++c) {
      const Monomial rc = rows[r] * rows[c];
      LinearForm f;
      for (const auto& [mono, coef] : g.terms()) {
        f[offset + moments.rank(mono * rc)] += coef;
      }
      m[r][c] = f;
      m[c][r] = std::move(f);
    }
  }
  return m;
}

struct MeasureLayout {
  std::size_t nvars;
  std::size_t offset;      // first slot of this measure
  std::size_t num_slots;   // N_{n, 2d}
  std::size_t basis_size;  // N_{n, d}
  std::vector<std::size_t> localizing_degrees;
};

/// Where each PSD block of a relaxation came from.
struct BlockOrigin {
  enum class Kind { localizing, inequality };
  Kind kind;
  std::size_t measure;  // localizing blocks
  std::size_t index;    // constraint index in the set, or inequality row

  std::size_t constraint_index() const { return index; }
};

/// Truncated moment vectors, one per measure, indexed by MonomialBasis(n_i, 2d).
struct PseudoMoments {
  std::size_t order = 0;
  std::vector<std::size_t> nvars;
  std::vector<std::vector<double>> z;
  double objective_value = 0.0;  // engine (maximization) sense
  std::string provenance;

  MonomialBasis basis(std::size_t i) const {
    return MonomialBasis(nvars.at(i), 2 * order);
  }
};

/// Layout and equality elimination of an order-d relaxation.
///
/// Equality rows are solved exactly: z = z0 + T y over the free slots y, so
/// the SDP carries only PSD blocks.
struct RelaxationPlan {
  std::size_t order = 0;
  std::vector<MeasureLayout> measures;
  std::vector<std::size_t> eq_rows;    // A_d
  std::vector<std::size_t> ineq_rows;  // B_d
  std::size_t num_slots = 0;
  std::vector<BlockOrigin> blocks;

  Eigen::VectorXd z0;
  Eigen::MatrixXd t;  // num_slots x free
  std::vector<std::size_t> free_slots;
  std::vector<detail::InconsistentRow> inconsistent;  // rows index eq_rows
  Eigen::VectorXd objective;  // engine objective over slots
  double objective_offset = 0.0;

  bool consistent() const { return inconsistent.empty(); }

  std::size_t slot(std::size_t measure, const Monomial& m) const {
    const auto& l = measures.at(measure);
    return l.offset + MonomialBasis(l.nvars, 2 * order).rank(m);
  }

  Eigen::VectorXd slots_from(const std::vector<double>& y) const {
    if (y.size() != static_cast<std::size_t>(t.cols())) {
      throw DimensionError("solution vector does not match free slots");
    }
    Eigen::VectorXd yy(t.cols());
    for (std::size_t k = 0; k < y.size(); ++k) yy(static_cast<Eigen::Index>(k)) = y[k];
    return z0 + t * yy;
  }

  PseudoMoments moments(const std::vector<double>& y) const {
    const Eigen::VectorXd z = slots_from(y);
    PseudoMoments pm;
    pm.order = order;
    for (const auto& l : measures) {
      pm.nvars.push_back(l.nvars);
      std::vector<double> zi(l.num_slots);
      for (std::size_t k = 0; k < l.num_slots; ++k) {
        zi[k] = z(static_cast<Eigen::Index>(l.offset + k));
      }
      pm.z.push_back(std::move(zi));
    }
    pm.objective_value = objective.dot(z);
    return pm;
  }
};

struct MomentRelaxation {
  SdpProblem sdp;
  RelaxationPlan plan;

  /// Engine-sense objective value for an LMI point y.
  double value(const std::vector<double>& y) const {
    double v = plan.objective_offset;
    for (std::size_t k = 0; k < y.size(); ++k) v += sdp.b[k] * y[k];
    return v;
  }

  /// Engine-sense value from a solution's b.y.
  double value(const SdpSolution& s) const { return plan.objective_offset + s.dual_value; }
};

namespace detail {

inline bool tuple_within(const PolyTuple& t, std::size_t d) {
  for (const auto& q : t) {
    if (static_cast<std::size_t>(q.degree()) > 2 * d) return false;
  }
  return true;
}

inline Eigen::VectorXd tuple_row(const PolyTuple& t, const RelaxationPlan& plan) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(plan.num_slots));
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (const auto& [m, c] : t[i].terms()) {
      row(static_cast<Eigen::Index>(plan.slot(i, m))) += c;
    }
  }
  return row;
}

inline double clean(double v) { return std::abs(v) <= kAssemblyZeroTol ? 0.0 : v; }

/// Adds the affine form ell(z) = const + coef.y to `blk` at (r, c) as
/// S = C - sum y_k A_k with sign +1 (S = ell) or -1 (S = -ell).
inline void place_form(SdpProblem& sdp, std::size_t blk, std::size_t r,
                       std::size_t c, double constant, const Eigen::VectorXd& coef,
                       double sign) {
  sdp.c.add(blk, r, c, clean(sign * constant));
  for (Eigen::Index k = 0; k < coef.size(); ++k) {
    const double v = clean(coef(k));
    if (v != 0.0) sdp.a[static_cast<std::size_t>(k)].add(blk, r, c, -sign * v);
  }
}

}  // namespace detail

inline RelaxationPlan make_plan(const GmpProblem& p, std::size_t d) {
  const std::size_t d0 = min_degree(p);
  if (d < d0) {
    throw DegreeError("relaxation order " + std::to_string(d) +
                      " is below the minimal order " + std::to_string(d0));
  }
  RelaxationPlan plan;
  plan.order = d;
  for (const auto& m : p.measures()) {
    MeasureLayout l;
    l.nvars = m.set.nvars();
    l.offset = plan.num_slots;
    l.num_slots = basis_size(l.nvars, 2 * d);
    l.basis_size = basis_size(l.nvars, d);
    for (const auto& g : m.set.constraints()) {
      l.localizing_degrees.push_back(localizing_degree(g));
    }
    if (plan.num_slots > std::numeric_limits<std::size_t>::max() - l.num_slots) {
      throw SizeLimitError("moment layout overflows");
    }
    plan.num_slots += l.num_slots;
    plan.measures.push_back(std::move(l));
  }
  for (std::size_t a = 0; a < p.equalities().size(); ++a) {
    if (detail::tuple_within(p.equalities()[a].phi, d)) plan.eq_rows.push_back(a);
  }
  for (std::size_t b = 0; b < p.inequalities().size(); ++b) {
    if (detail::tuple_within(p.inequalities()[b].psi, d)) plan.ineq_rows.push_back(b);
  }
  return plan;
}

/// Order-d moment relaxation as  max b.y  s.t.  C - sum y_k A_k PSD, with one
/// block per localizing matrix and one 1x1 block per inequality row.
inline MomentRelaxation build_relaxation(const GmpProblem& p, std::size_t d) {
  MomentRelaxation out;
  RelaxationPlan& plan = out.plan;
  plan = make_plan(p, d);
  const auto ns = static_cast<Eigen::Index>(plan.num_slots);

  Eigen::MatrixXd e(static_cast<Eigen::Index>(plan.eq_rows.size()), ns);
  Eigen::VectorXd a(static_cast<Eigen::Index>(plan.eq_rows.size()));
  for (std::size_t r = 0; r < plan.eq_rows.size(); ++r) {
    const auto& row = p.equalities()[plan.eq_rows[r]];
    e.row(static_cast<Eigen::Index>(r)) = detail::tuple_row(row.phi, plan).transpose();
    a(static_cast<Eigen::Index>(r)) = row.rhs;
  }
  const detail::RowReduction red = detail::reduce_rows(e, a);
  plan.inconsistent = red.inconsistent_rows;
  plan.free_slots = red.free_cols;
  plan.z0 = Eigen::VectorXd::Zero(ns);
  plan.t = Eigen::MatrixXd::Zero(ns, static_cast<Eigen::Index>(red.free_cols.size()));
  for (std::size_t r = 0; r < red.rank(); ++r) {
    plan.z0(static_cast<Eigen::Index>(red.pivot_cols[r])) = red.rhs(static_cast<Eigen::Index>(r));
  }
  for (std::size_t k = 0; k < red.free_cols.size(); ++k) {
    const auto f = static_cast<Eigen::Index>(red.free_cols[k]);
    const auto kk = static_cast<Eigen::Index>(k);
    plan.t(f, kk) = 1.0;
    for (std::size_t r = 0; r < red.rank(); ++r) {
      plan.t(static_cast<Eigen::Index>(red.pivot_cols[r]), kk) =
          -red.reduced(static_cast<Eigen::Index>(r), f);
    }
  }

  SdpProblem& sdp = out.sdp;
  const std::size_t m = red.free_cols.size();
  sdp.a.resize(m);
  auto affine = [&](const LinearForm& f) {
    double constant = 0.0;
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    for (const auto& [s, c] : f) {
      constant += c * plan.z0(static_cast<Eigen::Index>(s));
      coef += c * plan.t.row(static_cast<Eigen::Index>(s)).transpose();
    }
    return std::pair{constant, coef};
  };

  for (std::size_t i = 0; i < p.num_measures(); ++i) {
    const auto& set = p.measure(i).set;
    for (std::size_t j = 0; j < set.size(); ++j) {
      const LinearFormMatrix lm = localizing_matrix(set[j], d, plan.measures[i].offset);
      const std::size_t blk = sdp.block_sizes.size();
      sdp.block_sizes.push_back(lm.size());
      plan.blocks.push_back({BlockOrigin::Kind::localizing, i, j});
      for (std::size_t r = 0; r < lm.size(); ++r) {
        for (std::size_t c = r; c < lm.size(); ++c) {
          const auto [k0, kc] = affine(lm[r][c]);
          detail::place_form(sdp, blk, r, c, k0, kc, 1.0);
        }
      }
    }
  }
  for (std::size_t b : plan.ineq_rows) {
    const auto& row = p.inequalities()[b];
    const Eigen::VectorXd w = detail::tuple_row(row.psi, plan);
    LinearForm f;
    for (Eigen::Index s = 0; s < w.size(); ++s) {
      if (w(s) != 0.0) f[static_cast<std::size_t>(s)] = w(s);
    }
    const auto [k0, kc] = affine(f);
    const std::size_t blk = sdp.block_sizes.size();
    sdp.block_sizes.push_back(1);
    plan.blocks.push_back({BlockOrigin::Kind::inequality, 0, b});
    // bound - psi(z) >= 0
    detail::place_form(sdp, blk, 0, 0, k0 - row.bound, kc, -1.0);
  }

  plan.objective = detail::tuple_row(p.objective(), plan);
  plan.objective_offset = plan.objective.dot(plan.z0);
  const Eigen::VectorXd bvec = plan.t.transpose() * plan.objective;
  sdp.b.resize(m);
  for (std::size_t k = 0; k < m; ++k) sdp.b[k] = detail::clean(bvec(static_cast<Eigen::Index>(k)));
  return out;
}

/// sum_{|r| <= d} x^{2r}: the polynomial whose Riesz value is Tr M_d(z).
inline Polynomial trace_polynomial(std::size_t nvars, std::size_t d) {
  Polynomial t(nvars);
  const MonomialBasis basis(nvars, d);
  for (const auto& r : basis.monomials()) {
    t = t + Polynomial::monomial(r * r);
  }
  return t;
}

/// Engine objective c_i - eps * sum_{|r| <= d} x^{2r} for every measure.
/// For a minimization instance this is  min L(f) + eps Tr M_d(z).
inline GmpProblem penalized_problem(const GmpProblem& p, std::size_t d, double eps) {
  if (eps == 0.0) throw Error("trace penalty requires eps != 0");
  PolyTuple c = p.objective();
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] = c[i] - eps * trace_polynomial(c[i].nvars(), d);
  }
  return p.with_objective(std::move(c));
}

/// Subtracts eps Tr M_d(z_i) from the engine objective of a built relaxation.
inline MomentRelaxation add_trace_penalty(const MomentRelaxation& r, double eps) {
  if (eps == 0.0) throw Error("trace penalty requires eps != 0");
  MomentRelaxation out = r;
  RelaxationPlan& plan = out.plan;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(plan.num_slots));
  for (std::size_t i = 0; i < plan.measures.size(); ++i) {
    const auto& l = plan.measures[i];
    const MonomialBasis basis(l.nvars, plan.order);
    for (const auto& m : basis.monomials()) {
      w(static_cast<Eigen::Index>(plan.slot(i, m * m))) += 1.0;
    }
  }
  plan.objective -= eps * w;
  plan.objective_offset = plan.objective.dot(plan.z0);
  const Eigen::VectorXd bvec = plan.t.transpose() * plan.objective;
  for (std::size_t k = 0; k < out.sdp.b.size(); ++k) {
    out.sdp.b[k] = detail::clean(bvec(static_cast<Eigen::Index>(k)));
  }
  return out;
}

/// Unknowns of the SOS program: multipliers then Gram entries.
struct SosLayout {
  struct Gram {
    std::size_t measure;
    std::size_t constraint;
    std::size_t size;
    std::size_t offset;  // first unknown; upper triangle row-major
  };
  std::size_t order = 0;
  std::vector<std::size_t> eq_rows;
  std::vector<std::size_t> ineq_rows;
  std::vector<Gram> grams;
  std::size_t num_unknowns = 0;

  std::size_t x_index(std::size_t r) const { return r; }
  std::size_t y_index(std::size_t r) const { return eq_rows.size() + r; }
};

struct SosCertificate {
  std::size_t order = 0;
  std::vector<double> x;  // over A_d
  std::vector<double> y;  // over B_d
  /// grams[i][j] represents sigma_{i,j} = e^T G e on MonomialBasis(n_i, d - d_ij).
  std::vector<std::vector<Eigen::MatrixXd>> grams;
};

/// SOS program in LMI form. Unknowns u = (x, y, Gram entries) satisfy the
/// coefficient identities exactly through u = u0 + T w; the SDP variable is w.
///   minimize a.x + b.y  <=>  max -(a.x + b.y).
struct SosProgram {
  SdpProblem sdp;
  SosLayout layout;
  Eigen::VectorXd u0;
  Eigen::MatrixXd t;  // num_unknowns x m
  double objective_offset = 0.0;
  /// Free directions that move the objective without touching any block.
  bool unbounded_direction = false;
  bool consistent = true;

  /// SOS value (minimization sense, engine units) for an LMI point w.
  double value(const std::vector<double>& w) const {
    double v = objective_offset;
    for (std::size_t k = 0; k < w.size(); ++k) v += sdp.b[k] * w[k];
    return -v;
  }

  /// SOS value from a solution's b.w.
  double value(const SdpSolution& s) const { return -(objective_offset + s.dual_value); }

  SosCertificate certificate(const std::vector<double>& w,
                             const GmpProblem& p) const {
    Eigen::VectorXd ww(static_cast<Eigen::Index>(w.size()));
    for (std::size_t k = 0; k < w.size(); ++k) ww(static_cast<Eigen::Index>(k)) = w[k];
    const Eigen::VectorXd u = u0 + t * ww;
    SosCertificate cert;
    cert.order = layout.order;
    for (std::size_t r = 0; r < layout.eq_rows.size(); ++r) {
      cert.x.push_back(u(static_cast<Eigen::Index>(layout.x_index(r))));
    }
    for (std::size_t r = 0; r < layout.ineq_rows.size(); ++r) {
      cert.y.push_back(u(static_cast<Eigen::Index>(layout.y_index(r))));
    }
    cert.grams.resize(p.num_measures());
    for (const auto& g : layout.grams) {
      Eigen::MatrixXd m(static_cast<Eigen::Index>(g.size), static_cast<Eigen::Index>(g.size));
      std::size_t e = g.offset;
      for (std::size_t r = 0; r < g.size; ++r) {
        for (std::size_t c = r; c < g.size; ++c, ++e) {
          const double v = u(static_cast<Eigen::Index>(e));
          m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
          m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = v;
        }
      }
      cert.grams[g.measure].push_back(std::move(m));
    }
    return cert;
  }
};

/// Order-d SOS program: find x, y >= 0 and PSD Gram matrices with
///   sum_a x_a phi_{a,i} + sum_b y_b psi_{b,i} - c_i = sum_j sigma_{ij} g_{ij}
/// coefficient-wise up to degree 2d, minimizing a.x + b.y.
inline SosProgram build_sos_dual(const GmpProblem& p, std::size_t d) {
  const RelaxationPlan plan = make_plan(p, d);
  SosProgram out;
  SosLayout& lay = out.layout;
  lay.order = d;
  lay.eq_rows = plan.eq_rows;
  lay.ineq_rows = plan.ineq_rows;
  lay.num_unknowns = lay.eq_rows.size() + lay.ineq_rows.size();
  for (std::size_t i = 0; i < p.num_measures(); ++i) {
    const auto& set = p.measure(i).set;
    for (std::size_t j = 0; j < set.size(); ++j) {
      const std::size_t s = basis_size(set.nvars(), d - localizing_degree(set[j]));
      lay.grams.push_back({i, j, s, lay.num_unknowns});
      lay.num_unknowns += s * (s + 1) / 2;
    }
  }

  // One identity per (measure, monomial of degree <= 2d).
  const auto rows = static_cast<Eigen::Index>(plan.num_slots);
  const auto cols = static_cast<Eigen::Index>(lay.num_unknowns);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
  for (std::size_t r = 0; r < lay.eq_rows.size(); ++r) {
    const auto& phi = p.equalities()[lay.eq_rows[r]].phi;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      for (const auto& [m, c] : phi[i].terms()) {
        e(static_cast<Eigen::Index>(plan.slot(i, m)),
          static_cast<Eigen::Index>(lay.x_index(r))) += c;
      }
    }
  }
  for (std::size_t r = 0; r < lay.ineq_rows.size(); ++r) {
    const auto& psi = p.inequalities()[lay.ineq_rows[r]].psi;
    for (std::size_t i = 0; i < psi.size(); ++i) {
      for (const auto& [m, c] : psi[i].terms()) {
        e(static_cast<Eigen::Index>(plan.slot(i, m)),
          static_cast<Eigen::Index>(lay.y_index(r))) += c;
      }
    }
  }
  for (const auto& g : lay.grams) {
    const auto& poly = p.measure(g.measure).set[g.constraint];
    const MonomialBasis basis(poly.nvars(), d - localizing_degree(poly));
    std::size_t u = g.offset;
    for (std::size_t r = 0; r < g.size; ++r) {
      for (std::size_t c = r; c < g.size; ++c, ++u) {
        const double w = r == c ? 1.0 : 2.0;
        const Monomial rc = basis[r] * basis[c];
        for (const auto& [m, coef] : poly.terms()) {
          e(static_cast<Eigen::Index>(plan.slot(g.measure, m * rc)),
            static_cast<Eigen::Index>(u)) -= w * coef;
        }
      }
    }
  }
  for (std::size_t i = 0; i < p.num_measures(); ++i) {
    for (const auto& [m, c] : p.objective()[i].terms()) {
      rhs(static_cast<Eigen::Index>(plan.slot(i, m))) += c;
    }
  }

  const detail::RowReduction red = detail::reduce_rows(e, rhs);
  out.consistent = red.consistent();
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(cols);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(cols, static_cast<Eigen::Index>(red.free_cols.size()));
  for (std::size_t r = 0; r < red.rank(); ++r) {
    u0(static_cast<Eigen::Index>(red.pivot_cols[r])) = red.rhs(static_cast<Eigen::Index>(r));
  }
  for (std::size_t k = 0; k < red.free_cols.size(); ++k) {
    const auto f = static_cast<Eigen::Index>(red.free_cols[k]);
    const auto kk = static_cast<Eigen::Index>(k);
    t(f, kk) = 1.0;
    for (std::size_t r = 0; r < red.rank(); ++r) {
      t(static_cast<Eigen::Index>(red.pivot_cols[r]), kk) =
          -red.reduced(static_cast<Eigen::Index>(r), f);
    }
  }

  Eigen::VectorXd q = Eigen::VectorXd::Zero(cols);
  for (std::size_t r = 0; r < lay.eq_rows.size(); ++r) {
    q(static_cast<Eigen::Index>(lay.x_index(r))) = p.equalities()[lay.eq_rows[r]].rhs;
  }
  for (std::size_t r = 0; r < lay.ineq_rows.size(); ++r) {
    q(static_cast<Eigen::Index>(lay.y_index(r))) = p.inequalities()[lay.ineq_rows[r]].bound;
  }

  // Blocks: Gram matrices, then y_b >= 0.
  std::vector<std::pair<std::size_t, std::pair<std::size_t, std::size_t>>> where(
      lay.num_unknowns, {SIZE_MAX, {0, 0}});
  std::vector<std::size_t> block_sizes;
  for (const auto& g : lay.grams) {
    std::size_t u = g.offset;
    for (std::size_t r = 0; r < g.size; ++r) {
      for (std::size_t c = r; c < g.size; ++c, ++u) where[u] = {block_sizes.size(), {r, c}};
    }
    block_sizes.push_back(g.size);
  }
  for (std::size_t r = 0; r < lay.ineq_rows.size(); ++r) {
    where[lay.y_index(r)] = {block_sizes.size(), {0, 0}};
    block_sizes.push_back(1);
  }

  // Keep only free directions that touch a block; the rest either leave the
  // objective unchanged or make it unbounded below.
  const Eigen::VectorXd tq = t.transpose() * q;
  std::vector<std::size_t> keep;
  for (Eigen::Index k = 0; k < t.cols(); ++k) {
    bool touches = false;
    for (Eigen::Index u = 0; u < cols && !touches; ++u) {
      touches = where[static_cast<std::size_t>(u)].first != SIZE_MAX &&
                std::abs(t(u, k)) > kAssemblyZeroTol;
    }
    if (touches) {
      keep.push_back(static_cast<std::size_t>(k));
    } else if (std::abs(tq(k)) > 1e-9 * (1.0 + q.lpNorm<Eigen::Infinity>())) {
      out.unbounded_direction = true;
    }
  }
  out.t.resize(cols, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.t.col(static_cast<Eigen::Index>(k)) = t.col(static_cast<Eigen::Index>(keep[k]));
  }
  out.u0 = u0;

  SdpProblem& sdp = out.sdp;
  sdp.block_sizes = block_sizes;
  sdp.a.resize(keep.size());
  sdp.b.resize(keep.size());
  for (Eigen::Index u = 0; u < cols; ++u) {
    const auto& [blk, rc] = where[static_cast<std::size_t>(u)];
    if (blk == SIZE_MAX) continue;
    sdp.c.add(blk, rc.first, rc.second, detail::clean(u0(u)));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      const double v = detail::clean(out.t(u, static_cast<Eigen::Index>(k)));
      if (v != 0.0) sdp.a[k].add(blk, rc.first, rc.second, -v);
    }
  }
  const Eigen::VectorXd bvec = -(out.t.transpose() * q);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    sdp.b[k] = detail::clean(bvec(static_cast<Eigen::Index>(k)));
  }
  out.objective_offset = -q.dot(u0);
  return out;
}

struct CertificateViolation {
  enum class Kind { gram_psd, multiplier_sign, identity, sample, shape };
  Kind kind;
  std::string where;
  double magnitude;
};

struct CertificateReport {
  bool passed = true;
  double min_gram_eigenvalue = 0.0;
  double min_multiplier = 0.0;
  double identity_residual = 0.0;
  double min_sample_value = 0.0;
  std::size_t samples_checked = 0;
  std::vector<CertificateViolation> violations;
};

inline const char* to_string(CertificateViolation::Kind k) {
  switch (k) {
    case CertificateViolation::Kind::gram_psd: return "gram_psd";
    case CertificateViolation::Kind::multiplier_sign: return "multiplier_sign";
    case CertificateViolation::Kind::identity: return "identity";
    case CertificateViolation::Kind::sample: return "sample";
    case CertificateViolation::Kind::shape: return "shape";
  }
  return "unknown";
}

/// v_i + w_i - c_i, the polynomial the certificate claims is in the
/// quadratic module of measure i.
inline Polynomial certified_polynomial(const SosCertificate& cert,
                                       const GmpProblem& p, std::size_t i,
                                       const RelaxationPlan& plan) {
  Polynomial s = -p.objective()[i];
  for (std::size_t r = 0; r < plan.eq_rows.size(); ++r) {
    s = s + cert.x[r] * p.equalities()[plan.eq_rows[r]].phi[i];
  }
  for (std::size_t r = 0; r < plan.ineq_rows.size(); ++r) {
    s = s + cert.y[r] * p.inequalities()[plan.ineq_rows[r]].psi[i];
  }
  return s;
}

/// Checks Gram PSD-ness (>= -1e-7), y >= -1e-9, the coefficient identity to
/// 1e-6, and positivity of v + w - c at `nsamples` points of each K_i drawn
/// uniformly from the unit ball by rejection.
inline CertificateReport verify_certificate(const SosCertificate& cert,
                                            const GmpProblem& p, std::size_t d,
                                            std::size_t nsamples,
                                            std::uint64_t seed = 1) {
  CertificateReport rep;
  auto flag = [&](CertificateViolation::Kind k, std::string where, double mag) {
    rep.passed = false;
    rep.violations.push_back({k, std::move(where), mag});
  };
  const RelaxationPlan plan = make_plan(p, d);
  bool shape_ok = cert.x.size() == plan.eq_rows.size() &&
                  cert.y.size() == plan.ineq_rows.size() &&
                  cert.grams.size() == p.num_measures();
  for (std::size_t i = 0; shape_ok && i < p.num_measures(); ++i) {
    const auto& set = p.measure(i).set;
    shape_ok = cert.grams[i].size() == set.size();
    for (std::size_t j = 0; shape_ok && j < set.size(); ++j) {
      const auto s = static_cast<Eigen::Index>(
          basis_size(set.nvars(), d - localizing_degree(set[j])));
      shape_ok = cert.grams[i][j].rows() == s && cert.grams[i][j].cols() == s;
    }
  }
  if (!shape_ok) {
    flag(CertificateViolation::Kind::shape, "certificate", 1.0);
    return rep;
  }

  rep.min_gram_eigenvalue = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cert.grams.size(); ++i) {
    for (std::size_t j = 0; j < cert.grams[i].size(); ++j) {
      const Eigen::MatrixXd& g = cert.grams[i][j];
      const double asym = (g - g.transpose()).cwiseAbs().maxCoeff();
      const Eigen::MatrixXd sym = (g + g.transpose()) / 2;
      const double lmin =
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly)
              .eigenvalues()
              .minCoeff();
      rep.min_gram_eigenvalue = std::min(rep.min_gram_eigenvalue, lmin);
      const std::string where = "G[" + p.measure(i).name + "," + std::to_string(j) + "]";
      if (lmin < -1e-7) flag(CertificateViolation::Kind::gram_psd, where, -lmin);
      if (asym > 1e-12) flag(CertificateViolation::Kind::gram_psd, where + " asymmetric", asym);
    }
  }
  rep.min_multiplier = 0.0;
  for (std::size_t r = 0; r < cert.y.size(); ++r) {
    rep.min_multiplier = std::min(rep.min_multiplier, cert.y[r]);
    if (cert.y[r] < -1e-9) {
      flag(CertificateViolation::Kind::multiplier_sign, "y[" + std::to_string(r) + "]",
           -cert.y[r]);
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  rep.min_sample_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.num_measures(); ++i) {
    const auto& set = p.measure(i).set;
    const std::size_t n = set.nvars();
    const Polynomial target = certified_polynomial(cert, p, i, plan);
    Polynomial sos(n);
    for (std::size_t j = 0; j < set.size(); ++j) {
      const MonomialBasis basis(n, d - localizing_degree(set[j]));
      const Eigen::MatrixXd& g = cert.grams[i][j];
      Polynomial sigma(n);
      for (std::size_t r = 0; r < basis.size(); ++r) {
        for (std::size_t c = 0; c < basis.size(); ++c) {
          const double v = g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
          if (v != 0.0) sigma = sigma + Polynomial::monomial(basis[r] * basis[c], v);
        }
      }
      sos = sos + sigma * set[j];
    }
    const double resid = target.distance(sos);
    rep.identity_residual = std::max(rep.identity_residual, resid);
    if (resid > 1e-6) {
      flag(CertificateViolation::Kind::identity, "measure " + p.measure(i).name, resid);
    }

    // Uniform in the unit ball: Gaussian direction, radius U^(1/n).
    std::size_t accepted = 0;
    const std::size_t max_draws = 1000 * std::max<std::size_t>(nsamples, 1);
    std::vector<double> x(n);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t draw = 0; draw < max_draws && accepted < nsamples; ++draw) {
      double norm = 0.0;
      for (auto& v : x) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      const double radius = n == 0 ? 0.0 : std::pow(unit(rng), 1.0 / static_cast<double>(n));
      for (auto& v : x) v = norm > 0 ? v / norm * radius : 0.0;
      if (!membership_oracle(set, x)) continue;
      ++accepted;
      worst = std::min(worst, target.eval(x));
    }
    rep.samples_checked += accepted;
    if (accepted > 0) {
      rep.min_sample_value = std::min(rep.min_sample_value, worst);
      if (worst < -1e-6) {
        flag(CertificateViolation::Kind::sample, "measure " + p.measure(i).name, -worst);
      }
    }
  }
  if (rep.samples_checked == 0) rep.min_sample_value = 0.0;
  return rep;
}

/// Columns hold the monomial coefficients (MonomialBasis(n, s) order) of the
/// tensor Chebyshev polynomials prod_l T_{a_l}((x_l - c_l) / h_l), one per
/// exponent a of degree <= s in graded order. Upper triangular.
inline Eigen::MatrixXd chebyshev_change_of_basis(std::size_t n, std::size_t s,
                                                 const Box& box) {
  const MonomialBasis basis(n, s);
  std::vector<std::vector<Polynomial>> cheb(n);
  for (std::size_t l = 0; l < n; ++l) {
    const double c = (box.lo[l] + box.hi[l]) / 2;
    const double h = (box.hi[l] - box.lo[l]) / 2;
    const Polynomial u =
        (Polynomial::variable(n, l) - Polynomial::constant(n, c)).scaled(1.0 / h);
    cheb[l].push_back(Polynomial::constant(n, 1.0));
    if (s >= 1) cheb[l].push_back(u);
    for (std::size_t k = 2; k <= s; ++k) {
      cheb[l].push_back(2.0 * u * cheb[l][k - 1] - cheb[l][k - 2]);
    }
  }
  const auto size = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(size, size);
  for (std::size_t j = 0; j < basis.size(); ++j) {
    Polynomial q = Polynomial::constant(n, 1.0);
    for (std::size_t l = 0; l < n; ++l) {
      q = q * cheb[l][static_cast<std::size_t>(basis[j][l])];
    }
    for (const auto& [m, coef] : q.terms()) {
      p(static_cast<Eigen::Index>(basis.rank(m)), static_cast<Eigen::Index>(j)) = coef;
    }
  }
  return p;
}

/// Outer bounding box of a set in the unit ball, from order-d0 relaxations of
/// min/max x_l. Falls back to [-1, 1] per coordinate when a bound cannot be
/// computed; degenerate intervals are widened to 1e-3.
inline Box relaxation_bounding_box(const SemialgebraicSet& k) {
  const std::size_t n = k.nvars();
  Box box{std::vector<double>(n, -1.0), std::vector<double>(n, 1.0)};
  for (std::size_t l = 0; l < n; ++l) {
    for (int dir : {1, -1}) {
      const Polynomial f = Polynomial::variable(n, l).scaled(dir);
      const GmpProblem pop = make_pop(f, k);
      const MomentRelaxation r = build_relaxation(pop, min_degree(pop));
      if (!r.plan.consistent()) continue;
      const SdpSolution s = solve(r.sdp);
      if (s.status != SdpStatus::optimal) continue;
      const double v = pop.reported_value(r.value(s.y));  // lower bound of min f
      if (dir == 1) {
        box.lo[l] = std::clamp(v - 1e-9, -1.0, 1.0);
      } else {
        box.hi[l] = std::clamp(-v + 1e-9, -1.0, 1.0);
      }
    }
    if (!(box.hi[l] - box.lo[l] >= 1e-3)) {
      const double c = (box.lo[l] + box.hi[l]) / 2;
      box.lo[l] = c - 5e-4;
      box.hi[l] = c + 5e-4;
    }
  }
  return box;
}

inline std::vector<Box> measure_boxes(const GmpProblem& p) {
  std::vector<Box> boxes;
  for (const auto& m : p.measures()) boxes.push_back(relaxation_bounding_box(m.set));
  return boxes;
}

/// Block congruences expressing every localizing block in the Chebyshev basis
/// of its measure's box.
inline std::vector<Eigen::MatrixXd> relaxation_congruence(const MomentRelaxation& r,
                                                          const std::vector<Box>& boxes) {
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t b = 0; b < r.plan.blocks.size(); ++b) {
    const auto& o = r.plan.blocks[b];
    if (o.kind == BlockOrigin::Kind::inequality) {
      out.push_back(Eigen::MatrixXd::Identity(1, 1));
      continue;
    }
    const auto& l = r.plan.measures[o.measure];
    const std::size_t s = r.plan.order - l.localizing_degrees[o.constraint_index()];
    out.push_back(chebyshev_change_of_basis(l.nvars, s, boxes.at(o.measure)));
  }
  return out;
}

/// Gram blocks transform contravariantly: G -> P^{-1} G P^{-T}.
inline std::vector<Eigen::MatrixXd> sos_congruence(const SosProgram& sos,
                                                   const GmpProblem& p,
                                                   const std::vector<Box>& boxes) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& g : sos.layout.grams) {
    const auto& set = p.measure(g.measure).set;
    const std::size_t s = sos.layout.order - localizing_degree(set[g.constraint]);
    const Eigen::MatrixXd pm = chebyshev_change_of_basis(set.nvars(), s, boxes.at(g.measure));
    const Eigen::MatrixXd inv =
        pm.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(pm.rows(), pm.cols()));
    out.push_back(inv.transpose());
  }
  for (std::size_t r = 0; r < sos.layout.ineq_rows.size(); ++r) {
    out.push_back(Eigen::MatrixXd::Identity(1, 1));
  }
  return out;
}

}  // namespace momsos
