#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "momsos/detail/quad.hpp"
#include "momsos/error.hpp"

namespace momsos {

struct BlockEntry {
  std::size_t block;
  std::size_t row;  // row <= col
  std::size_t col;
  double value;
};

/// Sparse symmetric block-diagonal matrix stored by its upper triangle.
class BlockMatrix {
 public:
  /// Accumulates v at (row, col) and (col, row).
  void add(std::size_t block, std::size_t row, std::size_t col, double v) {
    if (row > col) std::swap(row, col);
    if (v == 0.0) return;
    auto [it, inserted] = entries_.try_emplace({block, row, col}, v);
    if (!inserted) {
      it->second += v;
      if (it->second == 0.0) entries_.erase(it);
    }
  }

  double get(std::size_t block, std::size_t row, std::size_t col) const {
    if (row > col) std::swap(row, col);
    const auto it = entries_.find({block, row, col});
    return it == entries_.end() ? 0.0 : it->second;
  }

  bool empty() const { return entries_.empty(); }
  std::size_t nnz() const { return entries_.size(); }

  std::vector<BlockEntry> entries() const {
    std::vector<BlockEntry> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.push_back({k[0], k[1], k[2], v});
    return out;
  }

  /// Dense block `block` of size n.
  Eigen::MatrixXd dense_block(std::size_t block, std::size_t n) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(n));
    for (auto it = entries_.lower_bound({block, 0, 0});
         it != entries_.end() && it->first[0] == block; ++it) {
      const auto r = static_cast<Eigen::Index>(it->first[1]);
      const auto c = static_cast<Eigen::Index>(it->first[2]);
      m(r, c) = it->second;
      m(c, r) = it->second;
    }
    return m;
  }

  /// Throws when a block is not symmetric within `tol`.
  static BlockMatrix from_dense(const std::vector<Eigen::MatrixXd>& blocks,
                                double tol = 0.0) {
    BlockMatrix out;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& m = blocks[b];
      if (m.rows() != m.cols()) throw Error("block is not square");
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = r; c < m.cols(); ++c) {
          if (std::abs(m(r, c) - m(c, r)) > tol) {
            throw Error("non-symmetric block " + std::to_string(b));
          }
          out.add(b, static_cast<std::size_t>(r), static_cast<std::size_t>(c),
                  m(r, c));
        }
      }
    }
    return out;
  }

  friend bool operator==(const BlockMatrix& a, const BlockMatrix& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::map<std::array<std::size_t, 3>, double> entries_;
};

/// Block-diagonal linear matrix inequality program
///
///   max  b.y   s.t.  S = C - sum_k y_k A_k  is PSD,
///
/// paired with  min <C, X>  s.t.  <A_k, X> = b_k,  X PSD.
struct SdpProblem {
  std::vector<std::size_t> block_sizes;
  /// Blocks flagged diagonal (SDPA negative sizes); may be left empty.
  std::vector<bool> diagonal;
  BlockMatrix c;
  std::vector<BlockMatrix> a;
  std::vector<double> b;

  std::size_t num_vars() const { return b.size(); }
  std::size_t num_blocks() const { return block_sizes.size(); }

  bool is_diagonal(std::size_t block) const {
    return block < diagonal.size() && diagonal[block];
  }

  std::size_t total_dim() const {
    std::size_t n = 0;
    for (auto s : block_sizes) n += s;
    return n;
  }

  void validate() const {
    if (a.size() != b.size()) {
      throw Error("SDP has " + std::to_string(a.size()) +
                  " coefficient matrices but " + std::to_string(b.size()) +
                  " objective entries");
    }
    if (!diagonal.empty() && diagonal.size() != block_sizes.size()) {
      throw Error("diagonal flags do not match block count");
    }
    for (auto s : block_sizes) {
      if (s == 0) throw Error("SDP block of size zero");
    }
    for (double v : b) {
      if (!std::isfinite(v)) throw Error("non-finite objective coefficient");
    }
    auto check = [&](const BlockMatrix& m, const std::string& what) {
      for (const auto& e : m.entries()) {
        if (e.block >= block_sizes.size() || e.col >= block_sizes[e.block]) {
          throw Error(what + ": entry outside block structure");
        }
        if (!std::isfinite(e.value)) throw Error(what + ": non-finite entry");
        if (is_diagonal(e.block) && e.row != e.col) {
          throw Error(what + ": off-diagonal entry in diagonal block");
        }
      }
    };
    check(c, "C");
    for (std::size_t k = 0; k < a.size(); ++k) check(a[k], "A" + std::to_string(k + 1));
  }

  /// C - sum_k y_k A_k, dense per block.
  std::vector<Eigen::MatrixXd> slack(const std::vector<double>& y) const {
    std::vector<Eigen::MatrixXd> s;
    for (std::size_t blk = 0; blk < block_sizes.size(); ++blk) {
      s.push_back(c.dense_block(blk, block_sizes[blk]));
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (y[k] == 0.0) continue;
      for (const auto& e : a[k].entries()) {
        const auto r = static_cast<Eigen::Index>(e.row);
        const auto cc = static_cast<Eigen::Index>(e.col);
        s[e.block](r, cc) -= y[k] * e.value;
        if (r != cc) s[e.block](cc, r) -= y[k] * e.value;
      }
    }
    return s;
  }
};

enum class SdpStatus { optimal, infeasible, unbounded, max_iters, numerical_failure };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::optimal: return "optimal";
    case SdpStatus::infeasible: return "infeasible";
    case SdpStatus::unbounded: return "unbounded";
    case SdpStatus::max_iters: return "max_iters";
    case SdpStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

struct IterationRecord {
  int iter;
  double primal_obj;  // <C, X>
  double dual_obj;    // b.y
  double complementarity;
  double primal_infeas;
  double dual_infeas;
  double step_primal;
  double step_dual;
  double sigma;
};

/// `infeasible` means the LMI (the y side) has no feasible point; `unbounded`
/// means b.y is unbounded above on it.
struct SdpSolution {
  SdpStatus status = SdpStatus::numerical_failure;
  std::vector<double> y;
  std::vector<Eigen::MatrixXd> s;
  std::vector<Eigen::MatrixXd> x;
  double primal_value = 0.0;  // <C, X>
  double dual_value = 0.0;    // b.y
  double gap = 0.0;           // |primal - dual| / (1 + |primal|)
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;
  std::string message;
  std::vector<IterationRecord> log;
};

enum class Precision { standard, extended, quad };

inline const char* to_string(Precision p) {
  switch (p) {
    case Precision::standard: return "double";
    case Precision::extended: return "long double";
    case Precision::quad: return "float128";
  }
  return "unknown";
}

struct SolverOptions {
  double tol = 1e-8;
  int max_iters = 200;
  int verbosity = 0;
  double step_fraction = 0.98;
  double sigma_min = 0.01;
  double sigma_max = 0.5;
  /// Normalized-ray residual below which infeasibility is declared.
  double infeasibility_tol = 1e-8;
  /// Iterate norm beyond which an improving iterate is taken as a ray.
  double divergence_norm = 1e10;
  /// Arithmetic of the iteration; data and results stay double.
  Precision precision = Precision::standard;
  /// When the iteration stalls, the best iterate is still reported optimal
  /// if gap and residuals are all below this level.
  double acceptable_tol = 1e-7;
};

namespace detail {

/// Normalized ray residual accepted once an iterate has diverged.
inline constexpr double kDivergenceRayTol = 1e-4;

template <class Real>
Real rsqrt(const Real& v) {
  using std::sqrt;
  return sqrt(v);
}

template <class Real>
Real rabs(const Real& v) {
  using std::abs;
  return abs(v);
}


template <class Real>
class IpmSolver {
  using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

  struct Coef {
    Eigen::Index row;
    Eigen::Index col;
    Real value;
  };
  struct VarBlock {
    std::size_t var;
    std::vector<Coef> coefs;
    Mat dense;
  };

 public:
  IpmSolver(const SdpProblem& p, const SolverOptions& opts)
      : p_(p), opts_(opts), m_(p.num_vars()), nb_(p.num_blocks()) {
    for (auto s : p.block_sizes) sizes_.push_back(static_cast<Eigen::Index>(s));
    n_total_ = static_cast<Real>(p.total_dim());
    for (std::size_t blk = 0; blk < nb_; ++blk) {
      c_.push_back(p.c.dense_block(blk, p.block_sizes[blk]).template cast<Real>());
    }
    by_block_.resize(nb_);
    b_.resize(static_cast<Eigen::Index>(m_));
    a_norm_.assign(m_, 0);
    for (std::size_t k = 0; k < m_; ++k) {
      b_(static_cast<Eigen::Index>(k)) = p.b[k];
      std::map<std::size_t, VarBlock> parts;
      for (const auto& e : p.a[k].entries()) {
        auto& vb = parts[e.block];
        vb.var = k;
        vb.coefs.push_back({static_cast<Eigen::Index>(e.row),
                            static_cast<Eigen::Index>(e.col),
                            static_cast<Real>(e.value)});
        a_norm_[k] += (e.row == e.col ? 1 : 2) * static_cast<Real>(e.value) *
                      static_cast<Real>(e.value);
      }
      a_norm_[k] = rsqrt(a_norm_[k]);
      for (auto& [blk, vb] : parts) {
        vb.dense = Mat::Zero(sizes_[blk], sizes_[blk]);
        for (const auto& cf : vb.coefs) {
          vb.dense(cf.row, cf.col) = cf.value;
          vb.dense(cf.col, cf.row) = cf.value;
        }
        by_block_[blk].push_back(std::move(vb));
      }
    }
    c_norm_ = 0;
    for (const auto& cb : c_) c_norm_ += cb.squaredNorm();
    c_norm_ = rsqrt(c_norm_);
    b_norm_ = b_.norm();
  }

  SdpSolution run() {
    SdpSolution sol;
    if (m_ == 0) return solve_without_variables();
    if (c_norm_ == 0 && b_norm_ == 0) return zero_solution();

    const Real rootn = rsqrt(n_total_);
    Real xi = std::max<Real>(10, rootn);
    Real eta = std::max<Real>(10, rootn);
    Real a_max = 0;
    for (std::size_t k = 0; k < m_; ++k) {
      xi = std::max(xi, rootn * (1 + rabs(b_(static_cast<Eigen::Index>(k)))) /
                            (1 + a_norm_[k]));
      a_max = std::max(a_max, a_norm_[k]);
    }
    eta = std::max(eta, (1 + std::max(a_max, c_norm_)) / rootn);

    std::vector<Mat> x, s;
    for (auto n : sizes_) {
      x.push_back(xi * Mat::Identity(n, n));
      s.push_back(eta * Mat::Identity(n, n));
    }
    Vec y = Vec::Zero(static_cast<Eigen::Index>(m_));

    struct Snapshot {
      std::vector<Mat> x, s;
      Vec y;
      Real pobj, dobj, gap, pinf, dinf;
    };
    Snapshot best;
    Real best_merit = std::numeric_limits<Real>::infinity();
    Real prev_pobj = std::numeric_limits<Real>::infinity();
    Real prev_dobj = -std::numeric_limits<Real>::infinity();
    int iter = 0;
    for (;; ++iter) {
      std::vector<Mat> rd = residual_dual(x, s, y);
      const Vec ax = apply_a(x);
      const Vec rp = b_ - ax;
      const Real pobj = inner(c_, x);
      const Real dobj = b_.dot(y);
      const Real xs = inner(x, s);
      const Real mu = xs / n_total_;
      const Real gap = rabs(pobj - dobj) / (1 + rabs(pobj));
      const Real pinf = rp.norm() / (1 + b_norm_);
      const Real dinf = frob(rd) / (1 + c_norm_);
      auto record = [&](Real ap, Real ad, Real sigma) {
        sol.log.push_back({iter, static_cast<double>(pobj),
                           static_cast<double>(dobj), static_cast<double>(xs),
                           static_cast<double>(pinf), static_cast<double>(dinf),
                           static_cast<double>(ap), static_cast<double>(ad),
                           static_cast<double>(sigma)});
        if (opts_.verbosity > 0) {
          std::cerr << "ipm " << iter << " pobj " << static_cast<double>(pobj)
                    << " dobj " << static_cast<double>(dobj) << " gap "
                    << static_cast<double>(gap) << " pinf "
                    << static_cast<double>(pinf) << " dinf "
                    << static_cast<double>(dinf) << '\n';
        }
      };
      auto finish = [&](SdpStatus st, std::string msg) {
        record(0, 0, 0);
        if ((st == SdpStatus::max_iters || st == SdpStatus::numerical_failure) &&
            best_merit <= static_cast<Real>(opts_.acceptable_tol)) {
          sol.status = SdpStatus::optimal;
          sol.message = "converged to reduced accuracy (" + msg + ")";
          sol.iterations = iter;
          sol.primal_value = static_cast<double>(best.pobj);
          sol.dual_value = static_cast<double>(best.dobj);
          sol.gap = static_cast<double>(best.gap);
          sol.primal_infeasibility = static_cast<double>(best.pinf);
          sol.dual_infeasibility = static_cast<double>(best.dinf);
          export_iterate(sol, best.x, best.s, best.y);
          return sol;
        }
        sol.status = st;
        sol.message = std::move(msg);
        sol.iterations = iter;
        sol.primal_value = static_cast<double>(pobj);
        sol.dual_value = static_cast<double>(dobj);
        sol.gap = static_cast<double>(gap);
        sol.primal_infeasibility = static_cast<double>(pinf);
        sol.dual_infeasibility = static_cast<double>(dinf);
        export_iterate(sol, x, s, y);
        return sol;
      };

      const Real merit = std::max({gap, pinf, dinf});
      if (merit < best_merit) {
        best_merit = merit;
        best = {x, s, y, pobj, dobj, gap, pinf, dinf};
      }
      const Real tol = static_cast<Real>(opts_.tol);
      if (gap <= tol && pinf <= tol && dinf <= tol) {
        return finish(SdpStatus::optimal, "converged");
      }
      // Farkas ray for the LMI: X PSD, A(X) ~ 0, <C, X> < 0.
      const Real itol = static_cast<Real>(opts_.infeasibility_tol);
      if (iter > 0 && pobj < 0 &&
          (ax.norm() <= itol * (-pobj) ||
           (frob(x) >= opts_.divergence_norm && pobj < prev_pobj &&
            ax.norm() <= kDivergenceRayTol * (-pobj)))) {
        return finish(SdpStatus::infeasible, "LMI infeasible: primal ray found");
      }
      // Improving direction for b.y: -A^T(y) ~ S PSD with b.y > 0.
      if (iter > 0 && dobj > 0) {
        Real ray = 0;
        for (std::size_t blk = 0; blk < nb_; ++blk) {
          ray += (c_[blk] - rd[blk]).squaredNorm();
        }
        ray = rsqrt(ray);
        if (ray <= itol * dobj ||
            (y.norm() >= opts_.divergence_norm && dobj > prev_dobj &&
             ray <= kDivergenceRayTol * dobj)) {
          return finish(SdpStatus::unbounded, "LMI unbounded: dual ray found");
        }
      }
      if (iter >= opts_.max_iters) {
        return finish(SdpStatus::max_iters, "iteration limit reached");
      }
      prev_pobj = pobj;
      prev_dobj = dobj;

      std::vector<Mat> s_inv;
      for (std::size_t blk = 0; blk < nb_; ++blk) {
        Eigen::LLT<Mat> llt(s[blk]);
        if (llt.info() != Eigen::Success) {
          return finish(SdpStatus::numerical_failure,
                        "slack matrix lost definiteness in block " +
                            std::to_string(blk));
        }
        Mat inv = llt.solve(Mat::Identity(sizes_[blk], sizes_[blk]));
        s_inv.push_back((inv + inv.transpose()) / 2);
      }

      Mat schur = schur_complement(x, s_inv);
      Eigen::LDLT<Mat> ldlt;
      Eigen::LLT<Mat> llt(schur);
      bool use_llt = llt.info() == Eigen::Success;
      if (!use_llt) {
        const Real reg = std::max<Real>(schur.diagonal().cwiseAbs().maxCoeff(), 1) *
                         std::numeric_limits<Real>::epsilon() * 100;
        schur.diagonal().array() += reg;
        ldlt.compute(schur);
        if (ldlt.info() != Eigen::Success) {
          return finish(SdpStatus::numerical_failure,
                        "Schur complement factorization failed");
        }
      }
      // Two steps of iterative refinement against the unregularized matrix.
      const Mat schur_exact = use_llt ? schur : schur_complement(x, s_inv);
      auto solve_schur = [&](const Vec& rhs) -> Vec {
        auto base = [&](const Vec& r) {
          return use_llt ? Vec(llt.solve(r)) : Vec(ldlt.solve(r));
        };
        Vec sol_dy = base(rhs);
        for (int k = 0; k < 2; ++k) sol_dy += base(rhs - schur_exact * sol_dy);
        return sol_dy;
      };

      // X Rd S^{-1}, shared by predictor and corrector.
      std::vector<Mat> x_rd_sinv;
      for (std::size_t blk = 0; blk < nb_; ++blk) {
        x_rd_sinv.push_back(x[blk] * rd[blk] * s_inv[blk]);
      }
      const Vec a_xrds = apply_a_nonsym(x_rd_sinv);

      // Predictor (sigma = 0): G = -X.
      std::vector<Mat> g(nb_);
      for (std::size_t blk = 0; blk < nb_; ++blk) g[blk] = -x[blk];
      Vec dy = solve_schur(rp - apply_a(g) + a_xrds);
      std::vector<Mat> ds = dual_step(rd, dy);
      std::vector<Mat> dx = primal_step(g, x, ds, s_inv);
      Real ap = std::min<Real>(1, max_step(x, dx));
      Real ad = std::min<Real>(1, max_step(s, ds));
      std::vector<Mat> xt(nb_), st(nb_);
      for (std::size_t blk = 0; blk < nb_; ++blk) {
        xt[blk] = x[blk] + ap * dx[blk];
        st[blk] = s[blk] + ad * ds[blk];
      }
      const Real ratio = std::max<Real>(inner(xt, st), 0) / xs;
      const Real sigma = std::clamp<Real>(ratio * ratio * ratio,
                                          static_cast<Real>(opts_.sigma_min),
                                          static_cast<Real>(opts_.sigma_max));

      // Corrector: G = sigma mu S^{-1} - X - sym(dXp dSp S^{-1}).
      for (std::size_t blk = 0; blk < nb_; ++blk) {
        g[blk] = sigma * mu * s_inv[blk] - x[blk] - dx[blk] * ds[blk] * s_inv[blk];
      }
      dy = solve_schur(rp - apply_a_nonsym(g) + a_xrds);
      ds = dual_step(rd, dy);
      dx = primal_step(g, x, ds, s_inv);
      const Real frac = static_cast<Real>(opts_.step_fraction);
      ap = std::min<Real>(1, frac * max_step(x, dx));
      ad = std::min<Real>(1, frac * max_step(s, ds));
      if (!(ap > 0) || !(ad > 0) || !std::isfinite(static_cast<double>(ap)) ||
          !std::isfinite(static_cast<double>(ad))) {
        return finish(SdpStatus::numerical_failure, "zero step length");
      }
      record(ap, ad, sigma);
      for (std::size_t blk = 0; blk < nb_; ++blk) {
        x[blk] += ap * dx[blk];
        x[blk] = (x[blk] + x[blk].transpose()).eval() / 2;
        s[blk] += ad * ds[blk];
        s[blk] = (s[blk] + s[blk].transpose()).eval() / 2;
      }
      y += ad * dy;
    }
  }

 private:
  static Real inner(const std::vector<Mat>& u, const std::vector<Mat>& v) {
    Real t = 0;
    for (std::size_t blk = 0; blk < u.size(); ++blk) {
      t += (u[blk].array() * v[blk].array()).sum();
    }
    return t;
  }

  static Real frob(const std::vector<Mat>& u) {
    Real t = 0;
    for (const auto& m : u) t += m.squaredNorm();
    return rsqrt(t);
  }

  // <A_k, W> for symmetric or non-symmetric W (only the symmetric part of W
  // contributes since A_k is symmetric).
  Vec apply_a_nonsym(const std::vector<Mat>& w) const {
    Vec out = Vec::Zero(static_cast<Eigen::Index>(m_));
    for (std::size_t blk = 0; blk < nb_; ++blk) {
      for (const auto& vb : by_block_[blk]) {
        Real t = 0;
        for (const auto& cf : vb.coefs) {
          t += cf.row == cf.col
                   ? cf.value * w[blk](cf.row, cf.col)
                   : cf.value * (w[blk](cf.row, cf.col) + w[blk](cf.col, cf.row));
        }
        out(static_cast<Eigen::Index>(vb.var)) += t;
      }
    }
    return out;
  }

  Vec apply_a(const std::vector<Mat>& w) const { return apply_a_nonsym(w); }

  std::vector<Mat> apply_at(const Vec& y) const {
    std::vector<Mat> out;
    for (std::size_t blk = 0; blk < nb_; ++blk) {
      Mat m = Mat::Zero(sizes_[blk], sizes_[blk]);
      for (const auto& vb : by_block_[blk]) {
        const Real yk = y(static_cast<Eigen::Index>(vb.var));
        if (yk == 0) continue;
        for (const auto& cf : vb.coefs) {
          m(cf.row, cf.col) += yk * cf.value;
          if (cf.row != cf.col) m(cf.col, cf.row) += yk * cf.value;
        }
      }
      out.push_back(std::move(m));
    }
    return out;
  }

  std::vector<Mat> residual_dual(const std::vector<Mat>& x,
                                 const std::vector<Mat>& s, const Vec& y) const {
    (void)x;
    std::vector<Mat> aty = apply_at(y);
    for (std::size_t blk = 0; blk < nb_; ++blk) {
      aty[blk] = c_[blk] - s[blk] - aty[blk];
    }
    return aty;
  }

  std::vector<Mat> dual_step(const std::vector<Mat>& rd, const Vec& dy) const {
    std::vector<Mat> ds = apply_at(dy);
    for (std::size_t blk = 0; blk < nb_; ++blk) ds[blk] = rd[blk] - ds[blk];
    return ds;
  }

  // dX = sym(G) - sym(X dS S^{-1}).
  std::vector<Mat> primal_step(const std::vector<Mat>& g,
                               const std::vector<Mat>& x,
                               const std::vector<Mat>& ds,
                               const std::vector<Mat>& s_inv) const {
    std::vector<Mat> dx(nb_);
    for (std::size_t blk = 0; blk < nb_; ++blk) {
      Mat t = g[blk] - x[blk] * ds[blk] * s_inv[blk];
      dx[blk] = (t + t.transpose()) / 2;
    }
    return dx;
  }

  // M_ij = tr(A_i X A_j S^{-1}).
  Mat schur_complement(const std::vector<Mat>& x,
                       const std::vector<Mat>& s_inv) const {
    const auto m = static_cast<Eigen::Index>(m_);
    Mat out = Mat::Zero(m, m);
    for (std::size_t blk = 0; blk < nb_; ++blk) {
      const auto& vars = by_block_[blk];
      for (const auto& vj : vars) {
        const Mat w = x[blk] * vj.dense * s_inv[blk];
        const auto j = static_cast<Eigen::Index>(vj.var);
        for (const auto& vi : vars) {
          const auto i = static_cast<Eigen::Index>(vi.var);
          if (i > j) continue;
          Real t = 0;
          for (const auto& cf : vi.coefs) {
            t += cf.row == cf.col ? cf.value * w(cf.col, cf.row)
                                  : cf.value * (w(cf.col, cf.row) + w(cf.row, cf.col));
          }
          out(i, j) += t;
        }
      }
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = j + 1; i < m; ++i) out(i, j) = out(j, i);
    }
    return out;
  }

  // Largest alpha with U + alpha dU PSD (infinity if unconstrained).
  Real max_step(const std::vector<Mat>& u, const std::vector<Mat>& du) const {
    Real alpha = std::numeric_limits<Real>::infinity();
    for (std::size_t blk = 0; blk < nb_; ++blk) {
      Eigen::LLT<Mat> llt(u[blk]);
      if (llt.info() != Eigen::Success) return 0;
      Mat t = llt.matrixL().solve(du[blk]);
      Mat w = llt.matrixL().solve(t.transpose());
      w = (w + w.transpose()).eval() / 2;
      Eigen::SelfAdjointEigenSolver<Mat> es(w, Eigen::EigenvaluesOnly);
      const Real lmin = es.eigenvalues().minCoeff();
      if (lmin < 0) alpha = std::min(alpha, -1 / lmin);
    }
    return alpha;
  }

  void export_iterate(SdpSolution& sol, const std::vector<Mat>& x,
                      const std::vector<Mat>& s, const Vec& y) const {
    sol.x.clear();
    sol.s.clear();
    for (const auto& m : x) sol.x.push_back(m.template cast<double>());
    for (const auto& m : s) sol.s.push_back(m.template cast<double>());
    sol.y.resize(m_);
    for (std::size_t k = 0; k < m_; ++k) {
      sol.y[k] = static_cast<double>(y(static_cast<Eigen::Index>(k)));
    }
  }

  SdpSolution solve_without_variables() const {
    SdpSolution sol;
    double lmin = std::numeric_limits<double>::infinity();
    for (std::size_t blk = 0; blk < nb_; ++blk) {
      const Eigen::MatrixXd cb = c_[blk].template cast<double>();
      sol.s.push_back(cb);
      sol.x.push_back(Eigen::MatrixXd::Zero(cb.rows(), cb.cols()));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cb);
      if (es.eigenvalues().minCoeff() < lmin) {
        lmin = es.eigenvalues().minCoeff();
        if (lmin < -opts_.tol) {
          // Unit Farkas certificate along the most negative eigenvector.
          const Eigen::VectorXd v = es.eigenvectors().col(0);
          sol.x.back() = v * v.transpose();
        }
      }
    }
    if (lmin >= -opts_.tol) {
      sol.status = SdpStatus::optimal;
      sol.message = "no variables; C is PSD";
      for (auto& xb : sol.x) xb.setZero();
    } else {
      sol.status = SdpStatus::infeasible;
      sol.message = "no variables; C is not PSD";
      sol.primal_value = lmin;
    }
    return sol;
  }

  SdpSolution zero_solution() const {
    SdpSolution sol;
    sol.status = SdpStatus::optimal;
    sol.message = "zero data";
    sol.y.assign(m_, 0.0);
    for (auto n : sizes_) {
      sol.x.push_back(Eigen::MatrixXd::Zero(n, n));
      sol.s.push_back(Eigen::MatrixXd::Zero(n, n));
    }
    return sol;
  }

  const SdpProblem& p_;
  SolverOptions opts_;
  std::size_t m_;
  std::size_t nb_;
  std::vector<Eigen::Index> sizes_;
  Real n_total_;
  std::vector<Mat> c_;
  std::vector<std::vector<VarBlock>> by_block_;
  Vec b_;
  std::vector<Real> a_norm_;
  Real c_norm_;
  Real b_norm_;
};

}  // namespace detail

/// Primal-dual path-following interior-point method with the HKM direction
/// and a Mehrotra predictor-corrector step, started from scaled identities.
inline SdpSolution solve(const SdpProblem& p, const SolverOptions& opts = {}) {
  p.validate();
  switch (opts.precision) {
    case Precision::extended:
      return detail::IpmSolver<long double>(p, opts).run();
    case Precision::quad:
      return detail::IpmSolver<quad>(p, opts).run();
    case Precision::standard:
      break;
  }
  return detail::IpmSolver<double>(p, opts).run();
}

namespace detail {

using QuadMatrix = Eigen::Matrix<quad, Eigen::Dynamic, Eigen::Dynamic>;

inline QuadMatrix quad_block(const BlockMatrix& m, std::size_t blk, std::size_t n) {
  return m.dense_block(blk, n).cast<quad>();
}

inline quad quad_inner(const std::vector<QuadMatrix>& u, const std::vector<QuadMatrix>& v) {
  quad t = 0;
  for (std::size_t b = 0; b < u.size(); ++b) {
    if (u[b].size() == 0 || v[b].size() == 0) continue;
    t += (u[b].array() * v[b].array()).sum();
  }
  return t;
}

inline Eigen::MatrixXd round_symmetric(const QuadMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = r; c < m.cols(); ++c) {
      const double v = static_cast<double>((m(r, c) + m(c, r)) / 2);
      out(r, c) = v;
      out(c, r) = v;
    }
  }
  return out;
}

}  // namespace detail

/// Solves an equivalent, better scaled program and maps the result back.
///
/// Each block is replaced by T_b^T (.) T_b for the given invertible
/// `congruence` matrices (identity when empty), the coefficient matrices are
/// orthonormalized in the trace inner product, and C is shifted by its
/// projection on their span. The transformation and the back-map run in
/// binary128; the iteration itself uses `opts.precision`.
inline SdpSolution solve_preconditioned(const SdpProblem& p,
                                        const std::vector<Eigen::MatrixXd>& congruence,
                                        const SolverOptions& opts = {}) {
  using detail::QuadMatrix;
  p.validate();
  const std::size_t nb = p.num_blocks();
  const std::size_t m = p.num_vars();
  if (!congruence.empty() && congruence.size() != nb) {
    throw Error("congruence list does not match block count");
  }
  std::vector<QuadMatrix> tq(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const auto n = static_cast<Eigen::Index>(p.block_sizes[b]);
    if (congruence.empty()) {
      tq[b] = QuadMatrix::Identity(n, n);
    } else {
      if (congruence[b].rows() != n || congruence[b].cols() != n) {
        throw Error("congruence matrix " + std::to_string(b) + " has wrong size");
      }
      tq[b] = congruence[b].cast<quad>();
    }
  }
  auto transform = [&](const BlockMatrix& mat, bool only_touched) {
    std::vector<QuadMatrix> out(nb);
    std::vector<bool> touched(nb, !only_touched);
    if (only_touched) {
      for (const auto& e : mat.entries()) touched[e.block] = true;
    }
    for (std::size_t b = 0; b < nb; ++b) {
      if (!touched[b]) continue;
      out[b] = tq[b].transpose() * detail::quad_block(mat, b, p.block_sizes[b]) * tq[b];
    }
    return out;
  };
  std::vector<QuadMatrix> c = transform(p.c, false);
  std::vector<std::vector<QuadMatrix>> a(m);
  for (std::size_t k = 0; k < m; ++k) a[k] = transform(p.a[k], true);

  // Orthonormal basis B_j = sum_k Q_kj A_k of span{A_k}; y = Q (y' + y0).
  QuadMatrix gram(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const quad v = detail::quad_inner(a[i], a[j]);
      gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  QuadMatrix q;
  if (m > 0) {
    Eigen::LLT<QuadMatrix> llt(gram);
    if (llt.info() == Eigen::Success) {
      q = QuadMatrix(llt.matrixU())
              .triangularView<Eigen::Upper>()
              .solve(QuadMatrix::Identity(static_cast<Eigen::Index>(m),
                                          static_cast<Eigen::Index>(m)));
    } else {
      // Dependent coefficient matrices: keep the numerically nonzero range.
      Eigen::SelfAdjointEigenSolver<QuadMatrix> es(gram);
      const quad top = es.eigenvalues().cwiseAbs().maxCoeff();
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        if (es.eigenvalues()(i) > top * quad(1e-28)) keep.push_back(i);
      }
      q.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(keep.size()));
      for (std::size_t j = 0; j < keep.size(); ++j) {
        using std::sqrt;
        q.col(static_cast<Eigen::Index>(j)) =
            es.eigenvectors().col(keep[j]) / sqrt(es.eigenvalues()(keep[j]));
      }
    }
  }
  const std::size_t mm = static_cast<std::size_t>(q.cols());
  std::vector<std::vector<QuadMatrix>> basis(mm, std::vector<QuadMatrix>(nb));
  for (std::size_t j = 0; j < mm; ++j) {
    for (std::size_t b = 0; b < nb; ++b) {
      const auto n = static_cast<Eigen::Index>(p.block_sizes[b]);
      QuadMatrix acc = QuadMatrix::Zero(n, n);
      bool any = false;
      for (std::size_t k = 0; k < m; ++k) {
        const quad w = q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
        if (a[k][b].size() == 0 || w == 0) continue;
        acc += w * a[k][b];
        any = true;
      }
      if (any) basis[j][b] = std::move(acc);
    }
  }
  std::vector<quad> y0(mm);
  for (std::size_t j = 0; j < mm; ++j) {
    y0[j] = detail::quad_inner(c, basis[j]);
    for (std::size_t b = 0; b < nb; ++b) {
      if (basis[j][b].size() > 0) c[b] -= y0[j] * basis[j][b];
    }
  }

  SdpProblem t;
  t.block_sizes = p.block_sizes;
  std::vector<Eigen::MatrixXd> dense(nb);
  for (std::size_t b = 0; b < nb; ++b) dense[b] = detail::round_symmetric(c[b]);
  t.c = BlockMatrix::from_dense(dense);
  t.a.resize(mm);
  t.b.resize(mm);
  std::vector<quad> bq(mm);
  for (std::size_t j = 0; j < mm; ++j) {
    for (std::size_t b = 0; b < nb; ++b) {
      const auto n = static_cast<Eigen::Index>(p.block_sizes[b]);
      dense[b] = basis[j][b].size() > 0 ? detail::round_symmetric(basis[j][b])
                                        : Eigen::MatrixXd::Zero(n, n);
    }
    t.a[j] = BlockMatrix::from_dense(dense);
    quad bj = 0;
    for (std::size_t k = 0; k < m; ++k) {
      bj += q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) * quad(p.b[k]);
    }
    bq[j] = bj;
    t.b[j] = static_cast<double>(bj);
  }

  SdpSolution inner = solve(t, opts);
  SdpSolution out;
  out.status = inner.status;
  out.message = inner.message;
  out.iterations = inner.iterations;
  out.log = std::move(inner.log);
  if (inner.y.size() != mm) return out;

  std::vector<quad> yq(m, quad(0));
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t j = 0; j < mm; ++j) {
      yq[k] += q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) *
               (quad(inner.y[j]) + y0[j]);
    }
  }
  out.y.resize(m);
  for (std::size_t k = 0; k < m; ++k) out.y[k] = static_cast<double>(yq[k]);

  // S from the original data at the mapped y; X = T X' T^T. Values follow
  // from b.y = b'.(y' + y0) and <C, X> = <C'', X'> + b'.y0 (exact for
  // feasible X'); residuals are those of the transformed program, since the
  // back-mapped X can be too ill-conditioned to re-measure in double.
  for (std::size_t b = 0; b < nb; ++b) {
    const auto n = static_cast<Eigen::Index>(p.block_sizes[b]);
    QuadMatrix sb = detail::quad_block(p.c, b, p.block_sizes[b]);
    for (std::size_t k = 0; k < m; ++k) {
      if (yq[k] == 0) continue;
      sb -= yq[k] * detail::quad_block(p.a[k], b, p.block_sizes[b]);
    }
    const QuadMatrix xb = inner.x.empty()
                              ? QuadMatrix::Zero(n, n)
                              : QuadMatrix(tq[b] * inner.x[b].cast<quad>() * tq[b].transpose());
    out.s.push_back(detail::round_symmetric(sb));
    out.x.push_back(detail::round_symmetric(xb));
  }
  quad shift = 0, dobj = 0;
  for (std::size_t j = 0; j < mm; ++j) {
    shift += bq[j] * y0[j];
    dobj += bq[j] * (quad(inner.y[j]) + y0[j]);
  }
  const quad pobj = quad(inner.primal_value) + shift;
  using std::abs;
  out.primal_value = static_cast<double>(pobj);
  out.dual_value = static_cast<double>(dobj);
  out.gap = static_cast<double>(abs(pobj - dobj) / (1 + abs(pobj)));
  out.primal_infeasibility = inner.primal_infeasibility;
  out.dual_infeasibility = inner.dual_infeasibility;
  return out;
}

struct ResidualViolation {
  std::string name;
  double value;
  double threshold;
};

/// Residuals recomputed from the problem data in long double, independent of
/// the solver's bookkeeping.
struct ResidualReport {
  double primal_value = 0.0;
  double dual_value = 0.0;
  double gap = 0.0;
  double primal_residual = 0.0;  // ||A(X) - b|| / (1 + ||b||)
  double slack_mismatch = 0.0;   // ||S - (C - sum y A)||_F / (1 + ||C||_F)
  double min_eig_s = 0.0;        // of C - sum y A
  double min_eig_x = 0.0;
  double complementarity = 0.0;  // <X, S> / (1 + |primal|)
  std::vector<ResidualViolation> violations;
  bool ok() const { return violations.empty(); }
};

inline ResidualReport residual_report(const SdpProblem& p, const SdpSolution& sol,
                                      double threshold = 1e-7) {
  using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  ResidualReport rep;
  const std::size_t nb = p.num_blocks();
  const std::size_t m = p.num_vars();
  auto shape_ok = sol.y.size() == m && sol.x.size() == nb && sol.s.size() == nb;
  for (std::size_t b = 0; shape_ok && b < nb; ++b) {
    const auto n = static_cast<Eigen::Index>(p.block_sizes[b]);
    shape_ok = sol.x[b].rows() == n && sol.x[b].cols() == n && sol.s[b].rows() == n &&
               sol.s[b].cols() == n;
  }
  if (!shape_ok) {
    rep.violations.push_back({"shape", 1.0, 0.0});
    return rep;
  }
  long double pobj = 0, dobj = 0, cn = 0, bn = 0, rn = 0, mism = 0, xs = 0;
  std::vector<long double> ax(m, 0.0L);
  rep.min_eig_s = std::numeric_limits<double>::infinity();
  rep.min_eig_x = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t n = p.block_sizes[b];
    const LMat cb = p.c.dense_block(b, n).cast<long double>();
    LMat sb = cb;
    const LMat xb = sol.x[b].cast<long double>();
    for (std::size_t k = 0; k < m; ++k) {
      const LMat ab = p.a[k].dense_block(b, n).cast<long double>();
      sb -= static_cast<long double>(sol.y[k]) * ab;
      ax[k] += (ab.array() * xb.array()).sum();
    }
    pobj += (cb.array() * xb.array()).sum();
    cn += cb.squaredNorm();
    mism += (sol.s[b].cast<long double>() - sb).squaredNorm();
    xs += (xb.array() * sb.array()).sum();
    const Eigen::MatrixXd sd = sb.cast<double>();
    const Eigen::MatrixXd xd = sol.x[b];
    rep.min_eig_s = std::min(rep.min_eig_s,
                             Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                                 (sd + sd.transpose()) / 2, Eigen::EigenvaluesOnly)
                                 .eigenvalues()
                                 .minCoeff());
    rep.min_eig_x = std::min(rep.min_eig_x,
                             Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                                 (xd + xd.transpose()) / 2, Eigen::EigenvaluesOnly)
                                 .eigenvalues()
                                 .minCoeff());
  }
  if (nb == 0) rep.min_eig_s = rep.min_eig_x = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const long double bk = p.b[k];
    dobj += bk * static_cast<long double>(sol.y[k]);
    rn += (ax[k] - bk) * (ax[k] - bk);
    bn += bk * bk;
  }
  rep.primal_value = static_cast<double>(pobj);
  rep.dual_value = static_cast<double>(dobj);
  rep.gap = static_cast<double>(std::abs(pobj - dobj) / (1 + std::abs(pobj)));
  rep.primal_residual = static_cast<double>(std::sqrt(rn) / (1 + std::sqrt(bn)));
  rep.slack_mismatch = static_cast<double>(std::sqrt(mism) / (1 + std::sqrt(cn)));
  rep.complementarity = static_cast<double>(xs / (1 + std::abs(pobj)));
  auto check = [&](const char* name, double v) {
    if (!(v <= threshold)) rep.violations.push_back({name, v, threshold});
  };
  check("gap", rep.gap);
  check("primal_residual", rep.primal_residual);
  check("slack_mismatch", rep.slack_mismatch);
  check("slack_psd", -rep.min_eig_s);
  check("x_psd", -rep.min_eig_x);
  check("complementarity", std::abs(rep.complementarity));
  return rep;
}

}  // namespace momsos
