#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace momsos::detail {

/// A row that lies in the span of earlier rows but whose right-hand side
/// disagrees with the combination implied by them.
struct InconsistentRow {
  std::size_t row;
  double implied_rhs;
  double actual_rhs;
};

/// Reduced row echelon form of [E | a], built row by row so that each row is
/// tested against the span of the rows before it.
struct RowReduction {
  Eigen::MatrixXd reduced;  // rank x cols, identity on pivot columns
  Eigen::VectorXd rhs;      // rank
  std::vector<std::size_t> pivot_cols;
  std::vector<std::size_t> free_cols;
  std::vector<std::size_t> independent_rows;
  std::vector<std::size_t> redundant_rows;
  std::vector<InconsistentRow> inconsistent_rows;

  std::size_t rank() const { return pivot_cols.size(); }
  bool consistent() const { return inconsistent_rows.empty(); }
};

/// `dep_tol` is relative to the row's infinity norm; `rhs_tol` scales with
/// 1 + |a_row|.
inline RowReduction reduce_rows(const Eigen::MatrixXd& e,
                                const Eigen::VectorXd& a,
                                double dep_tol = 1e-10,
                                double rhs_tol = 1e-9) {
  const auto rows = static_cast<std::size_t>(e.rows());
  const auto cols = static_cast<std::size_t>(e.cols());
  RowReduction out;
  std::vector<Eigen::VectorXd> basis_rows;
  std::vector<double> basis_rhs;
  std::vector<bool> is_pivot(cols, false);

  for (std::size_t r = 0; r < rows; ++r) {
    Eigen::VectorXd row = e.row(static_cast<Eigen::Index>(r)).transpose();
    double rhs = a(static_cast<Eigen::Index>(r));
    const double scale = row.lpNorm<Eigen::Infinity>();
    for (std::size_t k = 0; k < basis_rows.size(); ++k) {
      const double f = row(static_cast<Eigen::Index>(out.pivot_cols[k]));
      if (f != 0.0) {
        row -= f * basis_rows[k];
        rhs -= f * basis_rhs[k];
      }
    }
    Eigen::Index piv = 0;
    const double mag = cols == 0 ? 0.0 : row.cwiseAbs().maxCoeff(&piv);
    if (mag <= dep_tol * std::max(1.0, scale)) {
      // rhs now holds a_row minus the implied combination of earlier rows.
      const double actual = a(static_cast<Eigen::Index>(r));
      if (std::abs(rhs) <= rhs_tol * (1.0 + std::abs(actual))) {
        out.redundant_rows.push_back(r);
      } else {
        out.inconsistent_rows.push_back({r, actual - rhs, actual});
      }
      continue;
    }
    const double p = row(piv);
    row /= p;
    rhs /= p;
    row(piv) = 1.0;
    for (std::size_t k = 0; k < basis_rows.size(); ++k) {
      const double f = basis_rows[k](piv);
      if (f != 0.0) {
        basis_rows[k] -= f * row;
        basis_rhs[k] -= f * rhs;
        basis_rows[k](piv) = 0.0;
      }
    }
    basis_rows.push_back(row);
    basis_rhs.push_back(rhs);
    out.pivot_cols.push_back(static_cast<std::size_t>(piv));
    out.independent_rows.push_back(r);
    is_pivot[static_cast<std::size_t>(piv)] = true;
  }

  out.reduced.resize(static_cast<Eigen::Index>(basis_rows.size()),
                     static_cast<Eigen::Index>(cols));
  out.rhs.resize(static_cast<Eigen::Index>(basis_rows.size()));
  for (std::size_t k = 0; k < basis_rows.size(); ++k) {
    out.reduced.row(static_cast<Eigen::Index>(k)) = basis_rows[k].transpose();
    out.rhs(static_cast<Eigen::Index>(k)) = basis_rhs[k];
  }
  for (std::size_t c = 0; c < cols; ++c) {
    if (!is_pivot[c]) out.free_cols.push_back(c);
  }
  return out;
}

}  // namespace momsos::detail
