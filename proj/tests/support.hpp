#pragma once

// Shared fixtures: random SDPs with a known optimum, and the bundled data.

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "momsos/sdp.hpp"

namespace momsos::fixtures {

struct PlantedSdp {
  SdpProblem problem;
  std::vector<double> y;  // an optimal dual point
  double value = 0.0;     // b.y = <C, X>
};

inline Eigen::MatrixXd random_symmetric(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = g(rng);
  return (m + m.transpose()) / 2;
}

inline Eigen::MatrixXd random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ();
}

/// Builds a strictly complementary pair X, S in a shared eigenbasis, random
/// A_k, a random y, and then C = S + sum y_k A_k and b = A(X). Weak duality
/// makes <C, X> = b.y the optimal value.
inline PlantedSdp planted_sdp(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nblocks(1, 3), bsize(1, 5), nvars(1, 6);
  std::uniform_real_distribution<double> pos(0.5, 2.0), coef(-1.0, 1.0);
  PlantedSdp out;
  SdpProblem& p = out.problem;
  const int nb = nblocks(rng);
  std::vector<Eigen::MatrixXd> xs, ss;
  for (int b = 0; b < nb; ++b) {
    const int n = bsize(rng);
    p.block_sizes.push_back(static_cast<std::size_t>(n));
    const Eigen::MatrixXd q = random_orthogonal(n, rng);
    std::uniform_int_distribution<int> split(0, n);
    const int r = split(rng);
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(n), ds = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) (i < r ? dx(i) : ds(i)) = pos(rng);
    xs.push_back(q * dx.asDiagonal() * q.transpose());
    ss.push_back(q * ds.asDiagonal() * q.transpose());
  }
  const int m = nvars(rng);
  std::vector<Eigen::MatrixXd> c = ss;
  for (int k = 0; k < m; ++k) {
    std::vector<Eigen::MatrixXd> ak;
    const double yk = coef(rng);
    double bk = 0.0;
    for (int b = 0; b < nb; ++b) {
      ak.push_back(random_symmetric(static_cast<Eigen::Index>(p.block_sizes[b]), rng));
      c[b] += yk * ak.back();
      bk += (ak.back().cwiseProduct(xs[b])).sum();
    }
    p.a.push_back(BlockMatrix::from_dense(ak));
    p.b.push_back(bk);
    out.y.push_back(yk);
  }
  p.c = BlockMatrix::from_dense(c, 1e-12);
  for (int b = 0; b < nb; ++b) out.value += (c[b].cwiseProduct(xs[b])).sum();
  return out;
}

}  // namespace momsos::fixtures
