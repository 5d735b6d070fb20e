#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "gftnn/graph.hpp"
#include "gftnn/spectral.hpp"

namespace gftnn::testing {

inline MatrixXd random_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

// Connected random graph: a random spanning path plus extra random edges.
inline Graph<double> random_graph(std::mt19937_64& rng, Index n, bool weighted) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  MatrixXd a = MatrixXd::Zero(n, n);
  for (std::size_t i = 1; i < perm.size(); ++i) a(perm[i - 1], perm[i]) = a(perm[i], perm[i - 1]) = 1;
  std::bernoulli_distribution extra(0.3);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (extra(rng)) a(i, j) = a(j, i) = 1;
  MatrixXd w = MatrixXd::Ones(n, n);
  if (weighted) {
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) w(i, j) = w(j, i) = u(rng);
  }
  return Graph<double>(a, w);
}

// Reference spectrum from Eigen's tridiagonal QR solver.
inline VectorXd oracle_eigenvalues(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

inline VectorXd sorted(VectorXd v) {
  std::sort(v.data(), v.data() + v.size());
  return v;
}

inline ProductBasis<double> line_spider_basis(Index t, Index n) {
  return {eigendecompose(laplacian(build_line_graph(t))), eigendecompose(laplacian(build_spider_graph(n)))};
}

}  // namespace gftnn::testing
