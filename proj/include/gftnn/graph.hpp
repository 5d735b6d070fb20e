#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "gftnn/errors.hpp"
#include "gftnn/types.hpp"

namespace gftnn {

/// Undirected weighted graph G = (V, E, W) stored as dense N x N matrices.
///
/// The adjacency is binary and decides which edges exist; the weight matrix
/// carries the strength of each existing edge. Entries of the weight matrix
/// where no edge exists are ignored (and kept at zero).
template <typename Scalar>
class Graph {
 public:
  using MatrixType = Matrix<Scalar>;

  /// Unweighted graph: every edge of `adjacency` gets weight one.
  explicit Graph(const MatrixType& adjacency)
      : Graph(adjacency, adjacency) {}

  Graph(const MatrixType& adjacency, const MatrixType& weights)
      : adjacency_(adjacency), weights_(weights.cwiseProduct(adjacency)) {
    validate();
  }

  Index size() const { return adjacency_.rows(); }
  const MatrixType& adjacency() const { return adjacency_; }
  const MatrixType& weights() const { return weights_; }

  Index edge_count() const {
    return static_cast<Index>(adjacency_.sum() / Scalar(2));
  }

  bool has_edge(Index i, Index j) const { return adjacency_(i, j) != Scalar(0); }

  /// Per-node weighted degree, D_ii = sum_j (W . A)_ij.
  Vector<Scalar> degrees() const { return weights_.rowwise().sum(); }

 private:
  void validate() const {
    const Index n = adjacency_.rows();
    if (n < 1 || adjacency_.cols() != n || weights_.rows() != n || weights_.cols() != n) {
      throw InvalidSizeError("graph matrices must be square, non-empty and of equal size");
    }
    for (Index i = 0; i < n; ++i) {
      if (adjacency_(i, i) != Scalar(0)) {
        throw ContractViolation("graph has a self-loop at node " + std::to_string(i));
      }
      for (Index j = 0; j < n; ++j) {
        const Scalar a = adjacency_(i, j);
        if (a != Scalar(0) && a != Scalar(1)) {
          throw ContractViolation("adjacency must be binary");
        }
        if (a != adjacency_(j, i) || weights_(i, j) != weights_(j, i)) {
          throw ContractViolation("graph must be symmetric");
        }
        if (a == Scalar(1) && !(weights_(i, j) > Scalar(0) && std::isfinite(weights_(i, j)))) {
          throw ContractViolation("edge weights must be finite and positive");
        }
      }
    }
  }

  MatrixType adjacency_;
  MatrixType weights_;
};

/// Path graph 0 - 1 - ... - (n-1); models each time step linked to its
/// predecessor and successor.
template <typename Scalar = double>
Graph<Scalar> build_line_graph(Index n) {
  if (n < 2) throw InvalidSizeError("line graph needs at least 2 nodes");
  Matrix<Scalar> a = Matrix<Scalar>::Zero(n, n);
  for (Index i = 0; i + 1 < n; ++i) {
    a(i, i + 1) = Scalar(1);
    a(i + 1, i) = Scalar(1);
  }
  return Graph<Scalar>(a);
}

/// Star graph: every node connects to `hub` only.
template <typename Scalar = double>
Graph<Scalar> build_spider_graph(Index n_vehicles, Index hub = 0) {
  if (n_vehicles < 2) throw InvalidSizeError("spider graph needs at least 2 nodes");
  if (hub < 0 || hub >= n_vehicles) {
    throw IndexError("hub index " + std::to_string(hub) + " out of range [0, " +
                     std::to_string(n_vehicles) + ")");
  }
  Matrix<Scalar> a = Matrix<Scalar>::Zero(n_vehicles, n_vehicles);
  a.row(hub).setOnes();
  a.col(hub).setOnes();
  a(hub, hub) = Scalar(0);
  return Graph<Scalar>(a);
}

/// Complete graph K_n.
template <typename Scalar = double>
Graph<Scalar> build_mesh_graph(Index n_vehicles) {
  if (n_vehicles < 2) throw InvalidSizeError("mesh graph needs at least 2 nodes");
  Matrix<Scalar> a = Matrix<Scalar>::Ones(n_vehicles, n_vehicles);
  a.diagonal().setZero();
  return Graph<Scalar>(a);
}

/// Arbitrary (e.g. k-NN or epsilon-neighbourhood) spatial graph.
template <typename Scalar = double>
Graph<Scalar> build_graph_from_adjacency(const Matrix<Scalar>& adjacency) {
  return Graph<Scalar>(adjacency);
}

inline constexpr double kInverseDistanceFloor = 0.1;  // m

/// Reweights the hub edges of a spider graph with 1 / max(d, d_floor), d being
/// the Euclidean distance between hub and neighbour. `positions` is N x 2 (m).
template <typename Scalar>
Graph<Scalar> apply_inverse_distance_weights(const Graph<Scalar>& g,
                                             const Matrix<Scalar>& positions,
                                             Index hub = 0,
                                             Scalar d_floor = Scalar(kInverseDistanceFloor)) {
  const Index n = g.size();
  if (positions.rows() != n || positions.cols() != 2) {
    throw DimensionError("positions must be N x 2");
  }
  if (hub < 0 || hub >= n) throw IndexError("hub index out of range");
  if (!positions.allFinite()) throw DataError("non-finite vehicle position");
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (g.has_edge(i, j) && i != hub && j != hub) {
        throw ContractViolation("inverse distance weighting expects a spider graph");
      }
    }
  }
  Matrix<Scalar> w = g.weights();
  for (Index j = 0; j < n; ++j) {
    if (j == hub || !g.has_edge(hub, j)) continue;
    const Scalar d = (positions.row(j) - positions.row(hub)).norm();
    w(hub, j) = w(j, hub) = Scalar(1) / std::max(d, d_floor);
  }
  return Graph<Scalar>(g.adjacency(), w);
}

/// L = D - W . A
template <typename Scalar>
Matrix<Scalar> laplacian(const Graph<Scalar>& g) {
  Matrix<Scalar> l = -g.weights();
  l.diagonal() = g.degrees();
  return l;
}

/// Explicit Cartesian product G1 [] G2. Node (i1, i2) maps to i1 * N2 + i2.
/// Only needed to cross-check the factorised eigenbasis.
template <typename Scalar>
Graph<Scalar> cartesian_product(const Graph<Scalar>& g1, const Graph<Scalar>& g2) {
  const Index n1 = g1.size();
  const Index n2 = g2.size();
  const Matrix<Scalar> eye1 = Matrix<Scalar>::Identity(n1, n1);
  const Matrix<Scalar> eye2 = Matrix<Scalar>::Identity(n2, n2);
  Matrix<Scalar> a(n1 * n2, n1 * n2);
  Matrix<Scalar> w(n1 * n2, n1 * n2);
  for (Index i1 = 0; i1 < n1; ++i1) {
    for (Index j1 = 0; j1 < n1; ++j1) {
      a.block(i1 * n2, j1 * n2, n2, n2) =
          g1.adjacency()(i1, j1) * eye2 + eye1(i1, j1) * g2.adjacency();
      w.block(i1 * n2, j1 * n2, n2, n2) =
          g1.weights()(i1, j1) * eye2 + eye1(i1, j1) * g2.weights();
    }
  }
  return Graph<Scalar>(a, w);
}

}  // namespace gftnn
