#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Jacobi>

#include "gftnn/errors.hpp"
#include "gftnn/types.hpp"

namespace gftnn {

/// Eigenpairs of a real symmetric matrix. Eigenvalues ascend; column i of
/// `eigenvectors` belongs to eigenvalue i and the columns are orthonormal.
template <typename Scalar>
struct Spectrum {
  Vector<Scalar> eigenvalues;
  Matrix<Scalar> eigenvectors;

  Index size() const { return eigenvalues.size(); }
};

struct JacobiOptions {
  double off_diagonal_tolerance = 1e-12;
  int max_sweeps = 100;
  double symmetry_tolerance = 1e-9;
  double tie_tolerance = 1e-8;
};

namespace detail {

// Orthonormal basis of span(vectors) that depends only on the subspace, not on
// the particular vectors: pivoted Gram-Schmidt over the columns of the
// orthogonal projector onto the subspace.
template <typename Scalar>
Matrix<Scalar> canonical_subspace_basis(const Matrix<Scalar>& vectors) {
  const Index n = vectors.rows();
  const Index m = vectors.cols();
  const Matrix<Scalar> projector = vectors * vectors.transpose();
  Matrix<Scalar> basis(n, m);
  Matrix<Scalar> residual = projector;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (Index c = 0; c < m; ++c) {
    Index pivot = -1;
    Scalar best = Scalar(-1);
    for (Index j = 0; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const Scalar norm = residual.col(j).norm();
      if (norm > best + Scalar(1e-9)) {
        best = norm;
        pivot = j;
      }
    }
    used[static_cast<std::size_t>(pivot)] = true;
    Vector<Scalar> v = residual.col(pivot);
    for (int pass = 0; pass < 2; ++pass) {
      for (Index k = 0; k < c; ++k) v -= basis.col(k).dot(v) * basis.col(k);
    }
    basis.col(c) = v.normalized();
    const Vector<Scalar> b = basis.col(c);
    residual -= b * (b.transpose() * residual);
  }
  return basis;
}

// Largest-magnitude component positive; magnitude ties go to the lowest index.
template <typename Scalar>
void fix_sign(Eigen::Ref<Vector<Scalar>> v) {
  const Scalar peak = v.cwiseAbs().maxCoeff();
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) >= peak - Scalar(1e-12)) {
      if (v(i) < Scalar(0)) v = -v;
      return;
    }
  }
}

template <typename Scalar>
bool lexicographically_less(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  for (Index i = 0; i < a.size(); ++i) {
    if (std::abs(a(i) - b(i)) > Scalar(1e-12)) return a(i) < b(i);
  }
  return false;
}

}  // namespace detail

/// Cyclic Jacobi eigensolver for the symmetric matrices arising from graph
/// Laplacians. The result is canonical: ascending eigenvalues, sign-fixed
/// eigenvectors, and a subspace-determined, lexicographically ordered basis
/// inside every group of (numerically) repeated eigenvalues.
template <typename Derived>
Spectrum<typename Derived::Scalar> eigendecompose(const Eigen::MatrixBase<Derived>& input,
                                                  const JacobiOptions& options = {}) {
  using Scalar = typename Derived::Scalar;
  const Index n = input.rows();
  if (n < 1 || input.cols() != n) throw DimensionError("eigendecompose expects a square matrix");
  Matrix<Scalar> a = input;
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > Scalar(options.symmetry_tolerance)) {
    throw ContractViolation("eigendecompose expects a symmetric matrix");
  }
  a = Scalar(0.5) * (a + a.transpose()).eval();

  Matrix<Scalar> v = Matrix<Scalar>::Identity(n, n);
  const Scalar scale = std::max(Scalar(1), a.norm());
  auto off_norm = [&] {
    Scalar s = 0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  // Sweeps continue past the tolerance until rounding level or stagnation;
  // quadratic convergence makes this cost at most a sweep or two, and
  // eigenvectors of nearly degenerate pairs need it.
  const Scalar floor = std::numeric_limits<Scalar>::epsilon() * scale;
  Scalar off = off_norm();
  Scalar previous = std::numeric_limits<Scalar>::infinity();
  for (int sweep = 0; sweep < options.max_sweeps && off > floor && off < previous; ++sweep) {
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (a(p, q) == Scalar(0)) continue;
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(a, p, q);
        a.applyOnTheLeft(p, q, rot.adjoint());
        a.applyOnTheRight(p, q, rot);
        a(p, q) = a(q, p) = Scalar(0);
        v.applyOnTheRight(p, q, rot);
      }
    }
    previous = off;
    off = off_norm();
  }
  if (off > Scalar(options.off_diagonal_tolerance) * scale) {
    throw NumericError("Jacobi eigensolver did not converge in " +
                       std::to_string(options.max_sweeps) + " sweeps");
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return a(i, i) < a(j, j); });

  Spectrum<Scalar> out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    out.eigenvalues(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.eigenvectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }

  for (Index begin = 0; begin < n;) {
    Index end = begin + 1;
    while (end < n && out.eigenvalues(end) - out.eigenvalues(end - 1) < Scalar(options.tie_tolerance)) {
      ++end;
    }
    const Index m = end - begin;
    if (m > 1) {
      out.eigenvectors.middleCols(begin, m) =
          detail::canonical_subspace_basis<Scalar>(out.eigenvectors.middleCols(begin, m));
    }
    for (Index k = begin; k < end; ++k) detail::fix_sign<Scalar>(out.eigenvectors.col(k));
    if (m > 1) {
      std::vector<Vector<Scalar>> cols;
      for (Index k = begin; k < end; ++k) cols.emplace_back(out.eigenvectors.col(k));
      std::stable_sort(cols.begin(), cols.end(), detail::lexicographically_less<Scalar>);
      for (Index k = 0; k < m; ++k) out.eigenvectors.col(begin + k) = cols[static_cast<std::size_t>(k)];
    }
    begin = end;
  }
  return out;
}

/// Eigenbases of the temporal and spatial factor graphs. The product graph
/// basis is their Kronecker product and is never materialised.
template <typename Scalar>
struct ProductBasis {
  Spectrum<Scalar> temporal;
  Spectrum<Scalar> spatial;

  Index temporal_size() const { return temporal.size(); }
  Index spatial_size() const { return spatial.size(); }
};

/// K x N1 x N2 signal on a product graph, one N1 x N2 matrix per feature.
template <typename Scalar>
class FeatureTensor {
 public:
  FeatureTensor() = default;
  FeatureTensor(Index channels, Index rows, Index cols)
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(channels), Matrix<Scalar>::Zero(rows, cols)) {}
  explicit FeatureTensor(std::vector<Matrix<Scalar>> channels) : data_(std::move(channels)) {
    if (data_.empty()) throw DimensionError("feature tensor needs at least one channel");
    rows_ = data_.front().rows();
    cols_ = data_.front().cols();
    for (const auto& c : data_) {
      if (c.rows() != rows_ || c.cols() != cols_) throw DimensionError("ragged feature tensor");
    }
  }

  Index channels() const { return static_cast<Index>(data_.size()); }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  Matrix<Scalar>& channel(Index k) { return data_.at(static_cast<std::size_t>(k)); }
  const Matrix<Scalar>& channel(Index k) const { return data_.at(static_cast<std::size_t>(k)); }

  Scalar& operator()(Index k, Index i, Index j) { return channel(k)(i, j); }
  Scalar operator()(Index k, Index i, Index j) const { return channel(k)(i, j); }

  bool allFinite() const {
    return std::all_of(data_.begin(), data_.end(), [](const auto& c) { return c.allFinite(); });
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Matrix<Scalar>> data_;
};

/// Two-dimensional GFT of a single-channel signal: U_T^T F U_S.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Matrix<Scalar> gft_2d(const Eigen::MatrixBase<Derived>& signal, const ProductBasis<Scalar>& basis) {
  if (signal.rows() != basis.temporal_size() || signal.cols() != basis.spatial_size()) {
    throw DimensionError("signal shape " + std::to_string(signal.rows()) + "x" +
                         std::to_string(signal.cols()) + " does not match basis " +
                         std::to_string(basis.temporal_size()) + "x" +
                         std::to_string(basis.spatial_size()));
  }
  return basis.temporal.eigenvectors.transpose() * signal * basis.spatial.eigenvectors;
}

/// Channel-wise GFT of a K-feature signal.
template <typename Scalar>
FeatureTensor<Scalar> gft_extended(const FeatureTensor<Scalar>& signal,
                                   const ProductBasis<Scalar>& basis) {
  FeatureTensor<Scalar> out(signal.channels(), signal.rows(), signal.cols());
  for (Index k = 0; k < signal.channels(); ++k) out.channel(k) = gft_2d(signal.channel(k), basis);
  return out;
}

namespace detail {
inline void check_truncation(Index p, Index n_temporal) {
  if (p < 1 || p > n_temporal) {
    throw InvalidSizeError("spectral truncation p=" + std::to_string(p) + " outside [1, " +
                           std::to_string(n_temporal) + "]");
  }
}
}  // namespace detail

/// Inverse GFT keeping only the p lowest temporal frequencies (all spatial
/// ones). With p = N1 this is the exact inverse.
template <typename Scalar>
FeatureTensor<Scalar> inverse_gft(const FeatureTensor<Scalar>& coefficients,
                                  const ProductBasis<Scalar>& basis, Index p) {
  detail::check_truncation(p, basis.temporal_size());
  if (coefficients.rows() != basis.temporal_size() || coefficients.cols() != basis.spatial_size()) {
    throw DimensionError("coefficient tensor does not match basis");
  }
  FeatureTensor<Scalar> out(coefficients.channels(), coefficients.rows(), coefficients.cols());
  const auto u_t = basis.temporal.eigenvectors.leftCols(p);
  for (Index k = 0; k < coefficients.channels(); ++k) {
    out.channel(k) = u_t * coefficients.channel(k).topRows(p) * basis.spatial.eigenvectors.transpose();
  }
  return out;
}

/// Flattens the coefficients of the p lowest temporal frequencies in
/// (k, l1, l2) row-major order; length K * p * N2.
template <typename Scalar>
Vector<Scalar> truncate_spectrum(const FeatureTensor<Scalar>& coefficients, Index p) {
  detail::check_truncation(p, coefficients.rows());
  const Index n2 = coefficients.cols();
  Vector<Scalar> s(coefficients.channels() * p * n2);
  Index pos = 0;
  for (Index k = 0; k < coefficients.channels(); ++k)
    for (Index l1 = 0; l1 < p; ++l1)
      for (Index l2 = 0; l2 < n2; ++l2) s(pos++) = coefficients(k, l1, l2);
  return s;
}

}  // namespace gftnn
