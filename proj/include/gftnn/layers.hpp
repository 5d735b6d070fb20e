#pragma once

// Scalar-generic building blocks of the encoder and the descriptive decoder,
// with the derivatives the trainer needs.

#include <cmath>
#include <numbers>

#include "gftnn/errors.hpp"
#include "gftnn/types.hpp"

namespace gftnn {

inline constexpr double kLayerNormEpsilon = 1e-5;

/// h_s = s . w_s
template <typename DerivedA, typename DerivedB>
auto spectral_gate(const Eigen::MatrixBase<DerivedA>& s, const Eigen::MatrixBase<DerivedB>& w) {
  if (s.size() != w.size()) {
    throw DimensionError("spectral gate length " + std::to_string(w.size()) +
                         " does not match spectrum length " + std::to_string(s.size()));
  }
  return s.cwiseProduct(w);
}

template <typename Scalar>
struct LayerNormResult {
  Vector<Scalar> normalized;
  Scalar inv_std;
};

/// (v - mean) / sqrt(var + eps) with the population variance; no affine terms.
template <typename Derived>
LayerNormResult<typename Derived::Scalar> layer_norm(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() < 2) throw ContractViolation("layer norm needs at least 2 elements");
  const Scalar mean = v.mean();
  const Vector<Scalar> centred = v.array() - mean;
  const Scalar var = centred.squaredNorm() / Scalar(v.size());
  const Scalar inv_std = Scalar(1) / std::sqrt(var + Scalar(kLayerNormEpsilon));
  return {centred * inv_std, inv_std};
}

/// Vector-Jacobian product of layer_norm given its output and 1/std.
template <typename Scalar>
Vector<Scalar> layer_norm_backward(const Vector<Scalar>& normalized, Scalar inv_std,
                                   const Vector<Scalar>& grad_out) {
  const Scalar n = Scalar(normalized.size());
  const Scalar mean_grad = grad_out.sum() / n;
  const Scalar mean_proj = grad_out.dot(normalized) / n;
  return inv_std * (grad_out.array() - mean_grad - normalized.array() * mean_proj).matrix();
}

/// Exact GELU, x * Phi(x).
template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / Scalar(std::numbers::sqrt2)));
}

/// d/dx GELU = Phi(x) + x * phi(x).
template <typename Scalar>
Scalar gelu_derivative(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / Scalar(std::numbers::sqrt2)));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2) * Scalar(std::numbers::pi));
  return cdf + x * pdf;
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-x))
                        : std::exp(x) / (Scalar(1) + std::exp(x));
}

/// One feature-selective MLP block: W_l GELU(W_n LN(x) + b_n) + b_l.
template <typename Scalar>
Vector<Scalar> mlp_block(const Vector<Scalar>& x, const Eigen::Ref<const Matrix<Scalar>>& w_n,
                         const Eigen::Ref<const Vector<Scalar>>& b_n,
                         const Eigen::Ref<const Matrix<Scalar>>& w_l,
                         const Eigen::Ref<const Vector<Scalar>>& b_l) {
  if (w_n.cols() != x.size() || w_n.rows() != b_n.size() || w_l.cols() != w_n.rows() ||
      w_l.rows() != b_l.size()) {
    throw DimensionError("MLP block parameter shapes do not match its input");
  }
  const Vector<Scalar> pre = w_n * layer_norm(x).normalized + b_n;
  return w_l * pre.unaryExpr([](Scalar z) { return gelu(z); }) + b_l;
}

/// Sample times t_i = i / fps of the prediction horizon, seconds.
template <typename Scalar>
Vector<Scalar> horizon_times(Index pred_steps, Scalar fps) {
  return Vector<Scalar>::LinSpaced(pred_steps + 1, Scalar(0), Scalar(pred_steps)) / fps;
}

/// Closed-form decoder. `latent` = (longitudinal acceleration, lateral
/// amplitude, logistic rate); returns x and y as the two columns.
///   x(t) = v0 t + 0.5 h1 t^2
///   y(t) = h2 / (1 + exp(h3 tau)) - h2 / (1 + exp(h3 tau0)),  tau = t - T/2
template <typename Scalar>
Matrix<Scalar> decode_path(const Eigen::Matrix<Scalar, 3, 1>& latent, Scalar v0, Index pred_steps,
                           Scalar fps) {
  if (!(fps > Scalar(0))) throw ContractViolation("decoder fps must be positive");
  const Vector<Scalar> t = horizon_times(pred_steps, fps);
  const Scalar half_horizon = Scalar(0.5) * Scalar(pred_steps) / fps;
  const Scalar anchor = latent(1) * sigmoid(latent(2) * half_horizon);
  Matrix<Scalar> out(pred_steps + 1, 2);
  for (Index i = 0; i <= pred_steps; ++i) {
    out(i, 0) = v0 * t(i) + Scalar(0.5) * latent(0) * t(i) * t(i);
    out(i, 1) = latent(1) * sigmoid(-latent(2) * (t(i) - half_horizon)) - anchor;
  }
  out.row(0).setZero();
  return out;
}

/// Partial derivatives of the decoder w.r.t. the latent state.
/// Columns: dx/dh1, dy/dh2, dy/dh3 (dx/dh2 = dx/dh3 = dy/dh1 = 0).
template <typename Scalar>
Matrix<Scalar> decode_jacobian(const Eigen::Matrix<Scalar, 3, 1>& latent, Index pred_steps, Scalar fps) {
  const Vector<Scalar> t = horizon_times(pred_steps, fps);
  const Scalar half_horizon = Scalar(0.5) * Scalar(pred_steps) / fps;
  // g(tau) = 1 / (1 + exp(h3 tau)),  dg/dh3 = -tau g (1 - g)
  auto g = [&](Scalar tau) { return sigmoid(-latent(2) * tau); };
  auto dg = [&](Scalar tau) {
    const Scalar v = g(tau);
    return -tau * v * (Scalar(1) - v);
  };
  const Scalar tau0 = -half_horizon;
  Matrix<Scalar> jac(pred_steps + 1, 3);
  for (Index i = 0; i <= pred_steps; ++i) {
    const Scalar tau = t(i) - half_horizon;
    jac(i, 0) = Scalar(0.5) * t(i) * t(i);
    jac(i, 1) = g(tau) - g(tau0);
    jac(i, 2) = latent(1) * (dg(tau) - dg(tau0));
  }
  jac.row(0).setZero();
  return jac;
}

}  // namespace gftnn
