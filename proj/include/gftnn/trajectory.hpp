#pragma once

#include "gftnn/types.hpp"

namespace gftnn {

/// Target vehicle path over the prediction horizon, steps 0..T_pred, in
/// metres relative to the position at the last observed step (x, y) = (0, 0).
struct Trajectory {
  VectorXd x;
  VectorXd y;

  Trajectory() = default;
  explicit Trajectory(Index pred_steps)
      : x(VectorXd::Zero(pred_steps + 1)), y(VectorXd::Zero(pred_steps + 1)) {}
  Trajectory(VectorXd x_, VectorXd y_) : x(std::move(x_)), y(std::move(y_)) {}

  Index pred_steps() const { return x.size() - 1; }
};

}  // namespace gftnn
