#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gftnn/model.hpp"
#include "gftnn/scenario.hpp"

namespace gftnn {

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 30;
  Index batch_size = 64;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct AdamState {
  VectorXd first_moment;
  VectorXd second_moment;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(Index n)
      : first_moment(VectorXd::Zero(n)), second_moment(VectorXd::Zero(n)) {}
};

/// MSE(x, x_hat) + MSE(y, y_hat) over steps 1..T_pred, m^2.
double trajectory_loss(const Trajectory& prediction, const Trajectory& truth);

struct LossGradient {
  double loss = 0;
  VectorXd gradient;  // laid out like ModelParams::values()
};

/// Loss and its analytic gradient w.r.t. every parameter for one precomputed
/// spectral input. Backpropagation stops at the spectrum.
LossGradient loss_gradient(const VectorXd& spectrum, const Trajectory& truth, double v0,
                           const ModelParams& params, const ModelConfig& config);

LossGradient gradients(const Scenario& scenario, const ModelParams& params,
                       const ModelConfig& config, const ProductBasis<double>& basis);

/// Bias-corrected Adam update in place.
void adam_step(ModelParams& params, const VectorXd& gradient, AdamState& state,
               const TrainConfig& config);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double test_loss = 0;  // NaN when the test set is empty
  double ade = 0;        // on the test set
  double fde = 0;
};

/// Spectral input of a scenario, computed once since the GFT is fixed.
struct PreparedScenario {
  VectorXd spectrum;
  Trajectory truth;
  double v0 = 0;
};

std::vector<PreparedScenario> prepare(const std::vector<Scenario>& scenarios,
                                      const ProductBasis<double>& basis, const ModelConfig& config);

struct TrainState {
  ModelParams params;
  AdamState adam;
  int epochs_completed = 0;
};

struct TrainResult {
  TrainState state;
  std::vector<EpochLog> log;
};

/// Mini-batch Adam over the train split. Starts from `resume` when given,
/// otherwise from `init_params(config, tcfg.seed)`; epoch numbering continues.
TrainResult train(const DatasetSplit& split, const ModelConfig& config, const TrainConfig& tcfg,
                  const ProductBasis<double>& basis, std::optional<TrainState> resume = std::nullopt,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Same loop on prepared inputs; `stop` may end training early after an epoch.
TrainResult train_prepared(const std::vector<PreparedScenario>& train_set,
                           const std::vector<PreparedScenario>& test_set, const ModelConfig& config,
                           const TrainConfig& tcfg, std::optional<TrainState> resume = std::nullopt,
                           const std::function<bool(const EpochLog&)>& on_epoch = {});

}  // namespace gftnn
