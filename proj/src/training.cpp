#include "gftnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gftnn/metrics.hpp"

namespace gftnn {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and non-negative");
  }
  if (!(adam_beta1 > 0 && adam_beta1 < 1) || !(adam_beta2 > 0 && adam_beta2 < 1)) {
    throw ConfigError("Adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0)) throw ConfigError("Adam epsilon must be positive");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
}

double trajectory_loss(const Trajectory& prediction, const Trajectory& truth) {
  if (prediction.x.size() != truth.x.size() || prediction.y.size() != truth.y.size() ||
      prediction.x.size() < 2) {
    throw DimensionError("loss needs trajectories of equal length");
  }
  const Index n = prediction.pred_steps();
  return (prediction.x.tail(n) - truth.x.tail(n)).squaredNorm() / static_cast<double>(n) +
         (prediction.y.tail(n) - truth.y.tail(n)).squaredNorm() / static_cast<double>(n);
}

namespace {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* layer) {
  if (!v.allFinite()) throw NumericError(std::string("non-finite gradient at ") + layer);
}

}  // namespace

LossGradient loss_gradient(const VectorXd& spectrum, const Trajectory& truth, double v0,
                           const ModelParams& params, const ModelConfig& config) {
  if (truth.pred_steps() != config.t_pred) throw DimensionError("ground truth horizon mismatch");
  const ParamLayout& layout = params.layout();
  ForwardTrace trace;
  const LatentState latent = encode(spectrum, params, config, &trace);
  require_finite(latent, "latent state");
  const Trajectory pred = decode(latent, v0, config.t_pred, config.fps);

  LossGradient out;
  out.loss = trajectory_loss(pred, truth);
  out.gradient = VectorXd::Zero(params.size());
  ModelParams grad(layout);

  // Decoder.
  const double scale = 2.0 / static_cast<double>(config.t_pred);
  VectorXd dx = scale * (pred.x - truth.x);
  VectorXd dy = scale * (pred.y - truth.y);
  dx(0) = 0;
  dy(0) = 0;
  const MatrixXd jac = decode_jacobian<double>(latent, config.t_pred, config.fps);
  const Eigen::Vector3d d_latent(dx.dot(jac.col(0)), dy.dot(jac.col(1)), dy.dot(jac.col(2)));
  require_finite(d_latent, "decoder");

  // Head and sigmoid.
  grad.view(layout.head_weight()) = d_latent * trace.squashed.transpose();
  grad.view(layout.head_bias()).col(0) = d_latent;
  const VectorXd d_squashed = params.view(layout.head_weight()).transpose() * d_latent;
  const VectorXd d_concat =
      d_squashed.cwiseProduct(trace.squashed.cwiseProduct((1.0 - trace.squashed.array()).matrix()));
  require_finite(d_concat, "head");

  // Feature-selective MLP blocks.
  const Index zk = config.per_feature_length();
  VectorXd d_gated(config.spectrum_length());
  for (Index k = 0; k < config.features; ++k) {
    VectorXd d_out = d_concat.segment(k * config.out_width, config.out_width);
    for (Index b = config.n_blocks - 1; b >= 0; --b) {
      const auto& t = trace.blocks[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)];
      const auto& g_wn = layout.block(k, b, ParamLayout::kWn);
      const auto& g_wl = layout.block(k, b, ParamLayout::kWl);
      grad.view(g_wl) = d_out * t.activation.transpose();
      grad.view(layout.block(k, b, ParamLayout::kBl)).col(0) = d_out;
      const VectorXd d_act = params.view(g_wl).transpose() * d_out;
      const VectorXd d_pre =
          d_act.cwiseProduct(t.pre_activation.unaryExpr([](double z) { return gelu_derivative(z); }));
      grad.view(g_wn) = d_pre * t.normalized.transpose();
      grad.view(layout.block(k, b, ParamLayout::kBn)).col(0) = d_pre;
      const VectorXd d_norm = params.view(g_wn).transpose() * d_pre;
      d_out = layer_norm_backward<double>(t.normalized, t.inv_std, d_norm);
      require_finite(d_out, "MLP block");
    }
    d_gated.segment(k * zk, zk) = d_out;
  }

  // Spectral gate.
  grad.view(layout.gate()).col(0) = d_gated.cwiseProduct(trace.spectrum);
  require_finite(grad.values(), "spectral gate");
  out.gradient = std::move(grad.values());
  return out;
}

LossGradient gradients(const Scenario& scenario, const ModelParams& params,
                       const ModelConfig& config, const ProductBasis<double>& basis) {
  return loss_gradient(spectral_input(scenario, basis, config), scenario.future, scenario.v0,
                       params, config);
}

void adam_step(ModelParams& params, const VectorXd& gradient, AdamState& state,
               const TrainConfig& config) {
  if (gradient.size() != params.size()) throw DimensionError("gradient size mismatch");
  if (state.first_moment.size() != params.size()) state = AdamState(params.size());
  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  state.first_moment = b1 * state.first_moment + (1 - b1) * gradient;
  state.second_moment = b2 * state.second_moment + (1 - b2) * gradient.cwiseAbs2();
  const double c1 = 1 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1 - std::pow(b2, static_cast<double>(state.step));
  params.values().array() -= config.learning_rate * (state.first_moment.array() / c1) /
                             ((state.second_moment.array() / c2).sqrt() + config.adam_eps);
}

std::vector<PreparedScenario> prepare(const std::vector<Scenario>& scenarios,
                                      const ProductBasis<double>& basis, const ModelConfig& config) {
  std::vector<PreparedScenario> out;
  out.reserve(scenarios.size());
  for (const auto& s : scenarios) out.push_back({spectral_input(s, basis, config), s.future, s.v0});
  return out;
}

namespace {

struct SetScores {
  double loss = std::numeric_limits<double>::quiet_NaN();
  double ade = std::numeric_limits<double>::quiet_NaN();
  double fde = std::numeric_limits<double>::quiet_NaN();
};

SetScores score(const std::vector<PreparedScenario>& set, const ModelParams& params,
                const ModelConfig& config) {
  SetScores s;
  if (set.empty()) return s;
  std::vector<Trajectory> preds;
  std::vector<Trajectory> truths;
  double loss = 0;
  for (const auto& item : set) {
    preds.push_back(decode(encode(item.spectrum, params, config), item.v0, config.t_pred, config.fps));
    truths.push_back(item.truth);
    loss += trajectory_loss(preds.back(), item.truth);
  }
  s.loss = loss / static_cast<double>(set.size());
  s.ade = ade(preds, truths);
  s.fde = fde(preds, truths);
  return s;
}

}  // namespace

TrainResult train_prepared(const std::vector<PreparedScenario>& train_set,
                           const std::vector<PreparedScenario>& test_set, const ModelConfig& config,
                           const TrainConfig& tcfg, std::optional<TrainState> resume,
                           const std::function<bool(const EpochLog&)>& on_epoch) {
  tcfg.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  TrainResult result;
  if (resume) {
    result.state = std::move(*resume);
  } else {
    result.state.params = init_params(config, tcfg.seed);
  }
  if (result.state.adam.first_moment.size() != result.state.params.size()) {
    result.state.adam = AdamState(result.state.params.size());
  }

  std::vector<std::size_t> order(train_set.size());
  const int first_epoch = result.state.epochs_completed + 1;
  for (int epoch = first_epoch; epoch < first_epoch + tcfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(tcfg.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(tcfg.batch_size), ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(tcfg.batch_size));
      VectorXd grad = VectorXd::Zero(result.state.params.size());
      double batch_loss = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& item = train_set[order[i]];
        try {
          LossGradient lg = loss_gradient(item.spectrum, item.truth, item.v0, result.state.params, config);
          grad += lg.gradient;
          batch_loss += lg.loss;
        } catch (const NumericError& e) {
          throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index) + ": " + e.what());
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + ": non-finite loss");
      }
      grad /= static_cast<double>(end - begin);
      adam_step(result.state.params, grad, result.state.adam, tcfg);
    }
    result.state.epochs_completed = epoch;

    const SetScores train_scores = score(train_set, result.state.params, config);
    const SetScores test_scores = score(test_set, result.state.params, config);
    if (!std::isfinite(train_scores.loss)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                         ": non-finite training loss");
    }
    EpochLog log{epoch, train_scores.loss, test_scores.loss, test_scores.ade, test_scores.fde};
    result.log.push_back(log);
    if (on_epoch && !on_epoch(log)) break;
  }
  return result;
}

TrainResult train(const DatasetSplit& split, const ModelConfig& config, const TrainConfig& tcfg,
                  const ProductBasis<double>& basis, std::optional<TrainState> resume,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  const auto train_set = prepare(split.train, basis, config);
  const auto test_set = prepare(split.test, basis, config);
  return train_prepared(train_set, test_set, config, tcfg, std::move(resume),
                        [&](const EpochLog& log) {
                          if (on_epoch) on_epoch(log);
                          return true;
                        });
}

}  // namespace gftnn
