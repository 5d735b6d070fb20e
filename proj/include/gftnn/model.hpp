#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gftnn/graph.hpp"
#include "gftnn/layers.hpp"
#include "gftnn/scenario.hpp"
#include "gftnn/spectral.hpp"
#include "gftnn/trajectory.hpp"

namespace gftnn {

enum class GraphKind { spider, mesh };

std::string_view to_string(GraphKind kind);
GraphKind graph_kind_from_string(std::string_view name);

struct ModelConfig {
  std::string preset = "gftnn";
  Index features = 4;  // K; 4 = (x, y, vx, vy), 2 = (vx, vy)
  Index t_obs = 75;
  Index t_pred = 125;
  Index n_vehicles = 9;
  Index p = 75;  // retained temporal eigenpairs
  Index hidden = 50;
  Index n_blocks = 1;
  Index out_width = 3;  // per-feature MLP output
  GraphKind graph_kind = GraphKind::spider;
  bool weighted = false;
  double fps = 25;

  Index per_feature_length() const { return p * n_vehicles; }
  Index spectrum_length() const { return features * per_feature_length(); }
  void validate() const;
};

inline constexpr std::string_view kPresetNames[] = {"gftnn", "gftnn-w", "gftnn-rdcby5",
                                                    "gftnn-rdcby15", "custom"};

/// Named configurations; T_obs and T_pred follow from fps and the window
/// lengths in seconds. "custom" starts from the gftnn defaults.
ModelConfig make_preset(std::string_view name, double fps, double t_obs = 3.0, double t_pred = 5.0,
                        Index n_vehicles = 9);

/// One contiguous slice of the flat parameter vector, column-major.
struct ParamGroup {
  std::string name;
  Index offset = 0;
  Index rows = 0;
  Index cols = 0;

  Index size() const { return rows * cols; }
};

/// Flat layout of every learnable parameter:
///   w_s | per feature k, per block b: W_n, b_n, W_l, b_l | W_h, b_h
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const ModelConfig& config);

  Index total() const { return total_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }
  const ParamGroup& group(std::string_view name) const;

  enum Slot : Index { kWn = 0, kBn = 1, kWl = 2, kBl = 3 };
  const ParamGroup& gate() const { return groups_.front(); }
  const ParamGroup& block(Index feature, Index b, Slot slot) const {
    return groups_[static_cast<std::size_t>(1 + (feature * n_blocks_ + b) * 4 + slot)];
  }
  const ParamGroup& head_weight() const { return groups_[groups_.size() - 2]; }
  const ParamGroup& head_bias() const { return groups_.back(); }

 private:
  void add(std::string name, Index rows, Index cols);

  std::vector<ParamGroup> groups_;
  Index total_ = 0;
  Index n_blocks_ = 1;
};

/// All learnable parameters as one vector plus the layout that names its
/// slices. Gradients and optimiser moments use the same layout.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(ParamLayout layout)
      : layout_(std::move(layout)), values_(VectorXd::Zero(layout_.total())) {}

  const ParamLayout& layout() const { return layout_; }
  VectorXd& values() { return values_; }
  const VectorXd& values() const { return values_; }
  Index size() const { return values_.size(); }

  Eigen::Map<MatrixXd> view(const ParamGroup& g) {
    return Eigen::Map<MatrixXd>(values_.data() + g.offset, g.rows, g.cols);
  }
  Eigen::Map<const MatrixXd> view(const ParamGroup& g) const {
    return Eigen::Map<const MatrixXd>(values_.data() + g.offset, g.rows, g.cols);
  }

 private:
  ParamLayout layout_;
  VectorXd values_;
};

/// Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], biases 0, gate 1.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

using LatentState = Eigen::Vector3d;

/// Intermediate values of one forward pass, kept for backpropagation.
struct BlockTrace {
  VectorXd input;
  VectorXd normalized;
  double inv_std = 0;
  VectorXd pre_activation;
  VectorXd activation;
  VectorXd output;
};

struct ForwardTrace {
  VectorXd spectrum;
  VectorXd gated;
  std::vector<std::vector<BlockTrace>> blocks;  // [feature][block]
  VectorXd concat;
  VectorXd squashed;
  LatentState latent;
};

/// h_z = W_h sigmoid(concat_k MLP_k(gate(s)_k)) + b_h
LatentState encode(const VectorXd& spectrum, const ModelParams& params, const ModelConfig& config,
                   ForwardTrace* trace = nullptr);

Trajectory decode(const LatentState& latent, double v0, Index pred_steps, double fps);

/// Temporal line graph and spatial spider/mesh graph eigenbases.
ProductBasis<double> make_basis(const ModelConfig& config);

/// Basis used for one scenario: the shared basis, or for weighted
/// configurations the shared temporal basis plus a spatial basis from the
/// inverse-distance weighted spider graph at t_0.
ProductBasis<double> scenario_basis(const Scenario& scenario, const ProductBasis<double>& basis,
                                    const ModelConfig& config);

/// Feature channels consumed by the configuration (all four, or velocities).
FeatureTensor<double> select_features(const Scenario& scenario, const ModelConfig& config);

/// Truncated spectral representation s fed to the encoder.
VectorXd spectral_input(const Scenario& scenario, const ProductBasis<double>& basis,
                        const ModelConfig& config);

Trajectory predict(const Scenario& scenario, const ProductBasis<double>& basis,
                   const ModelParams& params, const ModelConfig& config);

/// Throws DimensionError unless the scenario fits the configuration.
void check_scenario(const Scenario& scenario, const ModelConfig& config);

}  // namespace gftnn
