#include "gftnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gftnn {

std::string_view to_string(GraphKind kind) {
  return kind == GraphKind::spider ? "spider" : "mesh";
}

GraphKind graph_kind_from_string(std::string_view name) {
  if (name == "spider") return GraphKind::spider;
  if (name == "mesh") return GraphKind::mesh;
  throw ConfigError("unknown graph kind '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (!(fps > 0)) throw ConfigError("fps must be positive");
  if (t_obs < 2) throw ConfigError("t_obs must be at least 2 steps");
  if (t_pred < 1) throw ConfigError("t_pred must be at least 1 step");
  if (n_vehicles < 2) throw ConfigError("n_vehicles must be at least 2");
  if (features != 2 && features != 4) throw ConfigError("feature count K must be 2 or 4");
  if (p < 1 || p > t_obs) {
    throw ConfigError("p=" + std::to_string(p) + " outside [1, " + std::to_string(t_obs) + "]");
  }
  if (hidden < 1) throw ConfigError("hidden width must be positive");
  if (n_blocks < 1) throw ConfigError("n_blocks must be positive");
  if (out_width < 1) throw ConfigError("out_width must be positive");
  if (weighted && graph_kind != GraphKind::spider) {
    throw ConfigError("inverse-distance weighting is defined for the spider graph only");
  }
}

ModelConfig make_preset(std::string_view name, double fps, double t_obs, double t_pred,
                        Index n_vehicles) {
  ModelConfig c;
  c.preset = std::string(name);
  c.fps = fps;
  c.t_obs = static_cast<Index>(std::lround(fps * t_obs));
  c.t_pred = static_cast<Index>(std::lround(fps * t_pred));
  c.n_vehicles = n_vehicles;
  c.p = c.t_obs;
  if (name == "gftnn" || name == "custom") {
  } else if (name == "gftnn-w") {
    c.features = 2;
    c.weighted = true;
  } else if (name == "gftnn-rdcby5") {
    c.p = std::max<Index>(1, c.t_obs / 5);
  } else if (name == "gftnn-rdcby15") {
    c.p = std::max<Index>(1, c.t_obs / 15);
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  c.validate();
  return c;
}

ParamLayout::ParamLayout(const ModelConfig& config) : n_blocks_(config.n_blocks) {
  config.validate();
  const Index zk = config.per_feature_length();
  add("w_s", config.spectrum_length(), 1);
  for (Index k = 0; k < config.features; ++k) {
    for (Index b = 0; b < config.n_blocks; ++b) {
      const Index out = b + 1 < config.n_blocks ? zk : config.out_width;
      const std::string prefix = "f" + std::to_string(k) + ".b" + std::to_string(b) + ".";
      add(prefix + "W_n", config.hidden, zk);
      add(prefix + "b_n", config.hidden, 1);
      add(prefix + "W_l", out, config.hidden);
      add(prefix + "b_l", out, 1);
    }
  }
  add("head.W_h", 3, config.features * config.out_width);
  add("head.b_h", 3, 1);
}

void ParamLayout::add(std::string name, Index rows, Index cols) {
  groups_.push_back(ParamGroup{std::move(name), total_, rows, cols});
  total_ += rows * cols;
}

const ParamGroup& ParamLayout::group(std::string_view name) const {
  for (const auto& g : groups_) {
    if (g.name == name) return g;
  }
  throw ConfigError("no parameter group named '" + std::string(name) + "'");
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams params{ParamLayout(config)};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (const auto& g : params.layout().groups()) {
    auto v = params.view(g);
    if (g.name == "w_s") {
      v.setOnes();
    } else if (g.cols > 1 || g.name.ends_with("W_n") || g.name.ends_with("W_l") ||
               g.name.ends_with("W_h")) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(g.cols));
      for (Index j = 0; j < g.cols; ++j)
        for (Index i = 0; i < g.rows; ++i) v(i, j) = bound * unit(rng);
    } else {
      v.setZero();
    }
  }
  return params;
}

LatentState encode(const VectorXd& spectrum, const ModelParams& params, const ModelConfig& config,
                   ForwardTrace* trace) {
  const ParamLayout& layout = params.layout();
  if (spectrum.size() != config.spectrum_length() || layout.gate().rows != spectrum.size()) {
    throw DimensionError("spectrum length " + std::to_string(spectrum.size()) +
                         " does not match configuration length " +
                         std::to_string(config.spectrum_length()));
  }
  const Index zk = config.per_feature_length();
  const VectorXd gated = spectral_gate(spectrum, params.view(layout.gate()).col(0));

  VectorXd concat(config.features * config.out_width);
  if (trace) {
    trace->spectrum = spectrum;
    trace->gated = gated;
    trace->blocks.assign(static_cast<std::size_t>(config.features),
                         std::vector<BlockTrace>(static_cast<std::size_t>(config.n_blocks)));
  }
  for (Index k = 0; k < config.features; ++k) {
    VectorXd x = gated.segment(k * zk, zk);
    for (Index b = 0; b < config.n_blocks; ++b) {
      const auto w_n = params.view(layout.block(k, b, ParamLayout::kWn));
      const auto b_n = params.view(layout.block(k, b, ParamLayout::kBn)).col(0);
      const auto w_l = params.view(layout.block(k, b, ParamLayout::kWl));
      const auto b_l = params.view(layout.block(k, b, ParamLayout::kBl)).col(0);
      auto norm = layer_norm(x);
      VectorXd pre = w_n * norm.normalized + b_n;
      VectorXd act = pre.unaryExpr([](double z) { return gelu(z); });
      VectorXd out = w_l * act + b_l;
      if (trace) {
        auto& t = trace->blocks[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)];
        t.input = x;
        t.normalized = norm.normalized;
        t.inv_std = norm.inv_std;
        t.pre_activation = pre;
        t.activation = act;
        t.output = out;
      }
      x = std::move(out);
    }
    concat.segment(k * config.out_width, config.out_width) = x;
  }
  const VectorXd squashed = concat.unaryExpr([](double z) { return sigmoid(z); });
  const LatentState latent =
      params.view(layout.head_weight()) * squashed + params.view(layout.head_bias()).col(0);
  if (trace) {
    trace->concat = concat;
    trace->squashed = squashed;
    trace->latent = latent;
  }
  return latent;
}

Trajectory decode(const LatentState& latent, double v0, Index pred_steps, double fps) {
  const MatrixXd path = decode_path<double>(latent, v0, pred_steps, fps);
  return Trajectory(path.col(0), path.col(1));
}

namespace {

Graph<double> spatial_graph(const ModelConfig& config) {
  return config.graph_kind == GraphKind::spider ? build_spider_graph(config.n_vehicles, 0)
                                                : build_mesh_graph(config.n_vehicles);
}

}  // namespace

ProductBasis<double> make_basis(const ModelConfig& config) {
  config.validate();
  return {eigendecompose(laplacian(build_line_graph(config.t_obs))),
          eigendecompose(laplacian(spatial_graph(config)))};
}

void check_scenario(const Scenario& scenario, const ModelConfig& config) {
  if (scenario.obs_steps() != config.t_obs || scenario.n_vehicles() != config.n_vehicles ||
      scenario.pred_steps() != config.t_pred || scenario.features.channels() != kChannelCount) {
    throw DimensionError("scenario '" + scenario.id + "' has shape " +
                         std::to_string(scenario.obs_steps()) + "x" +
                         std::to_string(scenario.n_vehicles()) + " (pred " +
                         std::to_string(scenario.pred_steps()) + "), model expects " +
                         std::to_string(config.t_obs) + "x" + std::to_string(config.n_vehicles) +
                         " (pred " + std::to_string(config.t_pred) + ")");
  }
}

ProductBasis<double> scenario_basis(const Scenario& scenario, const ProductBasis<double>& basis,
                                    const ModelConfig& config) {
  if (!config.weighted) return basis;
  const auto weighted =
      apply_inverse_distance_weights(spatial_graph(config), scenario.positions_at_t0(), 0);
  return {basis.temporal, eigendecompose(laplacian(weighted))};
}

FeatureTensor<double> select_features(const Scenario& scenario, const ModelConfig& config) {
  if (config.features == kChannelCount) return scenario.features;
  return FeatureTensor<double>(
      std::vector<MatrixXd>{scenario.features.channel(kVx), scenario.features.channel(kVy)});
}

VectorXd spectral_input(const Scenario& scenario, const ProductBasis<double>& basis,
                        const ModelConfig& config) {
  check_scenario(scenario, config);
  if (!scenario.features.allFinite()) {
    throw DataError("scenario '" + scenario.id + "' has non-finite features");
  }
  const FeatureTensor<double> signal = select_features(scenario, config);
  if (config.weighted) {
    return truncate_spectrum(gft_extended(signal, scenario_basis(scenario, basis, config)), config.p);
  }
  return truncate_spectrum(gft_extended(signal, basis), config.p);
}

Trajectory predict(const Scenario& scenario, const ProductBasis<double>& basis,
                   const ModelParams& params, const ModelConfig& config) {
  const LatentState latent = encode(spectral_input(scenario, basis, config), params, config);
  return decode(latent, scenario.v0, config.t_pred, config.fps);
}

}  // namespace gftnn
