#include <doctest.h>

#include <cmath>
#include <random>

#include "gftnn/layers.hpp"
#include "gftnn/model.hpp"
#include "support.hpp"

using namespace gftnn;

namespace {

ModelConfig tiny(Index features = 2) {
  ModelConfig c = make_preset("custom", 2.0, 3.0, 2.0, 3);
  c.features = features;
  c.hidden = 4;
  c.validate();
  return c;
}

// Straight-line re-implementation of one block, scalar loops only.
VectorXd block_by_loops(const VectorXd& x, const MatrixXd& wn, const VectorXd& bn, const MatrixXd& wl,
                        const VectorXd& bl) {
  const auto n = static_cast<double>(x.size());
  double mean = 0;
  for (Index i = 0; i < x.size(); ++i) mean += x(i);
  mean /= n;
  double var = 0;
  for (Index i = 0; i < x.size(); ++i) var += (x(i) - mean) * (x(i) - mean);
  var /= n;
  VectorXd hidden(wn.rows());
  for (Index r = 0; r < wn.rows(); ++r) {
    double z = bn(r);
    for (Index c = 0; c < wn.cols(); ++c) z += wn(r, c) * (x(c) - mean) / std::sqrt(var + 1e-5);
    hidden(r) = 0.5 * z * (1 + std::erf(z / std::sqrt(2.0)));
  }
  VectorXd out(wl.rows());
  for (Index r = 0; r < wl.rows(); ++r) {
    double z = bl(r);
    for (Index c = 0; c < wl.cols(); ++c) z += wl(r, c) * hidden(c);
    out(r) = z;
  }
  return out;
}

Scenario scenario_with(const ModelConfig& c, double fill, double v0) {
  Scenario s;
  s.id = "s";
  s.features = FeatureTensor<double>(4, c.t_obs, c.n_vehicles);
  for (Index k = 0; k < 4; ++k) s.features.channel(k).setConstant(fill);
  s.future = Trajectory(c.t_pred);
  s.v0 = v0;
  s.fps = c.fps;
  return s;
}

}  // namespace

TEST_CASE("spectral gate") {
  const Eigen::Vector2d s(1, 2);
  CHECK(spectral_gate(s, Eigen::Vector2d::Ones()) == s);
  CHECK(spectral_gate(s, Eigen::Vector2d::Zero()) == Eigen::Vector2d::Zero());
  CHECK(spectral_gate(s, Eigen::Vector2d(3, 4)) == Eigen::Vector2d(3, 8));
  CHECK_THROWS_AS(spectral_gate(VectorXd(s), VectorXd::Ones(3)), DimensionError);
}

TEST_CASE("layer norm") {
  CHECK(layer_norm(VectorXd::Constant(5, 3.7)).normalized.cwiseAbs().maxCoeff() == 0);
  const auto r = layer_norm(Eigen::Vector2d(1, -1));
  CHECK(r.normalized(0) == doctest::Approx(1 / std::sqrt(1 + 1e-5)).epsilon(1e-15));
  CHECK(r.normalized(0) == doctest::Approx(0.999995).epsilon(1e-6));
  CHECK(r.normalized(1) == -r.normalized(0));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const VectorXd v = testing::random_matrix(rng, 3 + i, 1, 50.0);
    CHECK(std::abs(layer_norm(v).normalized.mean()) < 1e-12);
  }
  CHECK_THROWS_AS(layer_norm(VectorXd::Ones(1)), ContractViolation);
}

TEST_CASE("layer norm backward matches finite differences") {
  std::mt19937_64 rng(2);
  const VectorXd x = testing::random_matrix(rng, 6, 1, 2.0);
  const VectorXd g = testing::random_matrix(rng, 6, 1, 1.0);
  const auto fwd = layer_norm(x);
  const VectorXd analytic = layer_norm_backward<double>(fwd.normalized, fwd.inv_std, g);
  for (Index i = 0; i < 6; ++i) {
    VectorXd xp = x, xm = x;
    xp(i) += 1e-6;
    xm(i) -= 1e-6;
    const double numeric = (g.dot(layer_norm(xp).normalized) - g.dot(layer_norm(xm).normalized)) / 2e-6;
    CHECK(analytic(i) == doctest::Approx(numeric).epsilon(1e-7));
  }
}

TEST_CASE("gelu") {
  CHECK(gelu(0.0) == 0);
  CHECK(gelu(10.0) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(std::abs(gelu(-10.0)) < 1e-20);
  CHECK(gelu(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  for (double x : {-3.0, -0.7, 0.0, 0.4, 2.5}) {
    const double numeric = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
    CHECK(gelu_derivative(x) == doctest::Approx(numeric).epsilon(1e-8));
  }
  CHECK(gelu_derivative(0.0) == 0.5);
}

TEST_CASE("sigmoid is stable") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(2.0) + sigmoid(-2.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("mlp block") {
  std::mt19937_64 rng(3);
  const VectorXd x = testing::random_matrix(rng, 7, 1, 3.0);
  const MatrixXd wn = testing::random_matrix(rng, 5, 7);
  const VectorXd bn = testing::random_matrix(rng, 5, 1);
  const MatrixXd wl = testing::random_matrix(rng, 3, 5);
  const VectorXd bl = testing::random_matrix(rng, 3, 1);
  CHECK((mlp_block<double>(x, wn, bn, wl, bl) - block_by_loops(x, wn, bn, wl, bl)).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK(mlp_block<double>(x, MatrixXd::Zero(5, 7), VectorXd::Zero(5), MatrixXd::Zero(3, 5), bl) == bl);
  CHECK_THROWS_AS(mlp_block<double>(x, wn, bn, wl, VectorXd::Zero(4)), DimensionError);
}

TEST_CASE("decoder") {
  const Trajectory straight = decode(LatentState(0, 0, 2.0), 30, 50, 10);
  for (Index i = 0; i <= 50; ++i) {
    CHECK(straight.x(i) == doctest::Approx(30 * i / 10.0).epsilon(1e-15));
    CHECK(straight.y(i) == 0);
  }
  CHECK(decode(LatentState(1, 0, 0), 30, 50, 10).x(20) == doctest::Approx(62.0).epsilon(1e-15));
  for (double h3 : {-5.0, -0.1, 0.0, 3.0}) {
    CHECK(decode(LatentState(0.3, 0, h3), 20, 30, 10).y.cwiseAbs().maxCoeff() == 0);
  }

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const LatentState h(u(rng), u(rng), u(rng));
    const Trajectory t = decode(h, 25, 40, 10);
    CHECK(t.x(0) == 0);
    CHECK(t.y(0) == 0);
    // Monotone and bounded by |h2|.
    for (Index i = 1; i <= 40; ++i) {
      CHECK(std::abs(t.y(i)) <= std::abs(h(1)) + 1e-12);
      if (h(1) * h(2) < 0) CHECK(t.y(i) >= t.y(i - 1) - 1e-12);
      if (h(1) * h(2) > 0) CHECK(t.y(i) <= t.y(i - 1) + 1e-12);
    }
    // Negating the rate mirrors the free logistic in time; the two free curves
    // add up to the amplitude.
    const Trajectory m = decode(LatentState(h(0), h(1), -h(2)), 25, 40, 10);
    const double anchor = h(1) * sigmoid(h(2) * 2.0);
    const double anchor_m = h(1) * sigmoid(-h(2) * 2.0);
    for (Index i = 0; i <= 40; ++i) {
      const double free_m = m.y(i) + anchor_m;
      CHECK(std::abs(free_m - (t.y(40 - i) + anchor)) < 1e-9);
      CHECK(std::abs(free_m + t.y(i) + anchor - h(1)) < 1e-9);
    }
  }
  CHECK_THROWS_AS(decode(LatentState::Zero(), 1, 10, 0), ContractViolation);
}

TEST_CASE("decoder jacobian") {
  const LatentState h(0.5, -2.0, 1.3);
  const MatrixXd jac = decode_jacobian<double>(h, 30, 10.0);
  const VectorXd t = horizon_times<double>(30, 10.0);
  for (Index i = 0; i <= 30; ++i) CHECK(jac(i, 0) == 0.5 * t(i) * t(i));
  CHECK(jac.row(0).cwiseAbs().maxCoeff() == 0);
  for (Index j = 1; j < 3; ++j) {
    LatentState hp = h, hm = h;
    hp(j) += 1e-6;
    hm(j) -= 1e-6;
    const VectorXd numeric = (decode(hp, 0, 30, 10).y - decode(hm, 0, 30, 10).y) / 2e-6;
    CHECK((numeric - jac.col(j)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("presets") {
  const auto g = make_preset("gftnn", 25);
  CHECK(g.features == 4);
  CHECK(g.t_obs == 75);
  CHECK(g.t_pred == 125);
  CHECK(g.p == 75);
  CHECK_FALSE(g.weighted);
  CHECK(g.spectrum_length() == 2700);

  const auto w = make_preset("gftnn-w", 25);
  CHECK(w.features == 2);
  CHECK(w.weighted);
  CHECK(w.p == 75);

  CHECK(make_preset("gftnn-rdcby5", 25).p == 15);
  CHECK(make_preset("gftnn-rdcby15", 25).p == 5);
  CHECK(make_preset("gftnn-rdcby5", 10).p == 6);
  CHECK(make_preset("gftnn-rdcby15", 10).p == 2);
  CHECK(make_preset("gftnn-rdcby15", 10, 1.0).p == 1);
  CHECK(make_preset("gftnn-rdcby15", 25).spectrum_length() == 180);
  CHECK_THROWS_AS(make_preset("gftnn-xl", 25), ConfigError);

  ModelConfig bad = g;
  bad.p = 76;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = g;
  bad.features = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = g;
  bad.graph_kind = GraphKind::mesh;
  bad.weighted = true;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(graph_kind_from_string("mesh") == GraphKind::mesh);
  CHECK_THROWS_AS(graph_kind_from_string("ring"), ConfigError);
}

TEST_CASE("parameter layout") {
  const auto g = make_preset("gftnn", 25);
  const ParamLayout layout(g);
  const Index zk = 75 * 9;
  CHECK(layout.total() == 2700 + 4 * (50 * zk + 50 + 3 * 50 + 3) + 3 * 12 + 3);
  CHECK(layout.gate().rows == 2700);
  CHECK(layout.head_weight().rows == 3);
  CHECK(layout.head_weight().cols == 12);
  CHECK(layout.block(2, 0, ParamLayout::kWl).name == "f2.b0.W_l");
  CHECK(layout.group("f3.b0.b_n").rows == 50);
  CHECK_THROWS_AS(layout.group("nope"), ConfigError);
  CHECK(ParamLayout(make_preset("gftnn-rdcby15", 25)).total() < layout.total());

  ModelConfig deep = tiny();
  deep.n_blocks = 2;
  const ParamLayout dl(deep);
  CHECK(dl.block(0, 0, ParamLayout::kWl).rows == deep.per_feature_length());
  CHECK(dl.block(0, 1, ParamLayout::kWl).rows == 3);

  Index offset = 0;
  for (const auto& grp : layout.groups()) {
    CHECK(grp.offset == offset);
    offset += grp.size();
  }
}

TEST_CASE("parameter initialisation") {
  const auto c = tiny(4);
  const auto a = init_params(c, 9);
  CHECK(a.values() == init_params(c, 9).values());
  CHECK(a.values() != init_params(c, 10).values());
  const auto& l = a.layout();
  CHECK(a.view(l.gate()).isOnes());
  CHECK(a.view(l.head_bias()).isZero());
  CHECK(a.view(l.block(1, 0, ParamLayout::kBn)).isZero());
  const double bound = 1 / std::sqrt(static_cast<double>(c.per_feature_length()));
  const auto wn = a.view(l.block(1, 0, ParamLayout::kWn));
  CHECK(wn.cwiseAbs().maxCoeff() <= bound);
  CHECK(wn.cwiseAbs().maxCoeff() > 0.5 * bound);
}

TEST_CASE("encode") {
  const auto c = tiny(4);
  ModelParams zero{ParamLayout(c)};
  zero.view(zero.layout().head_bias()).col(0) = Eigen::Vector3d(0.1, -0.2, 0.3);
  CHECK(encode(VectorXd::Zero(c.spectrum_length()), zero, c) == LatentState(0.1, -0.2, 0.3));
  CHECK_THROWS_AS(encode(VectorXd::Zero(c.spectrum_length() + 1), zero, c), DimensionError);

  ForwardTrace trace;
  std::mt19937_64 rng(5);
  const VectorXd s = testing::random_matrix(rng, c.spectrum_length(), 1, 3.0);
  const auto p = init_params(c, 1);
  encode(s, p, c, &trace);
  CHECK(trace.concat.size() == 12);

  // Swapping features 0 and 2 along with their parameters leaves h_z unchanged.
  const Index zk = c.per_feature_length();
  VectorXd swapped = s;
  swapped.segment(0, zk) = s.segment(2 * zk, zk);
  swapped.segment(2 * zk, zk) = s.segment(0, zk);
  ModelParams q = p;
  const auto& l = p.layout();
  for (Index slot = 0; slot < 4; ++slot) {
    const auto sl = static_cast<ParamLayout::Slot>(slot);
    q.view(l.block(0, 0, sl)) = p.view(l.block(2, 0, sl));
    q.view(l.block(2, 0, sl)) = p.view(l.block(0, 0, sl));
  }
  q.view(l.gate()).col(0).segment(0, zk) = p.view(l.gate()).col(0).segment(2 * zk, zk);
  q.view(l.gate()).col(0).segment(2 * zk, zk) = p.view(l.gate()).col(0).segment(0, zk);
  auto wh = q.view(l.head_weight());
  const MatrixXd orig = p.view(l.head_weight());
  wh.middleCols(0, 3) = orig.middleCols(6, 3);
  wh.middleCols(6, 3) = orig.middleCols(0, 3);
  CHECK((encode(swapped, q, c) - encode(s, p, c)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("predict") {
  const auto c = tiny(4);
  const auto basis = make_basis(c);
  const auto params = init_params(c, 3);
  Scenario s = scenario_with(c, 0.0, 0.0);

  // All-zero features reach the head as sigmoid(b_l) = 0.5 everywhere.
  ModelParams p = params;
  p.view(p.layout().head_bias()).col(0) = Eigen::Vector3d(1.5, 0, 0);
  const Trajectory t = predict(s, basis, p, c);
  const double h1 = encode(spectral_input(s, basis, c), p, c)(0);
  CHECK(h1 == doctest::Approx(1.5 + 0.5 * p.view(p.layout().head_weight()).row(0).sum()).epsilon(1e-12));
  const double dt = 1 / c.fps;
  CHECK((t.x(2) - 2 * t.x(1) + t.x(0)) / (dt * dt) == doctest::Approx(h1).epsilon(1e-9));

  Scenario r = scenario_with(c, 0.0, 20.0);
  std::mt19937_64 rng(6);
  for (Index k = 0; k < 4; ++k) r.features.channel(k) = testing::random_matrix(rng, c.t_obs, c.n_vehicles);
  const Trajectory a = predict(r, basis, params, c);
  const Trajectory b = predict(r, basis, params, c);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.x.allFinite());

  Scenario wrong = scenario_with(make_preset("gftnn", 10), 0, 0);
  CHECK_THROWS_AS(predict(wrong, basis, params, c), DimensionError);
  r.features(0, 1, 1) = std::nan("");
  CHECK_THROWS_AS(predict(r, basis, params, c), DataError);
}

TEST_CASE("weighted preset uses a per-scenario spatial basis") {
  const auto c = make_preset("gftnn-w", 2.0, 3.0, 2.0, 3);
  const auto basis = make_basis(c);
  Scenario s = scenario_with(c, 0.0, 10.0);
  s.features(kXRel, c.t_obs - 1, 1) = 2.0;
  s.features(kXRel, c.t_obs - 1, 2) = 4.0;
  const auto sb = scenario_basis(s, basis, c);
  MatrixXd pos = s.positions_at_t0();
  const auto expected = eigendecompose(laplacian(apply_inverse_distance_weights(build_spider_graph(3), pos)));
  CHECK(sb.spatial.eigenvalues == expected.eigenvalues);
  CHECK(sb.temporal.eigenvalues == basis.temporal.eigenvalues);
  CHECK((sb.spatial.eigenvalues - basis.spatial.eigenvalues).cwiseAbs().maxCoeff() > 0.1);
  CHECK(spectral_input(s, basis, c).size() == 2 * c.p * 3);

  const auto plain = tiny(2);
  CHECK(scenario_basis(s, basis, plain).spatial.eigenvectors == basis.spatial.eigenvectors);
}
