#include <doctest.h>

#include <random>

#include "gftnn/metrics.hpp"

using namespace gftnn;

namespace {

Trajectory shifted(const Trajectory& t, double dx, double dy) {
  Trajectory o = t;
  o.x.tail(t.pred_steps()).array() += dx;
  o.y.tail(t.pred_steps()).array() += dy;
  return o;
}

Trajectory ramp(Index steps, double slope) {
  Trajectory t(steps);
  t.x = VectorXd::LinSpaced(steps + 1, 0, slope * static_cast<double>(steps));
  return t;
}

}  // namespace

TEST_CASE("ade") {
  const std::vector<Trajectory> truth{ramp(10, 2.0), ramp(10, 3.0)};
  CHECK(ade(truth, truth) == 0);

  std::vector<Trajectory> off;
  for (const auto& t : truth) off.push_back(shifted(t, 1, 0));
  CHECK(ade(off, truth) == 1.0);

  const std::vector<Trajectory> one{ramp(10, 1.0)};
  const std::vector<Trajectory> two_m{shifted(one[0], 0, 2)};
  CHECK(ade(two_m, one) == 2.0);

  // RMS over scenarios, not a mean of per-scenario errors.
  const std::vector<Trajectory> mixed{shifted(truth[0], 1, 0), shifted(truth[1], 3, 0)};
  CHECK(ade(mixed, truth) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
  CHECK(ade_euclid_mean(mixed, truth) == doctest::Approx(2.0).epsilon(1e-15));

  CHECK_THROWS_AS(ade(std::vector<Trajectory>{}, std::vector<Trajectory>{}), DataError);
  CHECK_THROWS_AS(ade(one, truth), DimensionError);
  const std::vector<Trajectory> longer{ramp(11, 1.0)};
  CHECK_THROWS_AS(ade(longer, one), DimensionError);
}

TEST_CASE("fde") {
  const std::vector<Trajectory> truth{ramp(10, 2.0), ramp(10, 3.0)};
  CHECK(fde(truth, truth) == 0);
  std::vector<Trajectory> off{shifted(truth[0], 3, 4), shifted(truth[1], 3, 4)};
  CHECK(fde(off, truth) == 5.0);
  off = {shifted(truth[0], 1, 0), shifted(truth[1], 0, -3)};
  CHECK(fde(off, truth) == 2.0);
  CHECK_THROWS_AS(fde(std::vector<Trajectory>{}, std::vector<Trajectory>{}), DataError);
}

TEST_CASE("metric properties") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Trajectory> a, b, a2, b2;
    for (int s = 0; s < 5; ++s) {
      Trajectory p(8), q(8);
      for (Index i = 1; i <= 8; ++i) {
        p.x(i) = n(rng);
        p.y(i) = n(rng);
        q.x(i) = n(rng);
        q.y(i) = n(rng);
      }
      a.push_back(p);
      b.push_back(q);
      a2.push_back(shifted(p, 7.5, -2));
      b2.push_back(shifted(q, 7.5, -2));
    }
    CHECK(ade(a, b) == doctest::Approx(ade(b, a)).epsilon(1e-15));
    CHECK(ade(a2, b2) == doctest::Approx(ade(a, b)).epsilon(1e-12));
    CHECK(fde(a2, b2) == doctest::Approx(fde(a, b)).epsilon(1e-12));
    const auto per = per_scenario_ade(a, b);
    double max_final = 0;
    for (std::size_t s = 0; s < a.size(); ++s) {
      max_final = std::max(max_final, std::hypot(a[s].x(8) - b[s].x(8), a[s].y(8) - b[s].y(8)));
      CHECK(per[s] >= 0);
    }
    CHECK(fde(a, b) <= max_final);
    CHECK(ade(a, b) > 0);
  }
}

TEST_CASE("histogram") {
  const std::vector<double> same{0.42, 0.42, 0.42};
  const auto h1 = histogram(same, 0.1);
  std::size_t nonzero = 0;
  for (auto c : h1.counts) nonzero += c > 0;
  CHECK(nonzero == 1);
  CHECK(h1.counts[h1.mode_bin()] == 3);

  const std::vector<double> spread{0.1, 0.5, 0.9};
  const auto h2 = histogram(spread, 0.5);
  CHECK(h2.counts == std::vector<std::size_t>{1, 2});
  CHECK(h2.edges == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(h2.mode_bin() == 1);
  CHECK(h2.mode_center() == 0.75);

  const auto empty = histogram(std::vector<double>{}, 0.1);
  CHECK(empty.counts.empty());
  CHECK_THROWS_AS(empty.mode_bin(), DataError);

  const std::vector<double> tie{0.1, 0.6};
  CHECK(histogram(tie, 0.5).mode_bin() == 0);
  CHECK_THROWS_AS(histogram(spread, 0.0), ConfigError);
  const std::vector<double> negative{-0.1};
  CHECK_THROWS_AS(histogram(negative, 0.1), DataError);
}

TEST_CASE("evaluate") {
  const std::vector<Trajectory> truth{ramp(10, 2.0), ramp(10, 3.0), ramp(10, 1.0)};
  const std::vector<Trajectory> pred{shifted(truth[0], 0.3, 0), shifted(truth[1], 0, 0.4), truth[2]};
  const EvalReport r = evaluate(pred, truth, 0.1);
  CHECK(r.n_scenarios == 3);
  CHECK(r.ade == doctest::Approx(std::sqrt((0.09 + 0.16) / 3)).epsilon(1e-12));
  CHECK(r.fde == doctest::Approx(0.7 / 3).epsilon(1e-12));
  CHECK(r.per_scenario_ade.size() == 3);
  std::size_t total = 0;
  for (auto c : r.histogram.counts) total += c;
  CHECK(total == 3);

  const EvalReport perfect = evaluate(truth, truth);
  CHECK(perfect.ade == 0);
  CHECK(perfect.fde == 0);
}
