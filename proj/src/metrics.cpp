#include "gftnn/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "gftnn/errors.hpp"

namespace gftnn {

namespace {

void check_pairs(std::span<const Trajectory> predictions, std::span<const Trajectory> truths) {
  if (predictions.empty()) throw DataError("metrics need at least one scenario");
  if (predictions.size() != truths.size()) {
    throw DimensionError("prediction and ground-truth counts differ");
  }
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    const auto& t = truths[i];
    if (p.x.size() != t.x.size() || p.y.size() != t.y.size() || p.x.size() != p.y.size() ||
        p.x.size() < 2) {
      throw DimensionError("trajectory lengths differ in scenario " + std::to_string(i));
    }
  }
}

// Squared displacement at steps 1..T_pred.
VectorXd squared_displacement(const Trajectory& p, const Trajectory& t) {
  const Index n = p.pred_steps();
  return (p.x.tail(n) - t.x.tail(n)).array().square() + (p.y.tail(n) - t.y.tail(n)).array().square();
}

}  // namespace

double ade(std::span<const Trajectory> predictions, std::span<const Trajectory> truths) {
  check_pairs(predictions, truths);
  double total = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += squared_displacement(predictions[i], truths[i]).mean();
  }
  return std::sqrt(total / static_cast<double>(predictions.size()));
}

double fde(std::span<const Trajectory> predictions, std::span<const Trajectory> truths) {
  check_pairs(predictions, truths);
  double total = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Index last = predictions[i].pred_steps();
    total += std::hypot(predictions[i].x(last) - truths[i].x(last),
                        predictions[i].y(last) - truths[i].y(last));
  }
  return total / static_cast<double>(predictions.size());
}

double ade_euclid_mean(std::span<const Trajectory> predictions, std::span<const Trajectory> truths) {
  check_pairs(predictions, truths);
  double total = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += squared_displacement(predictions[i], truths[i]).array().sqrt().mean();
  }
  return total / static_cast<double>(predictions.size());
}

std::vector<double> per_scenario_ade(std::span<const Trajectory> predictions,
                                     std::span<const Trajectory> truths) {
  check_pairs(predictions, truths);
  std::vector<double> out;
  out.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    out.push_back(std::sqrt(squared_displacement(predictions[i], truths[i]).mean()));
  }
  return out;
}

std::size_t Histogram::mode_bin() const {
  if (counts.empty()) throw DataError("mode of an empty histogram");
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

double Histogram::mode_center() const {
  return (static_cast<double>(mode_bin()) + 0.5) * bin_width;
}

Histogram histogram(std::span<const double> values, double bin_width) {
  if (!(bin_width > 0)) throw ConfigError("histogram bin width must be positive");
  Histogram h;
  h.bin_width = bin_width;
  if (values.empty()) return h;
  std::vector<std::size_t> bins;
  bins.reserve(values.size());
  for (double v : values) {
    if (!(v >= 0) || !std::isfinite(v)) throw DataError("histogram values must be finite and >= 0");
    bins.push_back(static_cast<std::size_t>(std::floor(v / bin_width)));
  }
  h.counts.assign(*std::max_element(bins.begin(), bins.end()) + 1, 0);
  for (std::size_t b : bins) ++h.counts[b];
  for (std::size_t i = 0; i <= h.counts.size(); ++i) h.edges.push_back(static_cast<double>(i) * bin_width);
  return h;
}

EvalReport evaluate(std::span<const Trajectory> predictions, std::span<const Trajectory> truths,
                    double bin_width) {
  EvalReport r;
  r.ade = ade(predictions, truths);
  r.fde = fde(predictions, truths);
  r.ade_euclid_mean = ade_euclid_mean(predictions, truths);
  r.per_scenario_ade = per_scenario_ade(predictions, truths);
  r.histogram = histogram(r.per_scenario_ade, bin_width);
  r.n_scenarios = predictions.size();
  return r;
}

}  // namespace gftnn
