#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gftnn/errors.hpp"
#include "gftnn/trajectory.hpp"

namespace gftnn {

/// sqrt of the scenario-and-step mean of squared displacement over steps
/// 1..T_pred (root-mean-square form).
double ade(std::span<const Trajectory> predictions, std::span<const Trajectory> truths);

/// Mean over scenarios of the Euclidean displacement at the final step.
double fde(std::span<const Trajectory> predictions, std::span<const Trajectory> truths);

/// Mean of per-step Euclidean displacements, the form common in the
/// trajectory literature. Reported separately, never substituted for ade().
double ade_euclid_mean(std::span<const Trajectory> predictions, std::span<const Trajectory> truths);

/// Per-scenario RMS displacement sqrt(mean_t |d_t|^2).
std::vector<double> per_scenario_ade(std::span<const Trajectory> predictions,
                                     std::span<const Trajectory> truths);

/// Fixed-width bins [i w, (i+1) w) starting at 0.
struct Histogram {
  double bin_width = 0.1;
  std::vector<double> edges;  // counts.size() + 1 entries, or empty
  std::vector<std::size_t> counts;

  /// Index of the fullest bin (lowest index on ties); requires counts.
  std::size_t mode_bin() const;
  double mode_center() const;
};

Histogram histogram(std::span<const double> values, double bin_width);

struct EvalReport {
  double ade = 0;
  double fde = 0;
  double ade_euclid_mean = 0;
  std::vector<double> per_scenario_ade;
  Histogram histogram;
  std::size_t n_scenarios = 0;
};

EvalReport evaluate(std::span<const Trajectory> predictions, std::span<const Trajectory> truths,
                    double bin_width = 0.1);

}  // namespace gftnn
