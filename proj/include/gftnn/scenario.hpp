#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gftnn/spectral.hpp"
#include "gftnn/trajectory.hpp"

namespace gftnn {

enum class Maneuver { keep_lane, lane_change_left, lane_change_right };

inline constexpr Maneuver kAllManeuvers[] = {Maneuver::keep_lane, Maneuver::lane_change_left,
                                             Maneuver::lane_change_right};

std::string_view to_string(Maneuver m);
Maneuver maneuver_from_string(std::string_view name);

struct TrackFrame {
  std::int64_t frame = 0;
  double x = 0;   // m, longitudinal
  double y = 0;   // m, lateral, growing leftward
  double vx = 0;  // m/s
  double vy = 0;  // m/s
  int lane_id = 0;
};

struct RawTrack {
  std::int64_t vehicle_id = 0;
  std::vector<TrackFrame> frames;  // strictly increasing frame index
};

enum class TrackSchema { normalized, highd_like };

TrackSchema track_schema_from_string(std::string_view name);

/// Reads a track CSV. Rows may come in any order; the result holds one track
/// per vehicle id (ascending) with frames sorted.
std::vector<RawTrack> ingest_tracks(const std::filesystem::path& path, TrackSchema schema);
std::vector<RawTrack> parse_tracks(std::istream& in, TrackSchema schema,
                                   std::string_view source = "<stream>");

/// Feature channels of a scenario tensor.
enum Channel : Index { kXRel = 0, kYRel = 1, kVx = 2, kVy = 3, kChannelCount = 4 };

/// One observation/prediction window around a target vehicle.
///
/// `features` is 4 x T_obs x N_V. Slot 0 is the target; positions are relative
/// to the target's first observed position, velocities are in the (translated)
/// road frame. Unused slots are ghost copies of slot 0.
struct Scenario {
  std::string id;
  FeatureTensor<double> features;
  Trajectory future;
  double v0 = 0;  // m/s, target longitudinal velocity at t_0
  double fps = 0;
  Maneuver maneuver = Maneuver::keep_lane;

  Index obs_steps() const { return features.rows(); }
  Index pred_steps() const { return future.pred_steps(); }
  Index n_vehicles() const { return features.cols(); }

  /// Relative (x, y) of every slot at the last observed step, N_V x 2.
  MatrixXd positions_at_t0() const;
};

struct WindowSpec {
  double fps = 25;
  double t_obs = 3;   // s
  double t_pred = 5;  // s
  Index n_vehicles = 9;

  Index obs_steps() const;
  Index pred_steps() const;
  void validate() const;
};

struct ExtractionResult {
  std::vector<Scenario> scenarios;
  std::size_t skipped = 0;
};

/// Builds the scenario whose observation window starts at `start_frame` of
/// the target track, or nothing if the window is not fully covered.
std::optional<Scenario> extract_window(std::span<const RawTrack> tracks, std::size_t target,
                                       std::int64_t start_frame, const WindowSpec& spec);

/// Sliding-window extraction over every track acting as target, stride
/// T_pred frames. Windows without full coverage are counted as skipped.
ExtractionResult extract_scenarios(std::span<const RawTrack> tracks, const WindowSpec& spec);

/// Classifies the target's lane ids over t_0..t_0+T_pred. `lateral` holds the
/// target's y over the same frames.
Maneuver label_maneuver(std::span<const int> lane_ids, std::span<const double> lateral);

/// Down-samples every class to the size of the smallest one.
std::vector<Scenario> balance(std::vector<Scenario> scenarios, std::uint64_t seed);

struct SynthOptions {
  double noise_std = 0.05;  // m
  double max_acceleration = 2.0;  // m/s^2, drawn from U[-max, max]
  double t_obs = 3;
  double t_pred = 5;
  Index n_vehicles = 9;
};

/// Generates scenarios whose targets follow the decoder's motion family:
/// constant acceleration longitudinally plus an optional logistic lane change.
/// Classes cycle keep / left / right.
std::vector<Scenario> synthesize(std::size_t n, double fps, std::uint64_t seed,
                                 const SynthOptions& options = {});

/// Raw tracks of the synthetic scene behind `synthesize(...)[index]`;
/// frame 0 is the first observed step.
std::vector<RawTrack> synthesize_scene(std::size_t index, double fps, std::uint64_t seed,
                                       const SynthOptions& options = {});

struct DatasetSplit {
  std::vector<Scenario> train;
  std::vector<Scenario> test;
  std::uint64_t seed = 0;
};

/// Class-stratified shuffled split; `ratio` is the train fraction.
DatasetSplit split(const std::vector<Scenario>& scenarios, double ratio, std::uint64_t seed);

}  // namespace gftnn
