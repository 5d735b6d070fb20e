#include "gftnn/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace gftnn {

std::string_view to_string(Maneuver m) {
  switch (m) {
    case Maneuver::keep_lane: return "keep_lane";
    case Maneuver::lane_change_left: return "lane_change_left";
    case Maneuver::lane_change_right: return "lane_change_right";
  }
  return "unknown";
}

Maneuver maneuver_from_string(std::string_view name) {
  for (Maneuver m : kAllManeuvers) {
    if (to_string(m) == name) return m;
  }
  throw ParseError("unknown maneuver '" + std::string(name) + "'");
}

TrackSchema track_schema_from_string(std::string_view name) {
  if (name == "normalized") return TrackSchema::normalized;
  if (name == "highd_like") return TrackSchema::highd_like;
  throw ConfigError("unknown track schema '" + std::string(name) + "'");
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '"')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '"' || cell.back() == '\r')) {
      cell.remove_suffix(1);
    }
    cells.push_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

template <typename T>
T parse_cell(std::string_view cell, std::string_view column, std::size_t line, std::string_view source) {
  T value{};
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
    throw ParseError(std::string(source) + ":" + std::to_string(line) + ": column '" +
                     std::string(column) + "' is not numeric: '" + std::string(cell) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) {
      throw DataError(std::string(source) + ":" + std::to_string(line) + ": non-finite value in '" +
                      std::string(column) + "'");
    }
  }
  return value;
}

}  // namespace

std::vector<RawTrack> parse_tracks(std::istream& in, TrackSchema schema, std::string_view source) {
  static constexpr std::string_view normalized[] = {"frame", "vehicle_id", "x", "y", "vx", "vy", "lane_id"};
  static constexpr std::string_view highd[] = {"frame", "id", "x", "y", "xVelocity", "yVelocity", "laneId"};
  const auto& columns = schema == TrackSchema::normalized ? normalized : highd;

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> position(7);
  {
    bool have_header = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
      have_header = true;
      break;
    }
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = have_header ? split_csv_line(line) : std::vector<std::string_view>{};
    for (std::size_t c = 0; c < 7; ++c) {
      const auto it = std::find(header.begin(), header.end(), columns[c]);
      if (it == header.end()) {
        throw SchemaError(std::string(source) + ": missing column '" + std::string(columns[c]) + "'");
      }
      position[c] = static_cast<std::size_t>(it - header.begin());
    }
  }
  const std::size_t needed = *std::max_element(position.begin(), position.end()) + 1;

  std::map<std::int64_t, std::vector<TrackFrame>> by_id;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < needed) {
      throw ParseError(std::string(source) + ":" + std::to_string(line_no) + ": expected at least " +
                       std::to_string(needed) + " cells, got " + std::to_string(cells.size()));
    }
    TrackFrame f;
    f.frame = parse_cell<std::int64_t>(cells[position[0]], columns[0], line_no, source);
    const auto id = parse_cell<std::int64_t>(cells[position[1]], columns[1], line_no, source);
    f.x = parse_cell<double>(cells[position[2]], columns[2], line_no, source);
    f.y = parse_cell<double>(cells[position[3]], columns[3], line_no, source);
    f.vx = parse_cell<double>(cells[position[4]], columns[4], line_no, source);
    f.vy = parse_cell<double>(cells[position[5]], columns[5], line_no, source);
    f.lane_id = parse_cell<int>(cells[position[6]], columns[6], line_no, source);
    by_id[id].push_back(f);
  }

  std::vector<RawTrack> tracks;
  tracks.reserve(by_id.size());
  for (auto& [id, frames] : by_id) {
    std::stable_sort(frames.begin(), frames.end(),
                     [](const TrackFrame& a, const TrackFrame& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < frames.size(); ++i) {
      if (frames[i].frame == frames[i - 1].frame) {
        throw DataError(std::string(source) + ": vehicle " + std::to_string(id) +
                        " has duplicate frame " + std::to_string(frames[i].frame));
      }
    }
    tracks.push_back(RawTrack{id, std::move(frames)});
  }
  return tracks;
}

std::vector<RawTrack> ingest_tracks(const std::filesystem::path& path, TrackSchema schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return parse_tracks(in, schema, path.string());
}

MatrixXd Scenario::positions_at_t0() const {
  const Index last = obs_steps() - 1;
  MatrixXd pos(n_vehicles(), 2);
  pos.col(0) = features.channel(kXRel).row(last).transpose();
  pos.col(1) = features.channel(kYRel).row(last).transpose();
  return pos;
}

Index WindowSpec::obs_steps() const { return static_cast<Index>(std::lround(fps * t_obs)); }
Index WindowSpec::pred_steps() const { return static_cast<Index>(std::lround(fps * t_pred)); }

void WindowSpec::validate() const {
  if (!(fps > 0) || !(t_obs > 0) || !(t_pred > 0)) {
    throw ConfigError("fps, t_obs and t_pred must be positive");
  }
  if (obs_steps() < 2 || pred_steps() < 1) throw ConfigError("window too short for the given fps");
  if (n_vehicles < 2) throw ConfigError("n_vehicles must be at least 2");
}

namespace {

// Frame lookup for frames [first, first + count); nullptr if any is missing.
const TrackFrame* contiguous(const RawTrack& track, std::int64_t first, std::int64_t count) {
  const auto it = std::lower_bound(track.frames.begin(), track.frames.end(), first,
                                   [](const TrackFrame& f, std::int64_t v) { return f.frame < v; });
  if (it == track.frames.end() || it->frame != first) return nullptr;
  if (track.frames.end() - it < count) return nullptr;
  if ((it + (count - 1))->frame != first + count - 1) return nullptr;
  return &*it;
}

}  // namespace

std::optional<Scenario> extract_window(std::span<const RawTrack> tracks, std::size_t target,
                                       std::int64_t start_frame, const WindowSpec& spec) {
  spec.validate();
  const Index t_obs = spec.obs_steps();
  const Index t_pred = spec.pred_steps();
  const RawTrack& ego = tracks[target];
  const TrackFrame* ego_frames = contiguous(ego, start_frame, t_obs + t_pred);
  if (ego_frames == nullptr) return std::nullopt;

  const TrackFrame& origin = ego_frames[0];
  const TrackFrame& now = ego_frames[t_obs - 1];

  struct Candidate {
    double distance;
    std::int64_t id;
    const TrackFrame* frames;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (i == target) continue;
    const TrackFrame* f = contiguous(tracks[i], start_frame, t_obs);
    if (f == nullptr) continue;
    const TrackFrame& at_t0 = f[t_obs - 1];
    candidates.push_back({std::hypot(at_t0.x - now.x, at_t0.y - now.y), tracks[i].vehicle_id, f});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  });

  Scenario s;
  s.fps = spec.fps;
  s.id = std::to_string(ego.vehicle_id) + "@" + std::to_string(now.frame);
  s.features = FeatureTensor<double>(kChannelCount, t_obs, spec.n_vehicles);
  auto fill_slot = [&](Index slot, const TrackFrame* frames) {
    for (Index t = 0; t < t_obs; ++t) {
      s.features(kXRel, t, slot) = frames[t].x - origin.x;
      s.features(kYRel, t, slot) = frames[t].y - origin.y;
      s.features(kVx, t, slot) = frames[t].vx;
      s.features(kVy, t, slot) = frames[t].vy;
    }
  };
  fill_slot(0, ego_frames);
  for (Index slot = 1; slot < spec.n_vehicles; ++slot) {
    const auto c = static_cast<std::size_t>(slot - 1);
    fill_slot(slot, c < candidates.size() ? candidates[c].frames : ego_frames);
  }

  s.future = Trajectory(t_pred);
  std::vector<int> lanes(static_cast<std::size_t>(t_pred + 1));
  std::vector<double> lateral(static_cast<std::size_t>(t_pred + 1));
  for (Index i = 0; i <= t_pred; ++i) {
    const TrackFrame& f = ego_frames[t_obs - 1 + i];
    s.future.x(i) = f.x - now.x;
    s.future.y(i) = f.y - now.y;
    lanes[static_cast<std::size_t>(i)] = f.lane_id;
    lateral[static_cast<std::size_t>(i)] = f.y;
  }
  s.future.x(0) = 0;
  s.future.y(0) = 0;
  s.v0 = now.vx;
  s.maneuver = label_maneuver(lanes, lateral);
  return s;
}

ExtractionResult extract_scenarios(std::span<const RawTrack> tracks, const WindowSpec& spec) {
  spec.validate();
  const std::int64_t window = spec.obs_steps() + spec.pred_steps();
  const std::int64_t stride = spec.pred_steps();
  ExtractionResult result;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& frames = tracks[i].frames;
    if (frames.empty() || frames.back().frame - frames.front().frame + 1 < window) {
      ++result.skipped;
      continue;
    }
    for (std::int64_t start = frames.front().frame; start + window - 1 <= frames.back().frame;
         start += stride) {
      if (auto s = extract_window(tracks, i, start, spec)) {
        result.scenarios.push_back(std::move(*s));
      } else {
        ++result.skipped;
      }
    }
  }
  return result;
}

Maneuver label_maneuver(std::span<const int> lane_ids, std::span<const double> lateral) {
  if (lane_ids.empty()) return Maneuver::keep_lane;
  for (std::size_t i = 1; i < lane_ids.size(); ++i) {
    if (lane_ids[i] == lane_ids[0]) continue;
    double dy = i < lateral.size() && !lateral.empty() ? lateral[i] - lateral[0] : 0.0;
    if (dy == 0.0) dy = lane_ids[i] - lane_ids[0];
    return dy > 0 ? Maneuver::lane_change_left : Maneuver::lane_change_right;
  }
  return Maneuver::keep_lane;
}

std::vector<Scenario> balance(std::vector<Scenario> scenarios, std::uint64_t seed) {
  std::map<Maneuver, std::vector<std::size_t>> by_class;
  for (Maneuver m : kAllManeuvers) by_class[m];
  for (std::size_t i = 0; i < scenarios.size(); ++i) by_class[scenarios[i].maneuver].push_back(i);
  std::size_t minority = scenarios.size();
  for (const auto& [m, idx] : by_class) {
    if (idx.empty()) throw BalanceError("no scenarios of class " + std::string(to_string(m)));
    minority = std::min(minority, idx.size());
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (auto& [m, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(minority));
  }
  std::sort(keep.begin(), keep.end());
  std::vector<Scenario> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(std::move(scenarios[i]));
  return out;
}

DatasetSplit split(const std::vector<Scenario>& scenarios, double ratio, std::uint64_t seed) {
  if (scenarios.size() < 2) throw SplitError("need at least 2 scenarios to split");
  if (!(ratio > 0 && ratio < 1)) throw SplitError("split ratio must lie in (0, 1)");

  std::map<Maneuver, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < scenarios.size(); ++i) by_class[scenarios[i].maneuver].push_back(i);

  // Largest remainder apportionment of the train total over the classes.
  const auto n = static_cast<double>(scenarios.size());
  auto total = static_cast<std::size_t>(std::llround(ratio * n));
  total = std::clamp<std::size_t>(total, 1, scenarios.size() - 1);
  std::vector<std::pair<Maneuver, std::size_t>> quota;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (const auto& [m, idx] : by_class) {
    const double exact = ratio * static_cast<double>(idx.size());
    const auto base = static_cast<std::size_t>(std::floor(exact));
    remainders.emplace_back(exact - static_cast<double>(base), quota.size());
    quota.emplace_back(m, base);
    assigned += base;
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total && r < remainders.size(); ++r, ++assigned) {
    ++quota[remainders[r].second].second;
  }

  std::mt19937_64 rng(seed);
  DatasetSplit out;
  out.seed = seed;
  for (auto& [m, take] : quota) {
    auto idx = by_class[m];
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      (j < take ? out.train : out.test).push_back(scenarios[idx[j]]);
    }
  }
  std::shuffle(out.train.begin(), out.train.end(), rng);
  std::shuffle(out.test.begin(), out.test.end(), rng);
  return out;
}

namespace {

constexpr double kLaneWidth = 3.5;  // m

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

std::vector<RawTrack> synthesize_scene(std::size_t index, double fps, std::uint64_t seed,
                                       const SynthOptions& options) {
  const WindowSpec spec{fps, options.t_obs, options.t_pred, options.n_vehicles};
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::normal_distribution<double> noise(0.0, 1.0);

  const Index t_obs = spec.obs_steps();
  const Index t_pred = spec.pred_steps();
  const Index n_frames = t_obs + t_pred;
  const double horizon = static_cast<double>(t_pred) / fps;

  const double v0 = uniform(20.0, 35.0);
  const double accel = uniform(-options.max_acceleration, options.max_acceleration);
  const double rate = uniform(1.0, 3.0);
  const auto maneuver = kAllManeuvers[index % 3];
  const double shift = maneuver == Maneuver::lane_change_left    ? kLaneWidth
                       : maneuver == Maneuver::lane_change_right ? -kLaneWidth
                                                                 : 0.0;
  constexpr int kBaseLane = 2;
  const double lane_center = kBaseLane * kLaneWidth;

  std::vector<RawTrack> tracks;
  RawTrack ego{0, {}};
  for (Index f = 0; f < n_frames; ++f) {
    const double t = static_cast<double>(f - (t_obs - 1)) / fps;
    const double z = rate * (t - 0.5 * horizon);
    TrackFrame fr;
    fr.frame = f;
    fr.x = v0 * t + 0.5 * accel * t * t;
    fr.vx = v0 + accel * t;
    fr.y = lane_center + shift * (logistic(z) - logistic(-0.5 * rate * horizon));
    fr.vy = shift * rate * logistic(z) * (1.0 - logistic(z));
    fr.lane_id = static_cast<int>(std::lround(fr.y / kLaneWidth));
    ego.frames.push_back(fr);
  }
  tracks.push_back(std::move(ego));

  const auto n_neighbors =
      static_cast<Index>(std::floor(unit(rng) * static_cast<double>(spec.n_vehicles)));
  for (Index j = 0; j < n_neighbors; ++j) {
    const int lane_offset = static_cast<int>(std::floor(unit(rng) * 3.0)) - 1;
    double dx = uniform(-50.0, 50.0);
    if (lane_offset == 0) dx = (dx < 0 ? -15.0 : 15.0) + 0.7 * dx;
    const double v = uniform(20.0, 35.0);
    RawTrack other{j + 1, {}};
    for (Index f = 0; f < n_frames; ++f) {
      const double t = static_cast<double>(f - (t_obs - 1)) / fps;
      TrackFrame fr;
      fr.frame = f;
      fr.x = dx + v * t;
      fr.y = lane_center + lane_offset * kLaneWidth;
      fr.vx = v;
      fr.vy = 0.0;
      fr.lane_id = kBaseLane + lane_offset;
      other.frames.push_back(fr);
    }
    tracks.push_back(std::move(other));
  }

  if (options.noise_std > 0) {
    for (auto& track : tracks) {
      for (auto& fr : track.frames) {
        fr.x += options.noise_std * noise(rng);
        fr.y += options.noise_std * noise(rng);
      }
    }
  }
  return tracks;
}

std::vector<Scenario> synthesize(std::size_t n, double fps, std::uint64_t seed,
                                 const SynthOptions& options) {
  if (n < 1) throw ConfigError("synthesize needs n >= 1");
  const WindowSpec spec{fps, options.t_obs, options.t_pred, options.n_vehicles};
  std::vector<Scenario> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto tracks = synthesize_scene(i, fps, seed, options);
    auto s = extract_window(tracks, 0, 0, spec);
    s->id = "synth-" + std::to_string(seed) + "-" + std::to_string(i);
    s->maneuver = kAllManeuvers[i % 3];
    out.push_back(std::move(*s));
  }
  return out;
}

}  // namespace gftnn
