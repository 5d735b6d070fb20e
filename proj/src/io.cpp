#include "gftnn/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gftnn {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("not a decimal number: '" + s + "'");
  }
  return v;
}

template <typename Derived>
json strings_row_major(const Eigen::MatrixBase<Derived>& m) {
  json arr = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) arr.push_back(format_double(m(i, j)));
  return arr;
}

MatrixXd matrix_from_strings(const json& arr, Index rows, Index cols, const std::string& what) {
  if (!arr.is_array() || static_cast<Index>(arr.size()) != rows * cols) {
    throw SchemaError(what + ": expected " + std::to_string(rows * cols) + " values");
  }
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = parse_double(arr[static_cast<std::size_t>(i * cols + j)].get<std::string>());
  return m;
}

json spectrum_to_json(const Spectrum<double>& s) {
  return {{"size", s.size()},
          {"eigenvalues", strings_row_major(s.eigenvalues)},
          {"eigenvectors", strings_row_major(s.eigenvectors)}};
}

Spectrum<double> spectrum_from_json(const json& j, const std::string& what) {
  const Index n = j.at("size").get<Index>();
  return {matrix_from_strings(j.at("eigenvalues"), n, 1, what + ".eigenvalues").col(0),
          matrix_from_strings(j.at("eigenvectors"), n, n, what + ".eigenvectors")};
}

json config_to_json(const ModelConfig& c) {
  return {{"preset", c.preset},       {"features", c.features},
          {"t_obs", c.t_obs},         {"t_pred", c.t_pred},
          {"n_vehicles", c.n_vehicles}, {"p", c.p},
          {"hidden", c.hidden},       {"n_blocks", c.n_blocks},
          {"out_width", c.out_width}, {"graph_kind", std::string(to_string(c.graph_kind))},
          {"weighted", c.weighted},   {"fps", format_double(c.fps)}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.preset = j.at("preset").get<std::string>();
  c.features = j.at("features").get<Index>();
  c.t_obs = j.at("t_obs").get<Index>();
  c.t_pred = j.at("t_pred").get<Index>();
  c.n_vehicles = j.at("n_vehicles").get<Index>();
  c.p = j.at("p").get<Index>();
  c.hidden = j.at("hidden").get<Index>();
  c.n_blocks = j.at("n_blocks").get<Index>();
  c.out_width = j.at("out_width").get<Index>();
  c.graph_kind = graph_kind_from_string(j.at("graph_kind").get<std::string>());
  c.weighted = j.at("weighted").get<bool>();
  c.fps = parse_double(j.at("fps").get<std::string>());
  c.validate();
  return c;
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

void ensure_parent(const std::filesystem::path& path) {
  if (!path.has_parent_path()) return;
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
}

}  // namespace

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

// ---------------------------------------------------------------- archive

const Scenario& ScenarioArchive::find(const std::string& id) const {
  for (const auto& s : scenarios) {
    if (s.id == id) return s;
  }
  throw IndexError("no scenario with id '" + id + "'");
}

ScenarioArchive make_archive(std::vector<Scenario> scenarios) {
  ScenarioArchive a;
  if (!scenarios.empty()) {
    const Scenario& first = scenarios.front();
    a.fps = first.fps;
    a.obs_steps = first.obs_steps();
    a.pred_steps = first.pred_steps();
    a.n_vehicles = first.n_vehicles();
    for (const auto& s : scenarios) {
      if (s.fps != a.fps || s.obs_steps() != a.obs_steps || s.pred_steps() != a.pred_steps ||
          s.n_vehicles() != a.n_vehicles) {
        throw DimensionError("scenario '" + s.id + "' does not match the archive shape");
      }
    }
  }
  a.scenarios = std::move(scenarios);
  return a;
}

std::string archive_to_string(const ScenarioArchive& archive) {
  json scenarios = json::array();
  for (const auto& s : archive.scenarios) {
    json features = json::array();
    for (Index k = 0; k < s.features.channels(); ++k)
      for (Index t = 0; t < s.obs_steps(); ++t)
        for (Index v = 0; v < s.n_vehicles(); ++v) features.push_back(s.features(k, t, v));
    std::vector<double> fx(s.future.x.data() + 1, s.future.x.data() + s.future.x.size());
    std::vector<double> fy(s.future.y.data() + 1, s.future.y.data() + s.future.y.size());
    scenarios.push_back({{"id", s.id},
                         {"maneuver", std::string(to_string(s.maneuver))},
                         {"v0", s.v0},
                         {"features", std::move(features)},
                         {"future_x", fx},
                         {"future_y", fy}});
  }
  const json doc = {{"format_version", kArchiveFormatVersion},
                    {"fps", archive.fps},
                    {"obs_steps", archive.obs_steps},
                    {"pred_steps", archive.pred_steps},
                    {"n_vehicles", archive.n_vehicles},
                    {"feature_order", {"x_rel", "y_rel", "vx", "vy"}},
                    {"index_order", "k,t,v"},
                    {"scenarios", std::move(scenarios)}};
  return doc.dump(1) + "\n";
}

ScenarioArchive archive_from_string(const std::string& text) {
  const json doc = parse_json(text, "scenario archive");
  try {
    if (doc.at("format_version").get<int>() != kArchiveFormatVersion) {
      throw SchemaError("unsupported scenario archive version");
    }
    ScenarioArchive a;
    a.fps = doc.at("fps").get<double>();
    a.obs_steps = doc.at("obs_steps").get<Index>();
    a.pred_steps = doc.at("pred_steps").get<Index>();
    a.n_vehicles = doc.at("n_vehicles").get<Index>();
    for (const auto& js : doc.at("scenarios")) {
      Scenario s;
      s.id = js.at("id").get<std::string>();
      s.maneuver = maneuver_from_string(js.at("maneuver").get<std::string>());
      s.v0 = js.at("v0").get<double>();
      s.fps = a.fps;
      const auto& f = js.at("features");
      if (static_cast<Index>(f.size()) != kChannelCount * a.obs_steps * a.n_vehicles) {
        throw SchemaError("scenario '" + s.id + "': feature tensor has wrong length");
      }
      s.features = FeatureTensor<double>(kChannelCount, a.obs_steps, a.n_vehicles);
      std::size_t pos = 0;
      for (Index k = 0; k < kChannelCount; ++k)
        for (Index t = 0; t < a.obs_steps; ++t)
          for (Index v = 0; v < a.n_vehicles; ++v) s.features(k, t, v) = f[pos++].get<double>();
      const auto fx = js.at("future_x").get<std::vector<double>>();
      const auto fy = js.at("future_y").get<std::vector<double>>();
      if (static_cast<Index>(fx.size()) != a.pred_steps || fy.size() != fx.size()) {
        throw SchemaError("scenario '" + s.id + "': future has wrong length");
      }
      s.future = Trajectory(a.pred_steps);
      for (Index i = 0; i < a.pred_steps; ++i) {
        s.future.x(i + 1) = fx[static_cast<std::size_t>(i)];
        s.future.y(i + 1) = fy[static_cast<std::size_t>(i)];
      }
      a.scenarios.push_back(std::move(s));
    }
    return a;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("scenario archive: ") + e.what());
  }
}

void write_archive(const std::filesystem::path& path, const ScenarioArchive& archive) {
  write_text_file(path, archive_to_string(archive));
}

ScenarioArchive read_archive(const std::filesystem::path& path) {
  return archive_from_string(read_text_file(path));
}

// ---------------------------------------------------------------- checkpoint

std::string checkpoint_to_string(const Checkpoint& c) {
  const ModelParams& params = c.state.params;
  json jp = json::object();
  for (const auto& g : params.layout().groups()) jp[g.name] = strings_row_major(params.view(g));
  const TrainConfig& t = c.train_config;
  const json doc = {
      {"format_version", kCheckpointFormatVersion},
      {"config", config_to_json(c.config)},
      {"basis", {{"temporal", spectrum_to_json(c.basis.temporal)},
                 {"spatial", spectrum_to_json(c.basis.spatial)}}},
      {"parameter_count", params.size()},
      {"params", std::move(jp)},
      {"optimizer", {{"step", c.state.adam.step},
                     {"first_moment", strings_row_major(c.state.adam.first_moment)},
                     {"second_moment", strings_row_major(c.state.adam.second_moment)}}},
      {"epochs_completed", c.state.epochs_completed},
      {"training", {{"learning_rate", format_double(t.learning_rate)},
                    {"batch_size", t.batch_size},
                    {"seed", t.seed},
                    {"adam_beta1", format_double(t.adam_beta1)},
                    {"adam_beta2", format_double(t.adam_beta2)},
                    {"adam_eps", format_double(t.adam_eps)},
                    {"split_ratio", format_double(c.split_ratio)}}}};
  return doc.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  const json doc = parse_json(text, "checkpoint");
  try {
    if (doc.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw SchemaError("unsupported checkpoint version");
    }
    Checkpoint c;
    c.config = config_from_json(doc.at("config"));
    c.basis.temporal = spectrum_from_json(doc.at("basis").at("temporal"), "basis.temporal");
    c.basis.spatial = spectrum_from_json(doc.at("basis").at("spatial"), "basis.spatial");
    if (c.basis.temporal_size() != c.config.t_obs || c.basis.spatial_size() != c.config.n_vehicles) {
      throw SchemaError("checkpoint basis does not match its configuration");
    }
    c.state.params = ModelParams(ParamLayout(c.config));
    const json& jp = doc.at("params");
    for (const auto& g : c.state.params.layout().groups()) {
      c.state.params.view(g) = matrix_from_strings(jp.at(g.name), g.rows, g.cols, g.name);
    }
    const Index n = c.state.params.size();
    const json& opt = doc.at("optimizer");
    c.state.adam.step = opt.at("step").get<std::int64_t>();
    c.state.adam.first_moment = matrix_from_strings(opt.at("first_moment"), n, 1, "first_moment").col(0);
    c.state.adam.second_moment = matrix_from_strings(opt.at("second_moment"), n, 1, "second_moment").col(0);
    c.state.epochs_completed = doc.at("epochs_completed").get<int>();
    const json& t = doc.at("training");
    c.train_config.learning_rate = parse_double(t.at("learning_rate").get<std::string>());
    c.train_config.batch_size = t.at("batch_size").get<Index>();
    c.train_config.seed = t.at("seed").get<std::uint64_t>();
    c.train_config.adam_beta1 = parse_double(t.at("adam_beta1").get<std::string>());
    c.train_config.adam_beta2 = parse_double(t.at("adam_beta2").get<std::string>());
    c.train_config.adam_eps = parse_double(t.at("adam_eps").get<std::string>());
    c.split_ratio = parse_double(t.at("split_ratio").get<std::string>());
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_text_file(path, checkpoint_to_string(checkpoint));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_string(read_text_file(path));
}

// ---------------------------------------------------------------- CSV / reports

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& rows,
                        bool append) {
  const bool fresh = !append || !std::filesystem::exists(path);
  ensure_parent(path);
  std::ofstream out(path, fresh ? std::ios::trunc : std::ios::app);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  if (fresh) out << "epoch,train_loss,test_loss,ade,fde\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.test_loss) << ','
        << format_double(r.ade) << ',' << format_double(r.fde) << '\n';
  }
}

void write_eigenvalues_csv(const std::filesystem::path& path, const ProductBasis<double>& basis) {
  std::ostringstream out;
  out << "axis,index,eigenvalue\n";
  for (Index i = 0; i < basis.temporal_size(); ++i)
    out << "temporal," << i << ',' << format_double(basis.temporal.eigenvalues(i)) << '\n';
  for (Index i = 0; i < basis.spatial_size(); ++i)
    out << "spatial," << i << ',' << format_double(basis.spatial.eigenvalues(i)) << '\n';
  write_text_file(path, out.str());
}

void write_tensor_csv(const std::filesystem::path& path, const FeatureTensor<double>& tensor,
                      const char* header) {
  std::ostringstream out;
  out << header << '\n';
  for (Index k = 0; k < tensor.channels(); ++k)
    for (Index i = 0; i < tensor.rows(); ++i)
      for (Index j = 0; j < tensor.cols(); ++j)
        out << k << ',' << i << ',' << j << ',' << format_double(tensor(k, i, j)) << '\n';
  write_text_file(path, out.str());
}

void write_report_json(const std::filesystem::path& path, const EvalReport& r) {
  json hist = {{"bin_width", r.histogram.bin_width},
               {"bin_edges", r.histogram.edges},
               {"counts", r.histogram.counts}};
  const json doc = {{"n_scenarios", r.n_scenarios},
                    {"ade", r.ade},
                    {"fde", r.fde},
                    {"ade_euclid_mean", r.ade_euclid_mean},
                    {"per_scenario_ade", r.per_scenario_ade},
                    {"histogram", std::move(hist)}};
  write_text_file(path, doc.dump(1) + "\n");
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out << format_double(h.edges[i]) << ',' << format_double(h.edges[i + 1]) << ',' << h.counts[i] << '\n';
  }
  write_text_file(path, out.str());
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory, double fps) {
  std::ostringstream out;
  out << "step,t,x,y\n";
  for (Index i = 0; i < trajectory.x.size(); ++i) {
    out << i << ',' << format_double(static_cast<double>(i) / fps) << ','
        << format_double(trajectory.x(i)) << ',' << format_double(trajectory.y(i)) << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace gftnn
