#include "gftnn/cli.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gftnn/io.hpp"
#include "gftnn/metrics.hpp"
#include "gftnn/training.hpp"

namespace gftnn {

using nlohmann::json;

ModelConfig model_config_from(const RunConfig& run, double fps) {
  ModelConfig c = make_preset(run.preset, fps, run.t_obs, run.t_pred, run.n_vehicles);
  const bool named = run.preset != "custom";
  auto conflict = [&](const std::string& what) {
    throw ConfigError("override of " + what + " contradicts preset '" + run.preset +
                      "' (use --preset custom)");
  };
  if (run.features != 0) {
    if (named && run.features != c.features) conflict("features");
    c.features = run.features;
  }
  if (run.p != 0) {
    if (named && run.p != c.p) conflict("p");
    c.p = run.p;
  }
  if (run.weighted >= 0) {
    if (named && (run.weighted != 0) != c.weighted) conflict("weighted");
    c.weighted = run.weighted != 0;
  }
  const GraphKind kind = graph_kind_from_string(run.graph);
  if (named && kind != c.graph_kind) conflict("graph");
  c.graph_kind = kind;
  c.hidden = run.hidden;
  c.n_blocks = run.n_blocks;
  c.validate();
  return c;
}

namespace {

namespace fs = std::filesystem;

struct Binding {
  CLI::Option* option;
  std::string key;
  std::function<void(RunConfig&, const RunConfig&)> copy;
  std::function<void(RunConfig&, const json&)> from_json;
};

class Bindings {
 public:
  explicit Bindings(RunConfig& cli) : cli_(cli) {}

  template <typename T>
  void option(CLI::App* app, const std::string& flag, T RunConfig::*field, const std::string& help) {
    add(app->add_option(flag, cli_.*field, help), flag, field);
  }

  void flag(CLI::App* app, const std::string& flag, bool RunConfig::*field, const std::string& help) {
    add(app->add_flag(flag, cli_.*field, help), flag, field);
  }

  void apply_json(RunConfig& dst, const json& doc) const {
    if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [key, value] : doc.items()) {
      const auto it = std::find_if(bindings_.begin(), bindings_.end(),
                                   [&](const Binding& b) { return b.key == key; });
      if (it == bindings_.end()) throw ConfigError("unknown config key '" + key + "'");
      try {
        it->from_json(dst, value);
      } catch (const json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
      }
    }
  }

  void apply_cli(RunConfig& dst) const {
    for (const auto& b : bindings_) {
      if (b.option->count() > 0) b.copy(dst, cli_);
    }
  }

 private:
  template <typename T>
  void add(CLI::Option* opt, const std::string& flag, T RunConfig::*field) {
    std::string key = flag.substr(flag.find_first_not_of('-'));
    std::replace(key.begin(), key.end(), '-', '_');
    // A key may be bound on several subcommands; one entry per key suffices
    // for the config file, but every option needs its own copy hook.
    bindings_.push_back({opt, key, [field](RunConfig& d, const RunConfig& s) { d.*field = s.*field; },
                         [field](RunConfig& d, const json& j) { d.*field = j.get<T>(); }});
  }

  RunConfig& cli_;
  std::vector<Binding> bindings_;
};

std::map<Maneuver, std::size_t> class_counts(const std::vector<Scenario>& scenarios) {
  std::map<Maneuver, std::size_t> counts;
  for (Maneuver m : kAllManeuvers) counts[m] = 0;
  for (const auto& s : scenarios) ++counts[s.maneuver];
  return counts;
}

void print_counts(std::ostream& out, const char* label, const std::vector<Scenario>& scenarios) {
  out << label;
  for (const auto& [m, c] : class_counts(scenarios)) out << ' ' << to_string(m) << '=' << c;
  out << '\n';
}

fs::path output_path(const RunConfig& run, const char* default_name) {
  return run.output.empty() ? fs::path(run.out) / default_name : fs::path(run.output);
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required option ") + flag);
}

ScenarioArchive load_archive_checked(const RunConfig& run) {
  require(run.archive, "--archive");
  ScenarioArchive archive = read_archive(run.archive);
  if (archive.scenarios.empty()) throw DataError("archive '" + run.archive + "' holds no scenarios");
  return archive;
}

// The window shape always comes from the archive itself.
ModelConfig config_for_archive(RunConfig run, const ScenarioArchive& archive) {
  run.t_obs = static_cast<double>(archive.obs_steps) / archive.fps;
  run.t_pred = static_cast<double>(archive.pred_steps) / archive.fps;
  run.n_vehicles = archive.n_vehicles;
  return model_config_from(run, archive.fps);
}

void check_fps(const ScenarioArchive& archive, const ModelConfig& config) {
  if (archive.fps != config.fps) {
    std::ostringstream msg;
    msg << "checkpoint was trained at " << config.fps << " Hz but the archive is sampled at "
        << archive.fps << " Hz";
    throw ConfigError(msg.str());
  }
}

int cmd_prep(const RunConfig& run, std::ostream& out) {
  require(run.input, "--input");
  const auto tracks = ingest_tracks(run.input, track_schema_from_string(run.schema));
  const WindowSpec spec{run.fps, run.t_obs, run.t_pred, run.n_vehicles};
  ExtractionResult extracted = extract_scenarios(tracks, spec);
  out << "tracks=" << tracks.size() << " scenarios=" << extracted.scenarios.size()
      << " skipped=" << extracted.skipped << '\n';
  print_counts(out, "extracted:", extracted.scenarios);
  std::vector<Scenario> kept = std::move(extracted.scenarios);
  if (!run.no_balance) {
    const std::size_t before = kept.size();
    kept = balance(std::move(kept), run.seed);
    out << "balanced: dropped=" << before - kept.size() << '\n';
    print_counts(out, "archive:", kept);
  }
  const fs::path path = output_path(run, "scenarios.json");
  ScenarioArchive archive = make_archive(std::move(kept));
  archive.fps = run.fps;
  archive.obs_steps = spec.obs_steps();
  archive.pred_steps = spec.pred_steps();
  archive.n_vehicles = spec.n_vehicles;
  write_archive(path, archive);
  out << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_synth(const RunConfig& run, std::ostream& out) {
  SynthOptions options;
  options.noise_std = run.noise;
  options.t_obs = run.t_obs;
  options.t_pred = run.t_pred;
  options.n_vehicles = run.n_vehicles;
  ScenarioArchive archive = make_archive(synthesize(run.n, run.fps, run.seed, options));
  print_counts(out, "archive:", archive.scenarios);
  out << "obs_steps=" << archive.obs_steps << " pred_steps=" << archive.pred_steps << '\n';
  const fs::path path = output_path(run, "scenarios.json");
  write_archive(path, archive);
  out << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_spectrum(const RunConfig& run, std::ostream& out) {
  const ScenarioArchive archive = load_archive_checked(run);
  const Scenario& s = run.scenario_id.empty() ? archive.scenarios.front() : archive.find(run.scenario_id);
  const ModelConfig config = config_for_archive(run, archive);
  const ProductBasis<double> basis = scenario_basis(s, make_basis(config), config);
  if (run.inverse) detail::check_truncation(run.inverse_p, basis.temporal_size());
  const FeatureTensor<double> coefficients = gft_extended(s.features, basis);

  double worst = 0;
  for (Index k = 0; k < coefficients.channels(); ++k) {
    const double a = s.features.channel(k).norm();
    const double b = coefficients.channel(k).norm();
    const double rel = std::abs(a - b) / std::max(a, 1e-300);
    worst = std::max(worst, rel);
    const double total = coefficients.channel(k).squaredNorm();
    const double dc = coefficients(k, 0, 0) * coefficients(k, 0, 0);
    out << "channel " << k << ": energy=" << format_double(total)
        << " dc_fraction=" << format_double(total > 0 ? dc / total : 0.0) << '\n';
  }
  out << "parseval_max_rel_error=" << format_double(worst) << '\n';
  if (!(worst < 1e-9)) throw NumericError("Parseval check failed: " + format_double(worst));

  const fs::path dir(run.out);
  write_eigenvalues_csv(dir / "eigenvalues.csv", basis);
  write_tensor_csv(dir / "coefficients.csv", coefficients);
  out << "wrote " << (dir / "eigenvalues.csv").string() << ' ' << (dir / "coefficients.csv").string()
      << '\n';
  if (run.inverse) {
    const FeatureTensor<double> low_pass = inverse_gft(coefficients, basis, run.inverse_p);
    write_tensor_csv(dir / "reconstruction.csv", low_pass, "k,t,v,value");
    double err = 0;
    for (Index k = 0; k < low_pass.channels(); ++k) {
      err += (low_pass.channel(k) - s.features.channel(k)).squaredNorm();
    }
    out << "inverse p=" << run.inverse_p << " reconstruction_error=" << format_double(std::sqrt(err))
        << '\n';
    out << "wrote " << (dir / "reconstruction.csv").string() << '\n';
  }
  return 0;
}

int cmd_train(const RunConfig& run, std::ostream& out) {
  const ScenarioArchive archive = load_archive_checked(run);
  Checkpoint ckpt;
  std::optional<TrainState> resume;
  if (!run.resume.empty()) {
    ckpt = read_checkpoint(run.resume);
    check_fps(archive, ckpt.config);
    resume = ckpt.state;
    out << "resuming from epoch " << ckpt.state.epochs_completed << '\n';
  } else {
    ckpt.config = config_for_archive(run, archive);
    ckpt.basis = make_basis(ckpt.config);
  }
  ckpt.train_config.learning_rate = run.lr;
  ckpt.train_config.epochs = run.epochs;
  ckpt.train_config.batch_size = run.batch_size;
  ckpt.train_config.seed = run.seed;
  ckpt.split_ratio = run.ratio;

  const DatasetSplit data = split(archive.scenarios, run.ratio, run.seed);
  out << "preset=" << ckpt.config.preset << " K=" << ckpt.config.features << " p=" << ckpt.config.p
      << " T_obs=" << ckpt.config.t_obs << " N_V=" << ckpt.config.n_vehicles
      << " weighted=" << (ckpt.config.weighted ? 1 : 0) << '\n';
  out << "parameters=" << ParamLayout(ckpt.config).total() << '\n';
  out << "train=" << data.train.size() << " test=" << data.test.size() << '\n';

  const fs::path dir(run.out);
  const fs::path log_path = dir / "train_log.csv";
  TrainResult result =
      train(data, ckpt.config, ckpt.train_config, ckpt.basis, resume, [&](const EpochLog& e) {
        out << "epoch " << e.epoch << " train_loss=" << format_double(e.train_loss)
            << " test_loss=" << format_double(e.test_loss) << " ade=" << format_double(e.ade)
            << " fde=" << format_double(e.fde) << '\n';
      });
  write_training_log(log_path, result.log, resume.has_value());
  ckpt.state = std::move(result.state);
  write_checkpoint(dir / "checkpoint.json", ckpt);
  out << "wrote " << (dir / "checkpoint.json").string() << ' ' << log_path.string() << '\n';
  return 0;
}

int cmd_eval(const RunConfig& run, std::ostream& out) {
  const ScenarioArchive archive = load_archive_checked(run);
  require(run.checkpoint, "--checkpoint");
  Checkpoint ckpt = read_checkpoint(run.checkpoint);
  check_fps(archive, ckpt.config);
  if (run.untrained) ckpt.state.params = init_params(ckpt.config, ckpt.train_config.seed);

  std::vector<Scenario> subset;
  if (run.subset == "all") {
    subset = archive.scenarios;
  } else if (run.subset == "train" || run.subset == "test") {
    DatasetSplit data = split(archive.scenarios, ckpt.split_ratio, ckpt.train_config.seed);
    subset = run.subset == "train" ? std::move(data.train) : std::move(data.test);
  } else {
    throw ConfigError("--subset must be all, train or test");
  }

  std::vector<Trajectory> predictions;
  std::vector<Trajectory> truths;
  for (const auto& s : subset) {
    predictions.push_back(run.self_test ? s.future : predict(s, ckpt.basis, ckpt.state.params, ckpt.config));
    truths.push_back(s.future);
  }
  const EvalReport report = evaluate(predictions, truths, run.bin_width);
  const fs::path dir(run.out);
  write_report_json(dir / "report.json", report);
  write_histogram_csv(dir / "histogram.csv", report.histogram);
  out << "subset=" << run.subset << " n=" << report.n_scenarios << " ade=" << format_double(report.ade)
      << " fde=" << format_double(report.fde)
      << " ade_euclid_mean=" << format_double(report.ade_euclid_mean)
      << " histogram_mode=" << format_double(report.histogram.mode_center()) << '\n';
  out << "wrote " << (dir / "report.json").string() << ' ' << (dir / "histogram.csv").string() << '\n';
  return 0;
}

int cmd_predict(const RunConfig& run, std::ostream& out) {
  const ScenarioArchive archive = load_archive_checked(run);
  require(run.checkpoint, "--checkpoint");
  const Checkpoint ckpt = read_checkpoint(run.checkpoint);
  check_fps(archive, ckpt.config);
  const Scenario& s = run.scenario_id.empty() ? archive.scenarios.front() : archive.find(run.scenario_id);
  const Trajectory t = predict(s, ckpt.basis, ckpt.state.params, ckpt.config);
  const fs::path path = output_path(run, "trajectory.csv");
  write_trajectory_csv(path, t, ckpt.config.fps);
  out << "scenario=" << s.id << " final=(" << format_double(t.x(t.x.size() - 1)) << ','
      << format_double(t.y(t.y.size() - 1)) << ")\n";
  out << "wrote " << path.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cli;
  Bindings bind(cli);
  CLI::App app{"Graph Fourier transform trajectory prediction"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with default option values");
  bind.option(&app, "--seed", &RunConfig::seed, "Random seed");
  bind.option(&app, "--out", &RunConfig::out, "Output directory");

  auto* prep = app.add_subcommand("prep", "Ingest tracks and build a balanced scenario archive");
  bind.option(prep, "--input", &RunConfig::input, "Track CSV");
  bind.option(prep, "--schema", &RunConfig::schema, "normalized | highd_like");
  bind.flag(prep, "--no-balance", &RunConfig::no_balance, "Keep the raw class distribution");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scenario archive");
  bind.option(synth, "--n", &RunConfig::n, "Number of scenarios");
  bind.option(synth, "--noise", &RunConfig::noise, "Position noise std (m)");

  for (auto* sub : {prep, synth}) {
    bind.option(sub, "--fps", &RunConfig::fps, "Sampling rate (Hz)");
    bind.option(sub, "--t-obs", &RunConfig::t_obs, "Observation period (s)");
    bind.option(sub, "--t-pred", &RunConfig::t_pred, "Prediction horizon (s)");
    bind.option(sub, "--n-vehicles", &RunConfig::n_vehicles, "Vehicles per scenario");
    bind.option(sub, "--output", &RunConfig::output, "Archive path");
  }

  auto* spectrum = app.add_subcommand("spectrum", "Dump the spectral representation of a scenario");
  bind.flag(spectrum, "--inverse", &RunConfig::inverse, "Also write a low-pass reconstruction");
  bind.option(spectrum, "--p", &RunConfig::inverse_p, "Temporal eigenpairs kept by --inverse");

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  bind.option(train_cmd, "--epochs", &RunConfig::epochs, "Epochs");
  bind.option(train_cmd, "--lr", &RunConfig::lr, "Adam learning rate");
  bind.option(train_cmd, "--batch-size", &RunConfig::batch_size, "Mini-batch size");
  bind.option(train_cmd, "--ratio", &RunConfig::ratio, "Train fraction of the split");
  bind.option(train_cmd, "--resume", &RunConfig::resume, "Checkpoint to continue from");

  for (auto* sub : {spectrum, train_cmd}) {
    bind.option(sub, "--preset", &RunConfig::preset, "gftnn | gftnn-w | gftnn-rdcby5 | gftnn-rdcby15 | custom");
    bind.option(sub, "--features", &RunConfig::features, "Feature count K (custom)");
    bind.option(sub, "--spectrum-p", &RunConfig::p, "Retained temporal eigenpairs (custom)");
    bind.option(sub, "--weighted", &RunConfig::weighted, "Inverse-distance weighting 0/1 (custom)");
    bind.option(sub, "--graph", &RunConfig::graph, "spider | mesh (custom)");
    bind.option(sub, "--hidden", &RunConfig::hidden, "MLP hidden width");
    bind.option(sub, "--n-blocks", &RunConfig::n_blocks, "Stacked MLP blocks");
  }

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  bind.option(eval, "--subset", &RunConfig::subset, "all | train | test");
  bind.option(eval, "--bin-width", &RunConfig::bin_width, "Histogram bin width (m)");
  bind.flag(eval, "--self-test", &RunConfig::self_test, "Score ground truth against itself");
  bind.flag(eval, "--untrained", &RunConfig::untrained, "Score the freshly initialised model");

  auto* predict_cmd = app.add_subcommand("predict", "Predict one scenario");
  bind.option(predict_cmd, "--output", &RunConfig::output, "Trajectory CSV path");

  for (auto* sub : {spectrum, train_cmd, eval, predict_cmd}) {
    bind.option(sub, "--archive", &RunConfig::archive, "Scenario archive");
  }
  for (auto* sub : {eval, predict_cmd}) {
    bind.option(sub, "--checkpoint", &RunConfig::checkpoint, "Checkpoint file");
  }
  for (auto* sub : {spectrum, predict_cmd}) {
    bind.option(sub, "--scenario-id", &RunConfig::scenario_id, "Scenario id (default: first)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << '\n';
    return 2;
  }

  try {
    RunConfig run;
    if (!config_path.empty()) {
      try {
        bind.apply_json(run, json::parse(read_text_file(config_path)));
      } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + config_path + "': " + e.what());
      }
    }
    bind.apply_cli(run);

    if (prep->parsed()) return cmd_prep(run, out);
    if (synth->parsed()) return cmd_synth(run, out);
    if (spectrum->parsed()) return cmd_spectrum(run, out);
    if (train_cmd->parsed()) return cmd_train(run, out);
    if (eval->parsed()) return cmd_eval(run, out);
    if (predict_cmd->parsed()) return cmd_predict(run, out);
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace gftnn
