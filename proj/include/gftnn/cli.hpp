#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "gftnn/model.hpp"

namespace gftnn {

/// Settings shared by all subcommands. Values come from defaults, then the
/// JSON `--config` file (keys are the long flag names with '_' for '-'), then
/// explicit command-line flags.
struct RunConfig {
  std::string out = ".";
  std::uint64_t seed = 0;

  std::string preset = "gftnn";
  Index features = 0;  // 0: preset default
  Index p = 0;         // 0: preset default
  int weighted = -1;   // -1: preset default
  std::string graph = "spider";
  Index hidden = 50;
  Index n_blocks = 1;

  std::string input;
  std::string schema = "normalized";
  std::string archive;
  std::string checkpoint;
  std::string resume;
  std::string output;
  std::string scenario_id;
  std::string subset = "test";

  double fps = 25;
  double t_obs = 3;
  double t_pred = 5;
  Index n_vehicles = 9;
  std::size_t n = 900;
  double noise = 0.05;
  bool no_balance = false;

  int epochs = 30;
  double lr = 1e-4;
  Index batch_size = 64;
  double ratio = 0.7;

  double bin_width = 0.1;
  bool self_test = false;
  bool untrained = false;

  bool inverse = false;
  Index inverse_p = 10;
};

/// Model configuration for data sampled at `fps`; rejects overrides that
/// contradict a named preset.
ModelConfig model_config_from(const RunConfig& run, double fps);

/// Entry point of the `gftnn` tool. Returns the process exit code; failures
/// print one `error: <kind>: <message>` line to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gftnn
