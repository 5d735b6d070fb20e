#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gftnn/metrics.hpp"
#include "gftnn/model.hpp"
#include "gftnn/scenario.hpp"
#include "gftnn/training.hpp"

namespace gftnn {

inline constexpr int kArchiveFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;

/// A dataset of scenarios sharing one sampling rate and window shape.
/// Feature tensors are stored flattened row-major in (k, t, v) order.
struct ScenarioArchive {
  double fps = 0;
  Index obs_steps = 0;
  Index pred_steps = 0;
  Index n_vehicles = 0;
  std::vector<Scenario> scenarios;

  const Scenario& find(const std::string& id) const;
};

ScenarioArchive make_archive(std::vector<Scenario> scenarios);
std::string archive_to_string(const ScenarioArchive& archive);
ScenarioArchive archive_from_string(const std::string& text);
void write_archive(const std::filesystem::path& path, const ScenarioArchive& archive);
ScenarioArchive read_archive(const std::filesystem::path& path);

/// Everything needed to predict or resume training.
struct Checkpoint {
  ModelConfig config;
  ProductBasis<double> basis;
  TrainState state;
  TrainConfig train_config;
  double split_ratio = 0.7;
};

/// JSON with every 64-bit float written as a round-trip decimal string.
std::string checkpoint_to_string(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_string(const std::string& text);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// `epoch,train_loss,test_loss,ade,fde`; the header is written when the file
/// is new or `append` is false.
void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& rows,
                        bool append);

/// `axis,index,eigenvalue`
void write_eigenvalues_csv(const std::filesystem::path& path, const ProductBasis<double>& basis);
/// `k,l1,l2,value` (also used for time-domain tensors as `k,t,v,value`)
void write_tensor_csv(const std::filesystem::path& path, const FeatureTensor<double>& tensor,
                      const char* header = "k,l1,l2,value");

void write_report_json(const std::filesystem::path& path, const EvalReport& report);
/// `bin_lo,bin_hi,count`
void write_histogram_csv(const std::filesystem::path& path, const Histogram& histogram);
/// `step,t,x,y`
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory, double fps);

std::string format_double(double v);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace gftnn
