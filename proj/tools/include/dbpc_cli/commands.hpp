#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dbpc_cli/config.hpp"

namespace dbpc::cli {

/// Flags shared by every command; set values override the config file.
struct RunOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<ClassifyMode> mode;
};

struct ReconstructOptions {
  std::optional<std::size_t> index;           // test-set sample
  std::optional<std::filesystem::path> image;  // or a P5 file
  std::vector<std::size_t> layers;            // 1-based; empty = all hidden layers
};

struct GradcheckCommandOptions {
  double corrupt = 0.0;
  std::optional<std::size_t> fc_instances;
  std::optional<std::size_t> conv_instances;
};

ExperimentConfig resolve_config(const RunOptions& options);

struct EpochResult {
  std::size_t epoch = 0;
  double train_energy = 0.0;  // mean inferred energy per training sample
  MetricsReport report;       // on the test split
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
};

/// Return false to stop after this epoch.
using EpochCallback = std::function<bool(const EpochResult&, const NetworkParams&)>;

/// The training loop behind `train`: cfg.hyper.epochs passes over `train`
/// in seeded shuffled minibatches (augmented if enabled), each followed by
/// an evaluation on `test`.
void run_training(const ExperimentConfig& cfg, NetworkParams& params, const ImageDataset& train,
                  const ImageDataset& test, const EpochCallback& on_epoch);

/// Loads a split named in the config, applying its sample limit.
ImageDataset load_train_split(const ExperimentConfig& cfg);
ImageDataset load_test_split(const ExperimentConfig& cfg);

/// Each command returns the process exit code and throws on errors.
int cmd_train(const RunOptions& options, std::ostream& log);
int cmd_eval(const RunOptions& options, std::ostream& log);
int cmd_reconstruct(const RunOptions& options, const ReconstructOptions& what, std::ostream& log);
int cmd_gradcheck(const RunOptions& options, const GradcheckCommandOptions& what, std::ostream& log);
int cmd_params(const RunOptions& options, const std::optional<std::string>& arch_name, std::ostream& log);

/// CSV column names for per-layer metrics, layers numbered from 1 (the input).
std::vector<std::string> layer_columns(const NetworkParams& params);

}  // namespace dbpc::cli
