#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "dbpc/data.hpp"
#include "dbpc/inference.hpp"
#include "dbpc/network.hpp"

namespace dbpc::cli {

/// Invalid or unknown config entry. The message names the section.key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataPaths {
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  std::size_t train_limit = 0;  // 0 = all samples
  std::size_t test_limit = 0;
};

struct ExperimentConfig {
  /// Preset name, or "custom" when the layer list was given explicitly.
  std::string architecture_name = "dbpc-fcn-mnist";
  /// Unset when the config has no [model] section (eval then trusts the checkpoint).
  std::optional<Architecture> architecture;
  Hyperparams hyper;
  DataPaths data;
  AugmentConfig augment;
  EvalOptions eval;
  std::filesystem::path out_dir = "run";
  std::size_t threads = 1;
  /// Samples per unit of parallel work; part of the numerical result.
  std::size_t chunk = Execution{}.chunk;
};

/// Built-in defaults: FCN preset, no data paths.
ExperimentConfig default_config();

/// Reads an INI-style file. Relative data paths resolve against the file's
/// directory. Unknown sections or keys are errors.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Same, from text; relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

/// "fc:784, fc:1000, ..." / "conv:1, conv:16:3, flatten:10".
std::vector<LayerSpec> parse_layer_list(const std::string& text);
std::string format_layer_list(const std::vector<LayerSpec>& layers);

/// The configured architecture, or the FCN preset if none was given.
Architecture resolved_architecture(const ExperimentConfig& config);

}  // namespace dbpc::cli
