#include "dbpc_cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <random>

#include "dbpc/checkpoint.hpp"
#include "dbpc/gradcheck.hpp"
#include "dbpc_cli/io.hpp"

namespace dbpc::cli {
namespace {

namespace fs = std::filesystem;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

ImageDataset load_split(const fs::path& images, const fs::path& labels, std::size_t limit, const char* name) {
  if (images.empty() || labels.empty()) {
    throw ConfigError(std::string("config data: ") + name + " image and label paths are required");
  }
  for (const auto& p : {images, labels}) {
    if (!fs::exists(p)) throw ConfigError(std::string("config data: ") + name + " file not found: " + p.string());
  }
  ImageDataset data = load_idx(images, labels, name);
  return limit ? head(data, limit) : data;
}

ImageDataset load_test(const ExperimentConfig& cfg) {
  return load_split(cfg.data.test_images, cfg.data.test_labels, cfg.data.test_limit, "test");
}

Execution execution(const ExperimentConfig& cfg) { return Execution{cfg.threads, cfg.chunk}; }

NetworkParams load_matching_checkpoint(const fs::path& path, const ExperimentConfig& cfg) {
  NetworkParams params = load_checkpoint(path);
  if (cfg.architecture && !(*cfg.architecture == params.architecture())) {
    throw CheckpointError(path.string() + ": architecture [" + format_layer_list(params.specs()) +
                          "] does not match config [" + format_layer_list(cfg.architecture->layers) + "]");
  }
  return params;
}

void check_input_shape(const NetworkParams& params, const ImageDataset& data) {
  if (params.layer_size(0) != data.rows() * data.cols()) {
    throw DataError(data.name + " images are " + std::to_string(data.rows()) + "x" + std::to_string(data.cols()) +
                    " but the input layer holds " + std::to_string(params.layer_size(0)) + " values");
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::vector<std::string> layer_columns(const NetworkParams& params) {
  std::vector<std::string> cols;
  for (std::size_t l : reconstruction_layers(params)) {
    cols.push_back("psnr_layer" + std::to_string(l + 1));
    cols.push_back("ssim_layer" + std::to_string(l + 1));
  }
  return cols;
}

ExperimentConfig resolve_config(const RunOptions& options) {
  ExperimentConfig cfg = options.config ? load_config(*options.config) : default_config();
  if (options.out) cfg.out_dir = *options.out;
  if (options.seed) cfg.hyper.seed = *options.seed;
  if (options.threads) {
    if (*options.threads == 0) throw ConfigError("--threads must be >= 1");
    cfg.threads = *options.threads;
  }
  if (options.mode) cfg.eval.mode = *options.mode;
  return cfg;
}

void run_training(const ExperimentConfig& cfg, NetworkParams& params, const ImageDataset& train,
                  const ImageDataset& test, const EpochCallback& on_epoch) {
  const Hyperparams& hp = cfg.hyper;
  const Execution exec = execution(cfg);
  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto batches = minibatches(train.size(), hp.batch_size, derive_seed(hp.seed, epoch));
    double energy = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Tensor inputs = gather_images(train, batches[b]);
      const std::vector<int> labels = gather_labels(train, batches[b]);
      if (cfg.augment.enabled) {
        std::mt19937_64 rng(derive_seed(hp.seed, epoch, b + 1));
        for (std::size_t s = 0; s < batches[b].size(); ++s) {
          inputs.set_rows(s, augment(inputs.rows(s, 1), cfg.augment, rng));
        }
      }
      energy += train_batch(params, inputs, labels, hp, exec).energy_inferred;
    }
    EpochResult result;
    result.epoch = epoch;
    result.train_energy = energy / static_cast<double>(train.size());
    result.train_seconds = seconds_since(start);
    result.report = evaluate(params, test, hp, cfg.eval, exec);
    result.eval_seconds = seconds_since(start) - result.train_seconds;
    if (!on_epoch(result, params)) break;
  }
}

ImageDataset load_train_split(const ExperimentConfig& cfg) {
  return load_split(cfg.data.train_images, cfg.data.train_labels, cfg.data.train_limit, "train");
}

ImageDataset load_test_split(const ExperimentConfig& cfg) { return load_test(cfg); }

int cmd_train(const RunOptions& options, std::ostream& log) {
  const ExperimentConfig cfg = resolve_config(options);
  const ImageDataset train = load_train_split(cfg);
  const ImageDataset test = load_test(cfg);

  std::mt19937_64 init_rng(cfg.hyper.seed);
  NetworkParams params = options.checkpoint ? load_matching_checkpoint(*options.checkpoint, cfg)
                                            : NetworkParams(resolved_architecture(cfg), init_rng);
  check_input_shape(params, train);
  check_input_shape(params, test);

  fs::create_directories(cfg.out_dir);
  const fs::path latest = cfg.out_dir / "latest.dbpc";
  const fs::path best = cfg.out_dir / "best-accuracy.dbpc";
  std::vector<std::string> header{"epoch", "train_energy", "test_accuracy"};
  for (auto& c : layer_columns(params)) header.push_back(std::move(c));
  CsvWriter csv(cfg.out_dir / "train.csv", header);
  save_checkpoint(params, latest);

  log << "training " << cfg.architecture_name << " (" << param_count(params) << " weights) on " << train.size()
      << " samples, " << cfg.hyper.epochs << " epochs, " << cfg.threads << " thread(s)\n";

  double best_accuracy = -1.0;
  run_training(cfg, params, train, test, [&](const EpochResult& r, const NetworkParams& current) {
    std::vector<std::string> row{std::to_string(r.epoch), format_number(r.train_energy),
                                 format_number(r.report.accuracy)};
    for (const auto& q : r.report.layers) {
      row.push_back(format_number(q.psnr));
      row.push_back(format_number(q.ssim));
    }
    csv.row(row);
    save_checkpoint(current, latest);
    if (r.report.accuracy > best_accuracy) {
      best_accuracy = r.report.accuracy;
      save_checkpoint(current, best);
    }
    log << "epoch " << r.epoch << "/" << cfg.hyper.epochs << "  energy " << r.train_energy << "  test accuracy "
        << r.report.accuracy;
    if (!r.report.layers.empty()) {
      log << "  psnr(layer " << r.report.layers.front().layer + 1 << ") " << r.report.layers.front().psnr;
    }
    log << "  [" << std::fixed << std::setprecision(1) << r.train_seconds << " s train, " << r.eval_seconds
        << " s eval]" << std::defaultfloat << std::setprecision(6) << std::endl;
    return true;
  });
  return 0;
}

int cmd_eval(const RunOptions& options, std::ostream& log) {
  if (!options.checkpoint) throw ConfigError("eval needs --checkpoint");
  const ExperimentConfig cfg = resolve_config(options);
  const NetworkParams params = load_matching_checkpoint(*options.checkpoint, cfg);
  const ImageDataset test = load_test(cfg);
  check_input_shape(params, test);

  const MetricsReport report = evaluate(params, test, cfg.hyper, cfg.eval, execution(cfg));
  log << "samples " << report.samples << "\naccuracy " << report.accuracy << " (" << to_string(cfg.eval.mode)
      << ")\n";

  fs::create_directories(cfg.out_dir);
  CsvWriter summary(cfg.out_dir / "eval_summary.csv", {"samples", "accuracy", "mode", "reconstructed"});
  summary.row({std::to_string(report.samples), format_number(report.accuracy), std::string(to_string(cfg.eval.mode)),
               std::to_string(report.reconstructed)});
  CsvWriter layers(cfg.out_dir / "eval.csv", {"layer", "psnr", "ssim"});
  for (const auto& q : report.layers) {
    layers.row({std::to_string(q.layer + 1), format_number(q.psnr), format_number(q.ssim)});
    log << "layer " << q.layer + 1 << "  psnr " << q.psnr << " dB  ssim " << q.ssim << "\n";
  }
  return 0;
}

int cmd_reconstruct(const RunOptions& options, const ReconstructOptions& what, std::ostream& log) {
  if (!options.checkpoint) throw ConfigError("reconstruct needs --checkpoint");
  if (what.index.has_value() == what.image.has_value()) {
    throw ConfigError("reconstruct needs exactly one of --index or --image");
  }
  const ExperimentConfig cfg = resolve_config(options);
  const NetworkParams params = load_matching_checkpoint(*options.checkpoint, cfg);

  Tensor input;
  if (what.image) {
    input = read_pgm(*what.image);
  } else {
    const ImageDataset test = load_test(cfg);
    if (*what.index >= test.size()) {
      throw std::out_of_range("--index " + std::to_string(*what.index) + " outside the " +
                              std::to_string(test.size()) + "-sample test set");
    }
    input = test.image(*what.index);
  }
  if (input.size() != params.layer_size(0)) {
    throw DataError("image " + to_string(input.shape()) + " does not fit input layer " +
                    to_string(params.layer_shape(0)));
  }

  std::vector<std::size_t> sources;
  if (what.layers.empty()) {
    sources = reconstruction_layers(params);
  } else {
    for (std::size_t one_based : what.layers) {
      if (one_based < 2 || one_based > params.num_layers()) {
        throw std::out_of_range("layer " + std::to_string(one_based) + " outside 2.." +
                                std::to_string(params.num_layers()));
      }
      sources.push_back(one_based - 1);
    }
  }

  const std::size_t rows = input.dim(input.rank() - 2);
  const std::size_t cols = input.dim(input.rank() - 1);
  const ActivationState state = estimate_representations(params, input.reshaped(params.batch_shape(0, 1)), cfg.hyper);
  fs::create_directories(cfg.out_dir);
  const double max = cfg.eval.max_intensity;
  write_pgm(cfg.out_dir / "original.pgm", input.reshaped({rows, cols}), max);
  log << "wrote " << (cfg.out_dir / "original.pgm").string() << "\n";
  for (std::size_t l : sources) {
    const Tensor image = reconstruct_from_layer(params, state, l).image.reshaped({rows, cols});
    const fs::path file = cfg.out_dir / ("layer" + std::to_string(l + 1) + ".pgm");
    write_pgm(file, image, max);
    log << "wrote " << file.string() << "  psnr " << psnr(input.values(), image.values(), max) << " dB  ssim "
        << ssim(input.values(), image.values(), max) << "\n";
  }
  return 0;
}

int cmd_gradcheck(const RunOptions& options, const GradcheckCommandOptions& what, std::ostream& log) {
  GradcheckOptions g;
  if (options.seed) g.seed = *options.seed;
  g.corrupt = what.corrupt;
  if (what.fc_instances) g.fc_instances = *what.fc_instances;
  if (what.conv_instances) g.conv_instances = *what.conv_instances;

  bool ok = true;
  log << std::left << std::setw(22) << "suite" << std::setw(11) << "instances" << std::setw(12) << "components"
      << std::setw(9) << "skipped" << std::setw(16) << "max_rel_error" << "result\n";
  for (const auto& s : run_gradcheck(g)) {
    log << std::left << std::setw(22) << s.name << std::setw(11) << s.instances << std::setw(12) << s.components
        << std::setw(9) << s.skipped << std::setw(16) << std::scientific << std::setprecision(3) << s.max_rel_error
        << std::defaultfloat << (s.passed ? "PASS" : "FAIL") << "\n";
    ok = ok && s.passed;
  }
  log << "tolerance " << g.tolerance << ", step " << g.step << "\n";
  return ok ? 0 : 1;
}

int cmd_params(const RunOptions& options, const std::optional<std::string>& arch_name, std::ostream& log) {
  Architecture arch;
  if (arch_name) {
    try {
      arch = preset_architecture(*arch_name);
    } catch (const ArchitectureError& e) {
      throw ConfigError(std::string("--arch: ") + e.what());
    }
  } else {
    arch = resolved_architecture(resolve_config(options));
  }
  log << param_count(arch) << "\n";
  return 0;
}

}  // namespace dbpc::cli
