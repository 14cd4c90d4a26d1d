#include "dbpc/inference.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace dbpc {
namespace {

struct ChunkResult {
  ConfusionMatrix confusion{kNumClasses};
  std::vector<double> psnr_sum;
  std::vector<double> ssim_sum;
  std::size_t reconstructed = 0;
};

}  // namespace

std::string_view to_string(ClassifyMode mode) {
  return mode == ClassifyMode::feedforward ? "feedforward" : "iterative";
}

ClassifyMode parse_classify_mode(std::string_view name) {
  if (name == "feedforward") return ClassifyMode::feedforward;
  if (name == "iterative") return ClassifyMode::iterative;
  throw std::invalid_argument("unknown classification mode '" + std::string(name) +
                              "' (feedforward|iterative)");
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

ClassificationResult classify(const NetworkParams& params, const Tensor& x, const Hyperparams& hp,
                              ClassifyMode mode) {
  if (x.size() != params.layer_size(0)) {
    throw DataError("input " + to_string(x.shape()) + " does not match input layer " +
                    to_string(params.layer_shape(0)));
  }
  const Tensor batch = x.reshaped(params.batch_shape(0, 1));
  ActivationState state = mode == ClassifyMode::feedforward ? clamp_batch(params, batch)
                                                            : estimate_representations(params, batch, hp);
  ClassificationResult result;
  result.output_activity = state.y.back().reshaped(params.layer_shape(params.num_layers() - 1));
  result.predicted_class = argmax(result.output_activity.values());
  result.mode = mode;
  return result;
}

ActivationState estimate_representations(const NetworkParams& params, const Tensor& inputs,
                                         const Hyperparams& hp) {
  ActivationState state = clamp_batch(params, inputs);
  infer_representations(params, state, hp);
  return state;
}

Tensor reconstruct_batch(const NetworkParams& params, const ActivationState& state, std::size_t l) {
  if (l == 0 || l >= params.num_layers()) {
    throw std::out_of_range("reconstruction source layer " + std::to_string(l) + " outside 1.." +
                            std::to_string(params.num_layers() - 1));
  }
  Tensor r = state.y.at(l);
  for (std::size_t i = l; i-- > 0;) r = relu(params.adjoint(i, r));
  return r;
}

ReconstructionResult reconstruct_from_layer(const NetworkParams& params, const ActivationState& state,
                                            std::size_t l, std::size_t sample) {
  ActivationState single;
  single.clamped = state.clamped;
  for (const Tensor& y : state.y) single.y.push_back(y.rows(sample, 1));
  return {l, reconstruct_batch(params, single, l).reshaped(params.layer_shape(0))};
}

ReconstructionResult reconstruct_from_input(const NetworkParams& params, const Tensor& x,
                                            const Hyperparams& hp, std::size_t l) {
  if (x.size() != params.layer_size(0)) {
    throw DataError("input " + to_string(x.shape()) + " does not match input layer");
  }
  const ActivationState state = estimate_representations(params, x.reshaped(params.batch_shape(0, 1)), hp);
  return reconstruct_from_layer(params, state, l, 0);
}

std::vector<std::size_t> reconstruction_layers(const NetworkParams& params) {
  std::vector<std::size_t> layers;
  for (std::size_t l = 1; l + 1 < params.num_layers(); ++l) layers.push_back(l);
  return layers;
}

MetricsReport evaluate(const NetworkParams& params, const ImageDataset& data, const Hyperparams& hp,
                       const EvalOptions& options, const Execution& exec) {
  if (data.size() == 0) throw DataError("cannot evaluate on an empty dataset");
  const auto sources = reconstruction_layers(params);
  const std::size_t limit = options.reconstruction_limit == 0
                                ? data.size()
                                : std::min(options.reconstruction_limit, data.size());
  const std::size_t top = params.num_layers() - 1;
  const std::size_t classes = params.layer_size(top);
  const std::size_t chunk = std::max<std::size_t>(exec.chunk, 1);
  const std::size_t chunks = (data.size() + chunk - 1) / chunk;
  std::vector<ChunkResult> results(chunks);

  parallel_for(chunks, exec.threads, [&](std::size_t c) {
    const std::size_t first = c * chunk;
    const std::size_t count = std::min(chunk, data.size() - first);
    ChunkResult& out = results[c];
    out.confusion = ConfusionMatrix(classes);
    out.psnr_sum.assign(sources.size(), 0.0);
    out.ssim_sum.assign(sources.size(), 0.0);

    const Tensor inputs = data.images.rows(first, count);
    ActivationState state = clamp_batch(params, inputs);
    const bool need_recon = options.reconstruct && first < limit;
    std::vector<std::size_t> predicted(count);
    auto record = [&](const Tensor& top_activity) {
      for (std::size_t s = 0; s < count; ++s) {
        predicted[s] = argmax(top_activity.values().subspan(s * classes, classes));
      }
    };
    if (options.mode == ClassifyMode::feedforward) record(state.y[top]);
    if (options.mode == ClassifyMode::iterative || need_recon) infer_representations(params, state, hp);
    if (options.mode == ClassifyMode::iterative) record(state.y[top]);
    for (std::size_t s = 0; s < count; ++s) {
      out.confusion.add(static_cast<std::size_t>(data.labels[first + s]), predicted[s]);
    }
    if (!need_recon) return;

    const std::size_t recon_count = std::min(count, limit - first);
    const std::size_t pixels = params.layer_size(0);
    for (std::size_t k = 0; k < sources.size(); ++k) {
      const Tensor images = reconstruct_batch(params, state, sources[k]);
      for (std::size_t s = 0; s < recon_count; ++s) {
        const auto original = inputs.values().subspan(s * pixels, pixels);
        const auto rebuilt = images.values().subspan(s * pixels, pixels);
        out.psnr_sum[k] += psnr(original, rebuilt, options.max_intensity);
        out.ssim_sum[k] += ssim(original, rebuilt, options.max_intensity);
      }
    }
    out.reconstructed = recon_count;
  });

  MetricsReport report;
  report.samples = data.size();
  report.confusion = ConfusionMatrix(classes);
  std::vector<double> psnr_sum(sources.size(), 0.0);
  std::vector<double> ssim_sum(sources.size(), 0.0);
  for (const ChunkResult& r : results) {
    report.confusion.merge(r.confusion);
    report.reconstructed += r.reconstructed;
    for (std::size_t k = 0; k < sources.size() && r.reconstructed > 0; ++k) {
      psnr_sum[k] += r.psnr_sum[k];
      ssim_sum[k] += r.ssim_sum[k];
    }
  }
  report.accuracy = accuracy(report.confusion);
  if (report.reconstructed > 0) {
    const double n = static_cast<double>(report.reconstructed);
    for (std::size_t k = 0; k < sources.size(); ++k) {
      report.layers.push_back({sources[k], psnr_sum[k] / n, ssim_sum[k] / n});
    }
  }
  return report;
}

}  // namespace dbpc
