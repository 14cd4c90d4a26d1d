#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbpc/tensor.hpp"

namespace dbpc {

/// Malformed IDX input. The message names the byte offset where reading failed.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kNumClasses = 10;

/// Grayscale images in [0, 1] with integer class labels.
struct ImageDataset {
  std::string name;
  Tensor images;  // {N, 1, rows, cols}
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t rows() const { return images.dim(2); }
  std::size_t cols() const { return images.dim(3); }
  /// Copy of sample i, shape {1, rows, cols}.
  Tensor image(std::size_t i) const;
};

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
ImageDataset load_idx(const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path, std::string name = "idx");

/// First `count` samples (or all of them if there are fewer).
ImageDataset head(const ImageDataset& data, std::size_t count);

/// Stacks the selected samples into {indices.size(), 1, rows, cols}.
Tensor gather_images(const ImageDataset& data, std::span<const std::size_t> indices);
std::vector<int> gather_labels(const ImageDataset& data, std::span<const std::size_t> indices);

/// Unit basis vector of length `num_classes`.
Tensor one_hot(int label, std::size_t num_classes = kNumClasses);

struct AugmentConfig {
  bool enabled = true;
  double rotation_deg = 10.0;
  int translate_px = 2;

  void validate() const;
};

/// Random rotation about the image centre (bilinear) followed by a random
/// integer translation. Pixels from outside the frame are zero; the result
/// is clipped to [0, 1]. Works on {rows, cols} or {1, rows, cols}.
Tensor augment(const Tensor& image, const AugmentConfig& cfg, std::mt19937_64& rng);

/// Rotation by exactly `degrees` and shift by (dx, dy) pixels.
Tensor rotate_translate(const Tensor& image, double degrees, int dx, int dy);

/// Shuffled index batches covering 0..n-1 once; the last batch may be short.
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  std::uint64_t seed);

}  // namespace dbpc
