#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dbpc {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);
  ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts);

  void add(std::size_t truth, std::size_t predicted);
  void merge(const ConfusionMatrix& other);

  std::size_t num_classes() const { return n_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * n_ + predicted); }
  std::uint64_t total() const;
  std::uint64_t trace() const;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

/// trace(Q) / sum(Q). Throws DataError for an empty matrix.
double accuracy(const ConfusionMatrix& q);

/// 10 log10(MAX² / MSE) in dB; +infinity when the images are identical.
double psnr(std::span<const double> x, std::span<const double> y, double max_intensity = 1.0);

/// Structural similarity from whole-image statistics (one window), with
/// C1 = (0.01 MAX)² and C2 = (0.03 MAX)². Variances and covariance use 1/N.
double ssim(std::span<const double> x, std::span<const double> y, double max_intensity = 1.0);

}  // namespace dbpc
