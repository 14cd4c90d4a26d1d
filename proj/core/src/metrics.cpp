#include "dbpc/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dbpc/dbpc.hpp"
#include "dbpc/tensor.hpp"

namespace dbpc {
namespace {

void require_same_size(std::span<const double> x, std::span<const double> y, const char* op) {
  if (x.size() != y.size()) {
    throw ShapeError(std::string(op) + ": images have " + std::to_string(x.size()) + " and " +
                     std::to_string(y.size()) + " pixels");
  }
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : n_(num_classes), counts_(n_ * n_, 0) {}

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts)
    : n_(num_classes), counts_(std::move(counts)) {
  if (counts_.size() != n_ * n_) throw ShapeError("confusion matrix needs n*n counts");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  if (truth >= n_ || predicted >= n_) throw std::out_of_range("class index out of range");
  ++counts_[truth * n_ + predicted];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw ShapeError("confusion matrices differ in class count");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < n_; ++i) sum += counts_[i * n_ + i];
  return sum;
}

double accuracy(const ConfusionMatrix& q) {
  const auto total = q.total();
  if (total == 0) throw DataError("accuracy of an empty confusion matrix");
  return static_cast<double>(q.trace()) / static_cast<double>(total);
}

double psnr(std::span<const double> x, std::span<const double> y, double max_intensity) {
  require_same_size(x, y, "psnr");
  if (x.empty()) throw ShapeError("psnr: empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] - y[i]) * (x[i] - y[i]);
  const double mse = sum / static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_intensity * max_intensity / mse);
}

double ssim(std::span<const double> x, std::span<const double> y, double max_intensity) {
  require_same_size(x, y, "ssim");
  if (x.size() < 2) throw ShapeError("ssim: need at least two pixels");
  const double c1 = (0.01 * max_intensity) * (0.01 * max_intensity);
  const double c2 = (0.03 * max_intensity) * (0.03 * max_intensity);
  const double mx = mean(x);
  const double my = mean(y);
  double vx = 0.0, vy = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    vx += dx * dx;
    vy += dy * dy;
    cov += dx * dy;
  }
  const double n = static_cast<double>(x.size());
  vx /= n;
  vy /= n;
  cov /= n;
  return ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

}  // namespace dbpc
