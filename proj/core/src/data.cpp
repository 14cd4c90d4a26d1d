#include "dbpc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

namespace dbpc {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

class IdxReader {
 public:
  explicit IdxReader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path_ + ": cannot open");
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  std::uint32_t u32() {
    require(4, "header field");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[offset_++];
    return v;
  }

  std::span<const std::uint8_t> bytes(std::size_t count, const char* what) {
    require(count, what);
    std::span<const std::uint8_t> out(bytes_.data() + offset_, count);
    offset_ += count;
    return out;
  }

  std::size_t offset() const { return offset_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw FormatError(path_ + ": " + what + " at byte offset " + std::to_string(at));
  }

 private:
  void require(std::size_t count, const char* what) const {
    if (bytes_.size() - offset_ < count) {
      fail(std::string("truncated file while reading ") + what + " (need " + std::to_string(count) +
               " bytes, have " + std::to_string(bytes_.size() - offset_) + ")",
           offset_);
    }
  }

  std::string path_;
  std::vector<std::uint8_t> bytes_;
  std::size_t offset_ = 0;
};

double bilinear(const double* src, std::size_t rows, std::size_t cols, double y, double x) {
  const double fy = std::floor(y);
  const double fx = std::floor(x);
  const double wy = y - fy;
  const double wx = x - fx;
  auto pixel = [&](double py, double px) {
    if (py < 0 || px < 0 || py >= static_cast<double>(rows) || px >= static_cast<double>(cols)) return 0.0;
    return src[static_cast<std::size_t>(py) * cols + static_cast<std::size_t>(px)];
  };
  double v = 0.0;
  if ((1 - wy) * (1 - wx) != 0.0) v += (1 - wy) * (1 - wx) * pixel(fy, fx);
  if ((1 - wy) * wx != 0.0) v += (1 - wy) * wx * pixel(fy, fx + 1);
  if (wy * (1 - wx) != 0.0) v += wy * (1 - wx) * pixel(fy + 1, fx);
  if (wy * wx != 0.0) v += wy * wx * pixel(fy + 1, fx + 1);
  return v;
}

}  // namespace

Tensor ImageDataset::image(std::size_t i) const {
  return images.rows(i, 1).reshaped({1, rows(), cols()});
}

ImageDataset load_idx(const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path, std::string name) {
  IdxReader img(images_path);
  if (const auto magic = img.u32(); magic != kImageMagic) img.fail("bad image magic " + std::to_string(magic), 0);
  const std::size_t count = img.u32();
  const std::size_t rows = img.u32();
  const std::size_t cols = img.u32();
  const auto pixels = img.bytes(count * rows * cols, "pixels");

  IdxReader lab(labels_path);
  if (const auto magic = lab.u32(); magic != kLabelMagic) lab.fail("bad label magic " + std::to_string(magic), 0);
  const std::size_t label_count = lab.u32();
  if (label_count != count) {
    lab.fail("label count " + std::to_string(label_count) + " does not match image count " +
                 std::to_string(count),
             4);
  }
  const std::size_t label_start = lab.offset();
  const auto raw_labels = lab.bytes(count, "labels");

  ImageDataset data;
  data.name = std::move(name);
  data.images = Tensor({count, 1, rows, cols});
  std::transform(pixels.begin(), pixels.end(), data.images.values().begin(),
                 [](std::uint8_t p) { return static_cast<double>(p) / 255.0; });
  data.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (raw_labels[i] >= kNumClasses) {
      lab.fail("label " + std::to_string(raw_labels[i]) + " outside 0..9", label_start + i);
    }
    data.labels.push_back(raw_labels[i]);
  }
  return data;
}

ImageDataset head(const ImageDataset& data, std::size_t count) {
  count = std::min(count, data.size());
  ImageDataset out;
  out.name = data.name;
  out.images = data.images.rows(0, count);
  out.labels.assign(data.labels.begin(), data.labels.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

Tensor gather_images(const ImageDataset& data, std::span<const std::size_t> indices) {
  const std::size_t plane = data.rows() * data.cols();
  Tensor out({indices.size(), 1, data.rows(), data.cols()});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const double* src = data.images.data() + indices[k] * plane;
    std::copy(src, src + plane, out.data() + k * plane);
  }
  return out;
}

std::vector<int> gather_labels(const ImageDataset& data, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(data.labels.at(i));
  return out;
}

Tensor one_hot(int label, std::size_t num_classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
    throw std::out_of_range("label " + std::to_string(label) + " outside 0.." +
                            std::to_string(num_classes - 1));
  }
  Tensor out({num_classes});
  out[static_cast<std::size_t>(label)] = 1.0;
  return out;
}

void AugmentConfig::validate() const {
  if (!(rotation_deg >= 0.0)) throw std::invalid_argument("rotation_deg must be >= 0");
  if (translate_px < 0) throw std::invalid_argument("translate_px must be >= 0");
}

Tensor rotate_translate(const Tensor& image, double degrees, int dx, int dy) {
  if (image.rank() < 2 || image.size() != image.dim(image.rank() - 2) * image.dim(image.rank() - 1)) {
    throw ShapeError("augment expects a single-channel image, got " + to_string(image.shape()));
  }
  const std::size_t rows = image.dim(image.rank() - 2);
  const std::size_t cols = image.dim(image.rank() - 1);
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double cy = (static_cast<double>(rows) - 1.0) / 2.0;
  const double cx = (static_cast<double>(cols) - 1.0) / 2.0;

  Tensor out(image.shape());
  for (std::size_t y = 0; y < rows; ++y) {
    for (std::size_t x = 0; x < cols; ++x) {
      // Output pixel (y, x) comes from the source after undoing the shift
      // and then the rotation.
      const double ty = static_cast<double>(y) - dy - cy;
      const double tx = static_cast<double>(x) - dx - cx;
      const double sy = c * ty - s * tx + cy;
      const double sx = s * ty + c * tx + cx;
      out[y * cols + x] = std::clamp(bilinear(image.data(), rows, cols, sy, sx), 0.0, 1.0);
    }
  }
  return out;
}

Tensor augment(const Tensor& image, const AugmentConfig& cfg, std::mt19937_64& rng) {
  if (!cfg.enabled) return image;
  std::uniform_real_distribution<double> angle(-cfg.rotation_deg, cfg.rotation_deg);
  std::uniform_int_distribution<int> shift(-cfg.translate_px, cfg.translate_px);
  const double degrees = angle(rng);
  const int dx = shift(rng);
  const int dy = shift(rng);
  return rotate_translate(image, degrees, dx, dy);
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  std::uint64_t seed) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t first = 0; first < n; first += batch_size) {
    const std::size_t last = std::min(n, first + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(first),
                         order.begin() + static_cast<std::ptrdiff_t>(last));
  }
  return batches;
}

}  // namespace dbpc
