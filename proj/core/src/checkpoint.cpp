#include "dbpc/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace dbpc {
namespace {

constexpr std::array<char, 4> kMagic{'D', 'B', 'P', 'C'};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
  void put_double(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  template <typename T>
  T get(const char* what) {
    require(sizeof(T), what);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<unsigned char>(bytes_[offset_++])) << (8 * i);
    }
    return value;
  }
  double get_double() { return std::bit_cast<double>(get<std::uint64_t>("weights")); }

  void expect_magic() {
    require(kMagic.size(), "magic");
    if (std::memcmp(bytes_.data() + offset_, kMagic.data(), kMagic.size()) != 0) fail("bad magic");
    offset_ += kMagic.size();
  }

  std::size_t remaining() const { return bytes_.size() - offset_; }
  bool at_end() const { return remaining() == 0; }

  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError(path_ + ": " + what + " at byte offset " + std::to_string(offset_));
  }
  void require(std::size_t n, const char* what) const {
    if (remaining() < n) fail(std::string("truncated checkpoint reading ") + what);
  }

 private:
  std::vector<char> bytes_;
  std::string path_;
  std::size_t offset_ = 0;
};

// Weight count of a layer table in floating point, so absurd sizes from a
// corrupt header cannot overflow before they are rejected.
double approximate_weight_count(const Architecture& arch) {
  const double plane = static_cast<double>(arch.height) * static_cast<double>(arch.width);
  double total = 0.0;
  for (std::size_t l = 1; l < arch.layers.size(); ++l) {
    const auto& prev = arch.layers[l - 1];
    const auto& cur = arch.layers[l];
    const double a = static_cast<double>(prev.size), b = static_cast<double>(cur.size);
    const double k = static_cast<double>(cur.kernel);
    switch (cur.kind) {
      case LayerKind::fully_connected: total += a * b; break;
      case LayerKind::convolutional: total += a * b * k * k; break;
      case LayerKind::flatten_to_classifier: total += a * plane * b; break;
    }
  }
  return total;
}

std::uint32_t kind_code(LayerKind kind) {
  switch (kind) {
    case LayerKind::fully_connected: return 0;
    case LayerKind::convolutional: return 1;
    case LayerKind::flatten_to_classifier: return 2;
  }
  return 0;
}

}  // namespace

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
  Writer w;
  w.put_raw(kMagic.data(), kMagic.size());
  w.put(kCheckpointVersion);
  const Architecture& arch = params.architecture();
  w.put(static_cast<std::uint64_t>(arch.height));
  w.put(static_cast<std::uint64_t>(arch.width));
  w.put(static_cast<std::uint32_t>(arch.layers.size()));
  for (const LayerSpec& spec : arch.layers) {
    w.put(kind_code(spec.kind));
    w.put(static_cast<std::uint64_t>(spec.size));
    w.put(static_cast<std::uint64_t>(spec.kernel));
  }
  w.put(static_cast<std::uint32_t>(params.num_interfaces()));
  for (std::size_t i = 0; i < params.num_interfaces(); ++i) {
    const Tensor& values = params.weights(i).values();
    w.put(static_cast<std::uint64_t>(values.size()));
    for (double v : values.values()) w.put_double(v);
  }
  // Write to a sibling file first so an interrupted save never leaves a torn checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(tmp.string() + ": cannot open for writing");
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw CheckpointError(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path.string() + ": cannot open");
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()),
           path.string());
  r.expect_magic();
  if (const auto version = r.get<std::uint32_t>("version"); version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(version));
  }
  Architecture arch;
  arch.height = r.get<std::uint64_t>("height");
  arch.width = r.get<std::uint64_t>("width");
  const auto layers = r.get<std::uint32_t>("layer count");
  for (std::uint32_t l = 0; l < layers; ++l) {
    const auto code = r.get<std::uint32_t>("layer kind");
    if (code > 2) r.fail("unknown layer kind " + std::to_string(code));
    LayerSpec spec;
    spec.kind = code == 0 ? LayerKind::fully_connected
                          : code == 1 ? LayerKind::convolutional : LayerKind::flatten_to_classifier;
    spec.size = r.get<std::uint64_t>("layer size");
    spec.kernel = r.get<std::uint64_t>("kernel size");
    arch.layers.push_back(spec);
  }
  if (approximate_weight_count(arch) * 8.0 > static_cast<double>(r.remaining())) {
    r.fail("layer table needs more weights than the file holds");
  }
  NetworkParams params = [&] {
    try {
      return NetworkParams(arch);
    } catch (const ArchitectureError& e) {
      throw CheckpointError(path.string() + ": invalid architecture: " + e.what());
    }
  }();
  if (r.get<std::uint32_t>("interface count") != params.num_interfaces()) {
    r.fail("interface count does not match layer table");
  }
  for (std::size_t i = 0; i < params.num_interfaces(); ++i) {
    Tensor& values = params.weights(i).values();
    if (r.get<std::uint64_t>("block size") != values.size()) {
      r.fail("weight block " + std::to_string(i) + " size does not match layer table");
    }
    r.require(values.size() * 8, "weights");
    for (double& v : values.values()) v = r.get_double();
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return params;
}

}  // namespace dbpc
