#include "dbpc_cli/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iterator>
#include <stdexcept>

namespace dbpc::cli {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw std::runtime_error(path.string() + ": cannot open for writing");
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw std::logic_error(path_.string() + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                           std::to_string(columns_));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error(path_.string() + ": write failed");
}

void write_pgm(const std::filesystem::path& path, const Tensor& image, double max_intensity) {
  if (image.rank() < 2 || image.size() != image.dim(image.rank() - 2) * image.dim(image.rank() - 1)) {
    throw ShapeError("PGM output needs a single-channel image, got " + to_string(image.shape()));
  }
  const std::size_t rows = image.dim(image.rank() - 2);
  const std::size_t cols = image.dim(image.rank() - 1);
  std::string bytes = "P5 " + std::to_string(cols) + " " + std::to_string(rows) + " 255\n";
  for (double v : image.values()) {
    const double clipped = std::clamp(std::isnan(v) ? 0.0 : v, 0.0, max_intensity);
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(clipped / max_intensity * 255.0))));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  auto number = [&](const char* what) {
    const std::string t = token();
    std::size_t v = 0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || end != t.data() + t.size() || t.empty()) {
      throw std::runtime_error(path.string() + ": bad PGM " + what);
    }
    return v;
  };
  if (token() != "P5") throw std::runtime_error(path.string() + ": not a binary PGM (P5)");
  const std::size_t cols = number("width");
  const std::size_t rows = number("height");
  const std::size_t maxval = number("maxval");
  if (maxval == 0 || maxval > 255) throw std::runtime_error(path.string() + ": unsupported PGM maxval");
  ++pos;  // single whitespace before the raster
  if (bytes.size() < pos || bytes.size() - pos != rows * cols) {
    throw std::runtime_error(path.string() + ": PGM raster has wrong size");
  }
  Tensor image({1, rows, cols});
  for (std::size_t i = 0; i < rows * cols; ++i) {
    image[i] = static_cast<double>(static_cast<unsigned char>(bytes[pos + i])) / static_cast<double>(maxval);
  }
  return image;
}

}  // namespace dbpc::cli
