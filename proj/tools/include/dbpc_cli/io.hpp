#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dbpc/tensor.hpp"

namespace dbpc::cli {

/// Shortest round-trip decimal form, independent of the C++ locale.
std::string format_number(double value);

/// Header-first CSV file, truncated on open and flushed after every row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& cells);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
};

/// Binary PGM (P5, maxval 255). Values are clipped to [0, max_intensity]
/// and scaled to 0..255 with rounding. `image` is {rows, cols} or {1, rows, cols}.
void write_pgm(const std::filesystem::path& path, const Tensor& image, double max_intensity = 1.0);

/// Reads a P5 file with maxval <= 255 into {1, rows, cols} scaled to [0, 1].
Tensor read_pgm(const std::filesystem::path& path);

}  // namespace dbpc::cli
