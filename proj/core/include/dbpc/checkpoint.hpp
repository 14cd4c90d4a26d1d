#pragma once

#include <filesystem>
#include <stdexcept>

#include "dbpc/network.hpp"

namespace dbpc {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout, all integers and floats little-endian:
//
//   "DBPC"                      4 bytes
//   version                     u32 (currently 1)
//   height, width               u64, u64
//   layer count L               u32
//   L x { kind u32, size u64, kernel u64 }   kind: 0 fc, 1 conv, 2 flatten
//   interface count (L - 1)     u32
//   per interface: value count  u64, then that many f64 weights in row-major
//                               order (n_out x n_in or out x in x K x K)

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace dbpc
