#pragma once

// Binary checkpoint of a Network: parameters, optimizer velocities and UL
// running statistics, so training resumes bit-exactly.
//
// Layout (all integers u32 little-endian, reals IEEE-754 f64 little-endian):
//
//   "TCOH"  version  record_count
//   record := kind  attr_count attr*  array_count array*
//   array  := rank  extent*  f64[product(extents)]
//
// Record kinds: 1 network (attrs: input shape), 2 progress (attrs: epochs
// completed), 16 linear (W, b, W velocity, b velocity), 17 conv2d (attr:
// padding; K, b, K velocity, b velocity), 18 tanh, 32 UL vector state and
// 33 UL conv state (each immediately after the layer it watches).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcoh/network.hpp"

namespace tcoh {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Network network;
  std::uint32_t epochs_completed = 0;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tcoh
