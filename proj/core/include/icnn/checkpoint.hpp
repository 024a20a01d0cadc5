#pragma once

// Checkpoint file: "ICNNCKPT", u16 version=1, then little-endian
//   config block  u32 × (num_columns, num_labels, interlink_rounds,
//                        maps_per_column[round][column]..., kernel_size,
//                        final_kernel_size, input_channels, input_height, input_width)
//   u32 block count, then per parameter set (canonical order) a kernel block and a
//   bias block, each prefixed by u32 dims (kh, kw, in, out) / (1, 1, 1, Q), values f32
//   meta          u32 count, then (u32 key length, key, u32 value length, value) pairs
//   CRC32 of all preceding bytes

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "icnn/network.hpp"

namespace icnn {

/// Free-form string metadata stored verbatim (epoch count, seed, calibration, ...).
using CheckpointMeta = std::map<std::string, std::string>;

struct Checkpoint {
  ICNNConfig config;
  ICNNParams params;
  CheckpointMeta meta;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ICNNConfig& config, const ICNNParams& params,
                                            const CheckpointMeta& meta);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const ICNNConfig& config,
                     const ICNNParams& params, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace icnn
