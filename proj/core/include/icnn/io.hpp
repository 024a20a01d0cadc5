#pragma once

// Binary tensor and label-map files.
//
// TensorFile:   "ICNNTNSR" u16 version=1, u32 H, W, C, f32 payload (row, col, channel), CRC32
// LabelMapFile: "ICNNLBLS" u16 version=1, u32 H, W, u8 num_classes, u8 payload, CRC32
//
// All integers and floats are little-endian; the CRC32 covers every preceding byte.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "icnn/tensor.hpp"

namespace icnn::io {

inline constexpr std::uint16_t kFormatVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor3& t);
Tensor3 decode_tensor(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_labels(const LabelMap& labels);
LabelMap decode_labels(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor3& t);
Tensor3 read_tensor(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_labels(const std::filesystem::path& path);

/// CRC32 over a byte range, exposed for dataset checksums.
std::uint32_t checksum(std::span<const std::uint8_t> bytes);
std::uint32_t checksum_update(std::uint32_t crc, std::span<const std::uint8_t> bytes);

}  // namespace icnn::io
