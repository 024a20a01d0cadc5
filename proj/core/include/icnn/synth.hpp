#pragma once

// Deterministic synthetic faces: a skin ellipse on a plain background with two eyebrow
// bars, two eye ellipses, a nose triangle and a three-band mouth, labelled in the
// nine-class face palette. Stands in for a real face-parsing benchmark at desk scale.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "icnn/geometry.hpp"
#include "icnn/palette.hpp"
#include "icnn/tensor.hpp"

namespace icnn {

struct SynthSpec {
  std::uint64_t seed = 7;
  int count = 100;       // total faces
  int val_count = 0;     // taken after the training faces
  int test_count = 0;    // taken last
  int image_size = 256;  // only 256 is supported
  double face_jitter = 12.0;    // px, global face offset
  double part_jitter = 4.0;     // px, per-part offset
  double size_jitter = 0.15;    // relative part size change
  double brow_rotation = 10.0;  // degrees
  double color_jitter = 0.04;   // per-image, per-channel colour offset
  double noise = 0.03;          // per-pixel uniform noise amplitude

  /// Throws ConfigError naming the offending key, including jitter ranges that would let
  /// parts overlap or leave the frame.
  void validate() const;
};

struct SynthFace {
  Tensor3 image;   // RGB in [0, 1]
  LabelMap labels;
  /// Ground-truth median point per part, indexed like kAllParts.
  std::array<PixelCoord, kAllParts.size()> medians;
};

/// Nominal RGB of each face class (background entry is the skin tone).
std::array<double, 3> class_color(int cls);

SynthFace render_face(const SynthSpec& spec, int index);

struct SynthDataset {
  std::filesystem::path manifest;
  std::filesystem::path medians;
  std::uint32_t checksum = 0;  // CRC32 over manifest, sidecar and every data file
  int count = 0;
};

/// Writes images/, labels/, manifest.txt and medians.csv under `out_dir`.
SynthDataset generate_synthetic(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace icnn
