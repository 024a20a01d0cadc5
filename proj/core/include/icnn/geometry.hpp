#pragma once

// Image geometry used by the two-stage parser: aspect-preserving resize with an exact
// inverse coordinate map, median points of labelled regions, and clamped patch crops.

#include <optional>
#include <span>
#include <utility>

#include "icnn/tensor.hpp"

namespace icnn {

struct PixelCoord {
  int row = 0;
  int col = 0;
  bool operator==(const PixelCoord&) const = default;
};

struct PointF {
  double row = 0.0;
  double col = 0.0;
};

/// Maps between original and resized pixel-centre coordinates.
struct ScaleInfo {
  double scale = 1.0;  // resized / original
  int pad_row = 0;
  int pad_col = 0;
  int source_height = 0;
  int source_width = 0;

  PointF to_resized(PointF p) const;
  PointF to_original(PointF q) const;
  /// Rounded and clamped into the source frame.
  PixelCoord to_original_pixel(PixelCoord q) const;
};

/// Bilinear resize so the long side equals `target`; the short side is centred and padded
/// with the per-channel mean.
std::pair<Tensor3, ScaleInfo> resize_to(const Tensor3& image, int target);
/// Nearest-neighbour counterpart for label maps (padding is label 0).
LabelMap resize_labels(const LabelMap& labels, const ScaleInfo& info, int target);

/// Component-wise lower median of the coordinates of pixels whose label is in `classes`.
std::optional<PixelCoord> median_point(const LabelMap& labels, std::span<const int> classes);

struct PatchOrigin {
  int row = 0;
  int col = 0;
  bool operator==(const PatchOrigin&) const = default;
};

/// Top-left of a size×size window centred at `center`, shifted to lie inside the frame.
PatchOrigin patch_origin(int height, int width, PixelCoord center, int size);

std::pair<Tensor3, PatchOrigin> extract_patch(const Tensor3& image, PixelCoord center, int size);
LabelMap crop_labels(const LabelMap& labels, PatchOrigin origin, int size);
/// Writes `patch` into `canvas` at `origin`.
void paste_patch(Tensor3& canvas, const Tensor3& patch, PatchOrigin origin);

}  // namespace icnn
