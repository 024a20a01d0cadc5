#pragma once

#include <random>
#include <utility>

#include "icnn/tensor.hpp"

namespace icnn {

struct AugmentSpec {
  double max_rotation_deg = 15.0;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double max_shift = 10.0;

  void validate() const;
};

/// Similarity transform about the image centre: p' = s·R(θ)·(p − c) + c + shift,
/// with p = (x, y) = (col, row).
struct SimilarityTransform {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double shift_x = 0.0;  // columns
  double shift_y = 0.0;  // rows

  bool is_identity() const {
    return rotation_deg == 0.0 && scale == 1.0 && shift_x == 0.0 && shift_y == 0.0;
  }
};

/// Uniform draws: θ ∈ [−max_rotation, max_rotation], s ∈ [scale_min, scale_max],
/// shift ∈ [−max_shift, max_shift]².
SimilarityTransform draw_transform(const AugmentSpec& spec, std::mt19937_64& rng);

/// Applies one transform to both: images bilinearly, labels by nearest neighbour.
/// Out-of-frame pixels take the per-channel image mean and label 0.
std::pair<Tensor3, LabelMap> apply_transform(const Tensor3& image, const LabelMap& labels,
                                             const SimilarityTransform& t);

std::pair<Tensor3, LabelMap> augment(const Tensor3& image, const LabelMap& labels,
                                     const AugmentSpec& spec, std::mt19937_64& rng);

/// Subtract the scalar mean over all pixels and channels, then divide by the RMS of the
/// centred values (left unscaled when the RMS is below 1e-8).
Tensor3 normalize_image(const Tensor3& image);

/// Per-channel mean over all pixels.
std::vector<double> channel_means(const Tensor3& image);

}  // namespace icnn
