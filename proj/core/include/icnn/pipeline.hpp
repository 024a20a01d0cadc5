#pragma once

// Two-stage face parsing. Stage 1 labels a 64×64 resize of the face with the nine-class
// palette and locates each part by the median point of its pixels. Stage 2 crops a
// fixed-size patch around every part from the full-resolution image, labels it with one
// of four part networks (right-side parts are mirrored onto the left-side network) and
// pastes the results back onto a full-size canvas.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "icnn/checkpoint.hpp"
#include "icnn/geometry.hpp"
#include "icnn/network.hpp"
#include "icnn/palette.hpp"
#include "icnn/train.hpp"

namespace icnn {

inline constexpr int kStage1Size = 64;

enum class PartNetwork { Eyebrow, Eye, Nose, Mouth };
inline constexpr std::array<PartNetwork, 4> kAllNetworks = {
    PartNetwork::Eyebrow, PartNetwork::Eye, PartNetwork::Nose, PartNetwork::Mouth};

std::string_view network_name(PartNetwork net);
PartNetwork parse_network(std::string_view name);

struct PartDescriptor {
  PartId part;
  int patch_size;
  PartNetwork network;
  bool flip;
  int num_labels;
  /// Full-palette class of each non-background part label (index 0 ↔ part label 1).
  std::vector<int> label_classes;

  std::span<const int> stage1_classes() const { return part_classes(part); }
};

const PartDescriptor& descriptor(PartId part);
/// Patch size and label count of a part network.
int network_patch_size(PartNetwork net);
int network_num_labels(PartNetwork net);

struct ModulationParams {
  double beta = 1.0;
  double beta0 = 0.0;
  bool operator==(const ModulationParams&) const = default;
};

/// Replaces background channel B of pre-softmax maps with β·B + β0.
Tensor3 apply_modulation(const Tensor3& logits, const ModulationParams& m);

struct PartModel {
  Model model;
  ModulationParams modulation;
};

using PartCenters = std::array<PixelCoord, kAllParts.size()>;

struct Localization {
  PartCenters centers{};
  std::array<bool, kAllParts.size()> used_fallback{};
  LabelMap stage1_labels;
  ScaleInfo scale;

  bool any_fallback() const;
};

/// Resize → normalize → stage-1 network → argmax → per-part median point mapped back to
/// original coordinates. Parts with no pixels take `fallback` and are flagged.
Localization localize(const Model& stage1, const Tensor3& image, const PartCenters& fallback);

struct PartPrediction {
  PartId part;
  PatchOrigin origin;
  LabelMap labels;     // full palette, patch-sized
  Tensor3 confidence;  // probability of the chosen label, patch-sized, one channel
};

/// Labels one part patch: extract → normalize → (flip) → network → modulation → softmax →
/// argmax → (flip back).
PartPrediction predict_part(const PartModel& net, PartId part, const Tensor3& image,
                            PixelCoord center);

using PartModels = std::map<PartNetwork, PartModel>;

std::vector<PartPrediction> fine_label(const PartModels& nets, const Tensor3& image,
                                       const PartCenters& centers);

/// Background canvas with every patch's foreground pasted at its origin. Conflicting
/// foreground labels resolve to the higher confidence; ties keep the earlier part.
LabelMap assemble(std::span<const PartPrediction> parts, int height, int width);

// ---- training data ----

/// Stage-1 training pair: image and labels resized to 64×64.
Sample stage1_sample(const Sample& full);

/// Maps full-palette labels of a patch onto a part network's labels (foreign classes
/// become background).
LabelMap to_part_labels(const PartDescriptor& desc, const LabelMap& full_patch);

/// Stage-2 training pair for one part, mirrored when the descriptor says so.
Sample part_sample(PartId part, const Sample& full, PixelCoord center);

/// Ground-truth median of each part, from a full-resolution label map. Missing parts
/// return nullopt.
std::array<std::optional<PixelCoord>, kAllParts.size()> truth_centers(const LabelMap& labels);

// ---- modulation calibration ----

struct CalibrationSample {
  Tensor3 logits;   // pre-softmax maps of a part network
  LabelMap truth;   // part labels
};

/// Micro F over the foreground part labels after modulation.
double modulation_f_measure(std::span<const CalibrationSample> samples,
                            const ModulationParams& m);

struct CalibrationResult {
  ModulationParams params;
  double f_before = 0.0;
  double f_after = 0.0;
  int coarse_evaluations = 0;
  int refine_evaluations = 0;
};

inline constexpr int kBetaGridSize = 17;
inline constexpr int kBeta0GridSize = 25;
inline constexpr int kRefineSteps = 5;  // per side, at 1/5 of the coarse spacing

/// Coarse grid: β = 2^(−2 + i/4), i = 0..16 (0.25 to 4, log-spaced); β0 = −3 + j/4,
/// j = 0..24. Then one refinement pass of 11×11 points at 1/5 spacing around the best.
/// Only strict improvements replace the incumbent, which starts at (1, 0).
CalibrationResult calibrate_modulation(std::span<const CalibrationSample> validation);

/// Runs the network over normalized validation patches first.
CalibrationResult calibrate_modulation(const Model& part_net, std::span<const Sample> validation);

// ---- full parser ----

struct ParseResult {
  LabelMap labels;
  Localization localization;
  std::vector<PartPrediction> parts;
};

class FaceParser {
 public:
  FaceParser(Model stage1, PartCenters fallback, PartModels parts);

  ParseResult parse(const Tensor3& image) const;

  const Model& stage1() const { return stage1_; }
  const PartModels& parts() const { return parts_; }
  const PartCenters& fallback() const { return fallback_; }

 private:
  Model stage1_;
  PartCenters fallback_;
  PartModels parts_;
};

// Checkpoint meta helpers.
void store_fallback(CheckpointMeta& meta, const PartCenters& centers);
PartCenters load_fallback(const CheckpointMeta& meta);
void store_modulation(CheckpointMeta& meta, const ModulationParams& m);
ModulationParams load_modulation(const CheckpointMeta& meta);

}  // namespace icnn
