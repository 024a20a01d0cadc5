#include "icnn/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

#include "icnn/augment.hpp"
#include "icnn/errors.hpp"
#include "icnn/metrics.hpp"
#include "icnn/ops.hpp"

namespace icnn {
namespace {

const std::array<PartDescriptor, kAllParts.size()>& descriptors() {
  static const std::array<PartDescriptor, kAllParts.size()> table = {{
      {PartId::LeftEyebrow, 64, PartNetwork::Eyebrow, false, 2, {kLeftEyebrow}},
      {PartId::RightEyebrow, 64, PartNetwork::Eyebrow, true, 2, {kRightEyebrow}},
      {PartId::LeftEye, 64, PartNetwork::Eye, false, 2, {kLeftEye}},
      {PartId::RightEye, 64, PartNetwork::Eye, true, 2, {kRightEye}},
      {PartId::Nose, 64, PartNetwork::Nose, false, 2, {kNose}},
      {PartId::Mouth, 80, PartNetwork::Mouth, false, 4, {kUpperLip, kInnerMouth, kLowerLip}},
  }};
  return table;
}

std::size_t part_index(PartId part) { return static_cast<std::size_t>(part); }

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& key) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError("checkpoint meta '" + key + "' is not a finite number: " + s);
  }
  return v;
}

// Argmax with channel 0 replaced by β·B + β0; other channels untouched.
int modulated_argmax(const double* px, int l, const ModulationParams& m) {
  double best = m.beta * px[0] + m.beta0;
  int arg = 0;
  for (int k = 1; k < l; ++k) {
    if (px[k] > best) {
      best = px[k];
      arg = k;
    }
  }
  return arg;
}

}  // namespace

std::string_view network_name(PartNetwork net) {
  switch (net) {
    case PartNetwork::Eyebrow: return "eyebrow";
    case PartNetwork::Eye: return "eye";
    case PartNetwork::Nose: return "nose";
    case PartNetwork::Mouth: return "mouth";
  }
  return "?";
}

PartNetwork parse_network(std::string_view name) {
  for (PartNetwork n : kAllNetworks) {
    if (network_name(n) == name) return n;
  }
  throw ConfigError("unknown part network '" + std::string(name) +
                    "' (expected eyebrow, eye, nose or mouth)");
}

const PartDescriptor& descriptor(PartId part) { return descriptors()[part_index(part)]; }

int network_patch_size(PartNetwork net) { return net == PartNetwork::Mouth ? 80 : 64; }
int network_num_labels(PartNetwork net) { return net == PartNetwork::Mouth ? 4 : 2; }

Tensor3 apply_modulation(const Tensor3& logits, const ModulationParams& m) {
  Tensor3 out = logits;
  const int l = out.channels();
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); i += l) d[i] = m.beta * d[i] + m.beta0;
  return out;
}

bool Localization::any_fallback() const {
  return std::any_of(used_fallback.begin(), used_fallback.end(), [](bool b) { return b; });
}

Localization localize(const Model& stage1, const Tensor3& image, const PartCenters& fallback) {
  if (stage1.config.num_labels != kNumFaceClasses) {
    throw ConfigError("stage-1 network must have " + std::to_string(kNumFaceClasses) +
                      " labels");
  }
  Localization loc;
  auto [small, scale] = resize_to(image, kStage1Size);
  loc.scale = scale;
  loc.stage1_labels = argmax_labels(icnn_forward(stage1.config, stage1.params,
                                                 normalize_image(small)));
  for (std::size_t i = 0; i < kAllParts.size(); ++i) {
    const auto m = median_point(loc.stage1_labels, part_classes(kAllParts[i]));
    if (m) {
      loc.centers[i] = scale.to_original_pixel(*m);
    } else {
      loc.centers[i] = fallback[i];
      loc.used_fallback[i] = true;
    }
  }
  return loc;
}

PartPrediction predict_part(const PartModel& net, PartId part, const Tensor3& image,
                            PixelCoord center) {
  const PartDescriptor& desc = descriptor(part);
  if (net.model.config.num_labels != desc.num_labels) {
    throw ConfigError(std::string(network_name(desc.network)) + " network must have " +
                      std::to_string(desc.num_labels) + " labels");
  }
  auto [patch, origin] = extract_patch(image, center, desc.patch_size);
  const Tensor3 input = normalize_image(desc.flip ? flip_horizontal(patch) : patch);
  Tensor3 probs = softmax_channels(
      apply_modulation(icnn_logits(net.model.config, net.model.params, input), net.modulation));
  if (desc.flip) probs = flip_horizontal(probs);

  const int size = desc.patch_size, l = probs.channels();
  PartPrediction pred{part, origin, LabelMap(size, size, kNumFaceClasses),
                      Tensor3(size, size, 1)};
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      int best = 0;
      for (int k = 1; k < l; ++k) {
        if (probs(r, c, k) > probs(r, c, best)) best = k;
      }
      pred.labels(r, c) = best == 0 ? static_cast<std::uint8_t>(kBackground)
                                    : static_cast<std::uint8_t>(desc.label_classes[best - 1]);
      pred.confidence(r, c, 0) = probs(r, c, best);
    }
  }
  return pred;
}

std::vector<PartPrediction> fine_label(const PartModels& nets, const Tensor3& image,
                                       const PartCenters& centers) {
  std::vector<PartPrediction> out;
  for (std::size_t i = 0; i < kAllParts.size(); ++i) {
    const PartDescriptor& desc = descriptor(kAllParts[i]);
    auto it = nets.find(desc.network);
    if (it == nets.end()) {
      throw ConfigError("missing " + std::string(network_name(desc.network)) + " network");
    }
    out.push_back(predict_part(it->second, kAllParts[i], image, centers[i]));
  }
  return out;
}

LabelMap assemble(std::span<const PartPrediction> parts, int height, int width) {
  LabelMap canvas(height, width, kNumFaceClasses);
  std::vector<double> conf(static_cast<std::size_t>(height) * width, 0.0);
  for (const auto& p : parts) {
    const int size = p.labels.height();
    if (p.origin.row < 0 || p.origin.col < 0 || p.origin.row + size > height ||
        p.origin.col + p.labels.width() > width) {
      throw ShapeError("assemble: patch outside the canvas");
    }
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < p.labels.width(); ++c) {
        const std::uint8_t lbl = p.labels(r, c);
        if (lbl == kBackground) continue;
        const int gr = p.origin.row + r, gc = p.origin.col + c;
        const std::size_t gi = static_cast<std::size_t>(gr) * width + gc;
        const double pc = p.confidence(r, c, 0);
        if (canvas(gr, gc) == kBackground || pc > conf[gi]) {
          canvas(gr, gc) = lbl;
          conf[gi] = pc;
        }
      }
    }
  }
  return canvas;
}

Sample stage1_sample(const Sample& full) {
  auto [img, scale] = resize_to(full.image, kStage1Size);
  return {std::move(img), resize_labels(full.labels, scale, kStage1Size)};
}

LabelMap to_part_labels(const PartDescriptor& desc, const LabelMap& full_patch) {
  LabelMap out(full_patch.height(), full_patch.width(), desc.num_labels);
  for (int r = 0; r < full_patch.height(); ++r) {
    for (int c = 0; c < full_patch.width(); ++c) {
      const int cls = full_patch(r, c);
      for (std::size_t k = 0; k < desc.label_classes.size(); ++k) {
        if (desc.label_classes[k] == cls) out(r, c) = static_cast<std::uint8_t>(k + 1);
      }
    }
  }
  return out;
}

Sample part_sample(PartId part, const Sample& full, PixelCoord center) {
  const PartDescriptor& desc = descriptor(part);
  auto [patch, origin] = extract_patch(full.image, center, desc.patch_size);
  LabelMap labels = to_part_labels(desc, crop_labels(full.labels, origin, desc.patch_size));
  if (desc.flip) return {flip_horizontal(patch), flip_horizontal(labels)};
  return {std::move(patch), std::move(labels)};
}

std::array<std::optional<PixelCoord>, kAllParts.size()> truth_centers(const LabelMap& labels) {
  std::array<std::optional<PixelCoord>, kAllParts.size()> out;
  for (std::size_t i = 0; i < kAllParts.size(); ++i) {
    out[i] = median_point(labels, part_classes(kAllParts[i]));
  }
  return out;
}

double modulation_f_measure(std::span<const CalibrationSample> samples,
                            const ModulationParams& m) {
  if (samples.empty()) throw ConfigError("calibration: empty validation set");
  const int l = samples.front().logits.channels();
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (const auto& s : samples) {
    if (s.logits.channels() != l || s.logits.height() != s.truth.height() ||
        s.logits.width() != s.truth.width()) {
      throw ShapeError("calibration: logits and truth do not match");
    }
    auto d = s.logits.data();
    auto t = s.truth.data();
    for (std::size_t px = 0; px < t.size(); ++px) {
      const int pred = modulated_argmax(d.data() + px * l, l, m);
      const int truth = t[px];
      if (pred == truth) {
        if (pred != 0) ++tp;
      } else {
        if (pred != 0) ++fp;
        if (truth != 0) ++fn;
      }
    }
  }
  const double p = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double r = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

CalibrationResult calibrate_modulation(std::span<const CalibrationSample> validation) {
  if (validation.empty()) throw ConfigError("calibration: empty validation set");
  CalibrationResult res;
  res.f_before = modulation_f_measure(validation, ModulationParams{});
  res.f_after = res.f_before;
  res.params = ModulationParams{};

  constexpr double kLogStep = 0.25;  // log2 spacing of β
  constexpr double kOffsetStep = 0.25;
  auto consider = [&](ModulationParams m) {
    const double f = modulation_f_measure(validation, m);
    if (f > res.f_after) {
      res.f_after = f;
      res.params = m;
    }
  };
  for (int i = 0; i < kBetaGridSize; ++i) {
    for (int j = 0; j < kBeta0GridSize; ++j) {
      consider({std::exp2(-2.0 + kLogStep * i), -3.0 + kOffsetStep * j});
      ++res.coarse_evaluations;
    }
  }
  const ModulationParams centre = res.params;
  const double log_centre = std::log2(centre.beta);
  for (int i = -kRefineSteps; i <= kRefineSteps; ++i) {
    for (int j = -kRefineSteps; j <= kRefineSteps; ++j) {
      consider({std::exp2(log_centre + kLogStep / kRefineSteps * i),
                centre.beta0 + kOffsetStep / kRefineSteps * j});
      ++res.refine_evaluations;
    }
  }
  return res;
}

CalibrationResult calibrate_modulation(const Model& part_net, std::span<const Sample> validation) {
  std::vector<CalibrationSample> samples;
  samples.reserve(validation.size());
  for (const auto& s : validation) {
    samples.push_back({icnn_logits(part_net.config, part_net.params, normalize_image(s.image)),
                       s.labels});
  }
  return calibrate_modulation(samples);
}

FaceParser::FaceParser(Model stage1, PartCenters fallback, PartModels parts)
    : stage1_(std::move(stage1)), fallback_(fallback), parts_(std::move(parts)) {
  for (PartNetwork n : kAllNetworks) {
    if (!parts_.count(n)) {
      throw ConfigError("missing " + std::string(network_name(n)) + " network");
    }
  }
}

ParseResult FaceParser::parse(const Tensor3& image) const {
  ParseResult res;
  res.localization = localize(stage1_, image, fallback_);
  res.parts = fine_label(parts_, image, res.localization.centers);
  res.labels = assemble(res.parts, image.height(), image.width());
  return res;
}

void store_fallback(CheckpointMeta& meta, const PartCenters& centers) {
  for (std::size_t i = 0; i < kAllParts.size(); ++i) {
    meta["fallback." + std::string(part_name(kAllParts[i]))] =
        std::to_string(centers[i].row) + "," + std::to_string(centers[i].col);
  }
}

PartCenters load_fallback(const CheckpointMeta& meta) {
  PartCenters out{};
  for (std::size_t i = 0; i < kAllParts.size(); ++i) {
    const std::string key = "fallback." + std::string(part_name(kAllParts[i]));
    auto it = meta.find(key);
    if (it == meta.end()) throw ConfigError("stage-1 checkpoint lacks meta '" + key + "'");
    int row = 0, col = 0;
    if (std::sscanf(it->second.c_str(), "%d,%d", &row, &col) != 2) {
      throw ConfigError("checkpoint meta '" + key + "' is malformed: " + it->second);
    }
    out[i] = {row, col};
  }
  return out;
}

void store_modulation(CheckpointMeta& meta, const ModulationParams& m) {
  meta["modulation.beta"] = format_double(m.beta);
  meta["modulation.beta0"] = format_double(m.beta0);
}

ModulationParams load_modulation(const CheckpointMeta& meta) {
  ModulationParams m;
  if (auto it = meta.find("modulation.beta"); it != meta.end()) {
    m.beta = parse_double(it->second, it->first);
  }
  if (auto it = meta.find("modulation.beta0"); it != meta.end()) {
    m.beta0 = parse_double(it->second, it->first);
  }
  return m;
}

}  // namespace icnn
