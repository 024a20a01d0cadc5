#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "icnn/errors.hpp"
#include "icnn/ops.hpp"
#include "icnn/pipeline.hpp"
#include "icnn/synth.hpp"
#include "test_support.hpp"

namespace icnn {
namespace {

PartModel random_part_model(PartNetwork net, std::uint64_t seed) {
  const auto cfg = ICNNConfig::make(network_num_labels(net), network_patch_size(net), 2);
  return {Model{cfg, init_params(cfg, seed)}, ModulationParams{}};
}

TEST(Descriptors, Table) {
  EXPECT_EQ(descriptor(PartId::Mouth).patch_size, 80);
  EXPECT_EQ(descriptor(PartId::Mouth).num_labels, 4);
  EXPECT_EQ(descriptor(PartId::Mouth).label_classes, (std::vector<int>{6, 7, 8}));
  EXPECT_TRUE(descriptor(PartId::RightEyebrow).flip);
  EXPECT_TRUE(descriptor(PartId::RightEye).flip);
  EXPECT_FALSE(descriptor(PartId::LeftEye).flip);
  EXPECT_FALSE(descriptor(PartId::Nose).flip);
  EXPECT_EQ(descriptor(PartId::RightEye).network, PartNetwork::Eye);
  EXPECT_EQ(descriptor(PartId::RightEye).label_classes, (std::vector<int>{kRightEye}));
  for (PartNetwork n : kAllNetworks) EXPECT_EQ(parse_network(network_name(n)), n);
  EXPECT_THROW(parse_network("ear"), ConfigError);
}

TEST(Modulation, IdentityAndOnlyBackgroundChannel) {
  std::mt19937_64 rng(1);
  const auto logits = test::random_tensor(4, 4, 3, rng);
  EXPECT_EQ(apply_modulation(logits, ModulationParams{}), logits);
  const auto m = apply_modulation(logits, {2.0, -1.0});
  EXPECT_DOUBLE_EQ(m(1, 2, 0), 2.0 * logits(1, 2, 0) - 1.0);
  EXPECT_EQ(m(1, 2, 1), logits(1, 2, 1));
  EXPECT_EQ(m(1, 2, 2), logits(1, 2, 2));
}

TEST(PredictPart, HugeBackgroundOffsetGivesAllBackground) {
  std::mt19937_64 rng(2);
  auto net = random_part_model(PartNetwork::Nose, 3);
  net.modulation.beta0 = 1e6;
  const auto img = test::random_tensor(128, 128, 3, rng);
  const auto pred = predict_part(net, PartId::Nose, img, {60, 60});
  for (auto v : pred.labels.data()) ASSERT_EQ(v, kBackground);
}

TEST(PredictPart, LabelsUseFullPalette) {
  std::mt19937_64 rng(3);
  auto net = random_part_model(PartNetwork::Mouth, 4);
  // Bias the final layer so every mouth label appears somewhere.
  net.model.params.final_layer.bias.values = {-50.0, 0.0, 0.0, 0.0};
  const auto pred = predict_part(net, PartId::Mouth, test::random_tensor(128, 128, 3, rng), {64, 64});
  EXPECT_EQ(pred.labels.height(), 80);
  EXPECT_EQ(pred.labels.num_classes(), kNumFaceClasses);
  for (auto v : pred.labels.data()) ASSERT_TRUE(v == kUpperLip || v == kInnerMouth || v == kLowerLip);
  EXPECT_THROW(predict_part(net, PartId::Nose, Tensor3(128, 128, 3), {64, 64}), ConfigError);
}

TEST(PredictPart, RightPartIsExactMirrorOfLeft) {
  std::mt19937_64 rng(5);
  const auto net = random_part_model(PartNetwork::Eye, 6);
  const int w = 200;
  const auto img = test::random_tensor(150, w, 3, rng);
  const Tensor3 mirrored = flip_horizontal(img);
  const PixelCoord c{70, 60};
  const auto left = predict_part(net, PartId::LeftEye, img, c);
  // Pixel-centre mirror of an even-sized window: column x ↦ W − 1 − x, so the centre maps to W − c.
  const auto right = predict_part(net, PartId::RightEye, mirrored, {c.row, w - c.col});
  EXPECT_EQ(right.origin.row, left.origin.row);
  EXPECT_EQ(right.origin.col, w - left.origin.col - 64);
  for (int r = 0; r < 64; ++r) {
    for (int x = 0; x < 64; ++x) {
      const int l = left.labels(r, x), rr = right.labels(r, 63 - x);
      ASSERT_EQ(l == kLeftEye, rr == kRightEye);
      ASSERT_EQ(left.confidence(r, x, 0), right.confidence(r, 63 - x, 0));
    }
  }
}

TEST(Assemble, UnionAndConflictRule) {
  PartPrediction a{PartId::LeftEye, {0, 0}, LabelMap(2, 2, 9, kLeftEye), Tensor3(2, 2, 1, 0.9)};
  PartPrediction b{PartId::Nose, {1, 1}, LabelMap(2, 2, 9, kNose), Tensor3(2, 2, 1, 0.6)};
  PartPrediction c{PartId::Mouth, {3, 3}, LabelMap(1, 1, 9, kBackground), Tensor3(1, 1, 1, 0.99)};
  const std::vector<PartPrediction> parts{a, b, c};
  const LabelMap m = assemble(parts, 4, 4);
  EXPECT_EQ(m(0, 0), kLeftEye);
  EXPECT_EQ(m(1, 1), kLeftEye);  // 0.9 beats 0.6
  EXPECT_EQ(m(2, 2), kNose);
  EXPECT_EQ(m(1, 2), kNose);
  EXPECT_EQ(m(3, 3), kBackground);
  EXPECT_EQ(m(0, 3), kBackground);
  std::vector<PartPrediction> swapped{b, a};
  EXPECT_EQ(assemble(swapped, 4, 4)(1, 1), kLeftEye);
  std::vector<PartPrediction> outside{PartPrediction{PartId::Nose, {3, 3}, LabelMap(2, 2, 9),
                                                     Tensor3(2, 2, 1)}};
  EXPECT_THROW(assemble(outside, 4, 4), ShapeError);
}

TEST(TrainingData, PartSampleFlipsRightSide) {
  const SynthFace f = render_face(SynthSpec{}, 1);
  const Sample full{f.image, f.labels};
  const auto centers = truth_centers(f.labels);
  ASSERT_TRUE(centers[3].has_value());
  const Sample right = part_sample(PartId::RightEye, full, *centers[3]);
  const auto [patch, origin] = extract_patch(f.image, *centers[3], 64);
  EXPECT_EQ(right.image, flip_horizontal(patch));
  EXPECT_EQ(right.labels.num_classes(), 2);
  int fg = 0;
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      const bool truth = f.labels(origin.row + r, origin.col + 63 - c) == kRightEye;
      EXPECT_EQ(right.labels(r, c) == 1, truth);
      fg += truth;
    }
  }
  EXPECT_GT(fg, 100);
  const Sample left = part_sample(PartId::LeftEye, full, *centers[2]);
  EXPECT_EQ(left.image, extract_patch(f.image, *centers[2], 64).first);
}

TEST(TrainingData, MouthLabelsAndStage1) {
  const SynthFace f = render_face(SynthSpec{}, 2);
  const Sample full{f.image, f.labels};
  const auto centers = truth_centers(f.labels);
  const Sample mouth = part_sample(PartId::Mouth, full, *centers[5]);
  std::array<int, 4> hist{};
  for (auto v : mouth.labels.data()) ++hist[v];
  for (int k = 0; k < 4; ++k) EXPECT_GT(hist[k], 0);
  const Sample s1 = stage1_sample(full);
  EXPECT_EQ(s1.image.height(), 64);
  EXPECT_EQ(s1.labels.num_classes(), 9);
}

TEST(Localize, AllBackgroundFallsBack) {
  auto cfg = ICNNConfig::make(9, 64, 2);
  auto params = init_params(cfg, 1);
  for (double& v : params.final_layer.kernel.data()) v = 0.0;
  params.final_layer.bias.values[0] = 10.0;
  PartCenters fb{};
  for (std::size_t i = 0; i < fb.size(); ++i) fb[i] = {static_cast<int>(10 * i), 7};
  const Localization loc = localize(Model{cfg, params}, Tensor3(256, 256, 3, 0.5), fb);
  EXPECT_TRUE(loc.any_fallback());
  for (std::size_t i = 0; i < fb.size(); ++i) {
    EXPECT_TRUE(loc.used_fallback[i]);
    EXPECT_EQ(loc.centers[i], fb[i]);
  }
  auto wrong = ICNNConfig::make(4, 64, 2);
  EXPECT_THROW(localize(Model{wrong, init_params(wrong, 1)}, Tensor3(256, 256, 3), fb), ConfigError);
}

TEST(Localize, CentersMapBackThroughScale) {
  auto cfg = ICNNConfig::make(9, 64, 2);
  auto params = init_params(cfg, 1);
  for (double& v : params.final_layer.kernel.data()) v = 0.0;
  // Nose everywhere: the median of a full 64×64 grid is (31, 31) → original (125.5 → 126).
  params.final_layer.bias.values[kNose] = 10.0;
  const Localization loc = localize(Model{cfg, params}, Tensor3(256, 256, 3), PartCenters{});
  EXPECT_FALSE(loc.used_fallback[4]);
  EXPECT_EQ(loc.centers[4], (PixelCoord{126, 126}));
  EXPECT_TRUE(loc.used_fallback[0]);
}

TEST(FaceParserTest, RequiresAllNetworks) {
  const auto cfg = ICNNConfig::make(9, 64, 2);
  PartModels parts;
  parts.emplace(PartNetwork::Eye, random_part_model(PartNetwork::Eye, 1));
  EXPECT_THROW(FaceParser(Model{cfg, init_params(cfg, 1)}, PartCenters{}, parts), ConfigError);
}

TEST(FaceParserTest, ParseProducesPaletteMap) {
  const auto cfg = ICNNConfig::make(9, 64, 2);
  PartModels parts;
  for (PartNetwork n : kAllNetworks) parts.emplace(n, random_part_model(n, 7));
  PartCenters fb{};
  const auto truth = render_face(SynthSpec{}, 0);
  for (std::size_t i = 0; i < fb.size(); ++i) fb[i] = truth.medians[i];
  const FaceParser parser(Model{cfg, init_params(cfg, 2)}, fb, parts);
  const ParseResult r = parser.parse(truth.image);
  EXPECT_EQ(r.labels.height(), 256);
  EXPECT_EQ(r.labels.num_classes(), 9);
  EXPECT_EQ(r.parts.size(), 6u);
  EXPECT_EQ(parser.parse(truth.image).labels, r.labels);
}

TEST(Calibration, RecoversConstructedBias) {
  const auto samples = test::biased_calibration_samples(1.0, 11);
  const auto res = calibrate_modulation(samples);
  EXPECT_EQ(res.f_before, 0.0);
  EXPECT_DOUBLE_EQ(res.f_after, 1.0);
  EXPECT_NEAR(res.params.beta0, -1.0, 0.05);
  EXPECT_NEAR(res.params.beta, 1.0, 1e-12);
  EXPECT_EQ(res.coarse_evaluations, 17 * 25);
  EXPECT_EQ(res.refine_evaluations, 11 * 11);
}

TEST(Calibration, NeverWorseAndDeterministic) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<CalibrationSample> samples;
    for (int n = 0; n < 2; ++n) {
      samples.push_back({test::random_tensor(8, 8, 4, rng, -2, 2), test::random_labels(8, 8, 4, rng)});
    }
    const auto a = calibrate_modulation(samples);
    EXPECT_GE(a.f_after, a.f_before);
    EXPECT_EQ(a.f_after, modulation_f_measure(samples, a.params));
    const auto b = calibrate_modulation(samples);
    EXPECT_EQ(a.params, b.params);
  }
  EXPECT_THROW(calibrate_modulation(std::span<const CalibrationSample>{}), ConfigError);
}

TEST(Calibration, NetworkOverloadMatchesLogits) {
  std::mt19937_64 rng(13);
  const auto net = random_part_model(PartNetwork::Eye, 14);
  std::vector<Sample> val;
  for (int i = 0; i < 2; ++i) val.push_back({test::random_tensor(64, 64, 3, rng), test::random_labels(64, 64, 2, rng)});
  std::vector<CalibrationSample> cs;
  for (const auto& s : val) {
    cs.push_back({icnn_logits(net.model.config, net.model.params, normalize_image(s.image)), s.labels});
  }
  EXPECT_EQ(calibrate_modulation(net.model, val).params, calibrate_modulation(cs).params);
}

TEST(Meta, FallbackAndModulationRoundTrip) {
  CheckpointMeta meta;
  PartCenters c{};
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = {static_cast<int>(i * 3), static_cast<int>(200 - i)};
  store_fallback(meta, c);
  EXPECT_EQ(load_fallback(meta), c);
  const ModulationParams m{std::exp2(-0.35), -1.0 + 0.1};
  store_modulation(meta, m);
  EXPECT_EQ(load_modulation(meta), m);
  EXPECT_EQ(load_modulation(CheckpointMeta{}), ModulationParams{});
  meta["modulation.beta"] = "nan";
  EXPECT_THROW(load_modulation(meta), ConfigError);
  EXPECT_THROW(load_fallback(CheckpointMeta{}), ConfigError);
}

}  // namespace
}  // namespace icnn
