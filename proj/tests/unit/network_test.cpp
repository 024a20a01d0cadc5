#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "icnn/errors.hpp"
#include "icnn/grad_check.hpp"
#include "icnn/network.hpp"
#include "icnn/ops.hpp"
#include "test_support.hpp"

namespace icnn {
namespace {

TEST(Pyramid, SixtyFourHasFourLevels) {
  const auto p = build_pyramid(Tensor3(64, 64, 3), 4);
  ASSERT_EQ(p.size(), 4u);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(p[k].height(), 64 >> k);
    EXPECT_EQ(p[k].width(), 64 >> k);
    EXPECT_EQ(p[k].channels(), 3);
  }
}

TEST(Pyramid, EightyHasFourLevels) {
  const auto p = build_pyramid(Tensor3(80, 80, 3), 4);
  EXPECT_EQ(p[1].height(), 40);
  EXPECT_EQ(p[2].height(), 20);
  EXPECT_EQ(p[3].height(), 10);
}

TEST(Pyramid, IndivisibleSizeIsShapeError) {
  EXPECT_THROW(build_pyramid(Tensor3(60, 60, 3), 4), ShapeError);
}

TEST(ICNNConfigTest, InterlinkChannelArithmetic) {
  const auto cfg = ICNNConfig::make(9, 64);
  EXPECT_EQ(cfg.interlink_in_channels(1, 0), 16);
  EXPECT_EQ(cfg.interlink_in_channels(1, 1), 24);
  EXPECT_EQ(cfg.interlink_in_channels(1, 2), 24);
  EXPECT_EQ(cfg.interlink_in_channels(1, 3), 16);
  EXPECT_EQ(cfg.interlink_in_channels(0, 0), 6);
  EXPECT_EQ(cfg.interlink_in_channels(0, 1), 9);
  EXPECT_EQ(cfg.integration_in_channels(2), 16);
}

TEST(ICNNConfigTest, ValidateRejectsBadValues) {
  auto cfg = ICNNConfig::make(9, 64);
  cfg.validate();
  auto bad = cfg;
  bad.kernel_size = 4;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.num_labels = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.input_height = 62;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.maps_per_column[1].pop_back();
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.maps_per_column[2][0] = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(InterlinkRound, OutputWidthsFollowConfig) {
  std::mt19937_64 rng(1);
  auto cfg = ICNNConfig::make(3, 16, 2);
  cfg.maps_per_column[0] = {2, 3, 4, 5};
  const auto params = init_params(cfg, 3);
  const auto pyr = build_pyramid(test::random_tensor(16, 16, 3, rng), 4);
  const auto out = interlink_round(pyr, params.rounds[0]);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(out[k].channels(), cfg.maps(0, k));
    EXPECT_EQ(out[k].height(), 16 >> k);
  }
}

TEST(Integration, ProducesFullResolutionStack) {
  std::mt19937_64 rng(2);
  const auto cfg = ICNNConfig::make(9, 64);
  const auto params = init_params(cfg, 1);
  std::vector<Tensor3> feats;
  for (int k = 0; k < 4; ++k) feats.push_back(test::random_tensor(64 >> k, 64 >> k, 8, rng));
  const Tensor3 merged = integrate_outputs(feats, params.integration);
  EXPECT_EQ(merged.height(), 64);
  EXPECT_EQ(merged.width(), 64);
  EXPECT_EQ(merged.channels(), 8);
}

TEST(Integration, CoarsestColumnReceivesGradient) {
  std::mt19937_64 rng(3);
  const auto cfg = ICNNConfig::make(3, 16, 2);
  const auto params = init_params(cfg, 5);
  Tape tape;
  std::vector<Tape::NodeId> feats;
  for (int k = 0; k < 4; ++k) feats.push_back(tape.leaf(test::random_tensor(16 >> k, 16 >> k, 2, rng)));
  const auto merged = integrate_outputs(tape, feats, params.integration);
  tape.backward(merged, Tensor3(16, 16, 2, 1.0));
  const Tensor3& g = tape.grad(feats[3]);
  ASSERT_FALSE(g.empty());
  double norm = 0.0;
  for (double v : g.data()) norm += v * v;
  EXPECT_GT(norm, 0.0);
}

TEST(Forward, OutputShapesAndProbabilities) {
  std::mt19937_64 rng(4);
  const auto cfg9 = ICNNConfig::make(9, 64);
  const Tensor3 p9 = icnn_forward(cfg9, init_params(cfg9, 1), test::random_tensor(64, 64, 3, rng));
  EXPECT_EQ(p9.height(), 64);
  EXPECT_EQ(p9.channels(), 9);
  for (int i = 0; i < 64; i += 7) {
    double s = 0.0;
    for (int c = 0; c < 9; ++c) s += p9(i, i, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  const auto cfg4 = ICNNConfig::make(4, 80);
  const Tensor3 p4 = icnn_forward(cfg4, init_params(cfg4, 1), test::random_tensor(80, 80, 3, rng));
  EXPECT_EQ(p4.height(), 80);
  EXPECT_EQ(p4.width(), 80);
  EXPECT_EQ(p4.channels(), 4);
}

TEST(Forward, WrongImageShapeIsRejected) {
  const auto cfg = ICNNConfig::make(3, 16, 2);
  const auto params = init_params(cfg, 1);
  EXPECT_THROW(icnn_forward(cfg, params, Tensor3(16, 16, 1)), ShapeError);
}

TEST(InitParams, DeterministicInSeed) {
  const auto cfg = ICNNConfig::make(3, 16, 2);
  EXPECT_EQ(init_params(cfg, 7), init_params(cfg, 7));
  EXPECT_NE(init_params(cfg, 7), init_params(cfg, 8));
}

TEST(InitParams, GlorotBoundsAndZeroBias) {
  const auto cfg = ICNNConfig::make(9, 64);
  const auto params = init_params(cfg, 11);
  params.for_each([](const ConvParams& p) {
    const double area = p.kernel.kh() * p.kernel.kw();
    const double s =
        std::sqrt(6.0 / (area * p.kernel.in_channels() + area * p.kernel.out_channels()));
    for (double v : p.kernel.data()) {
      ASSERT_LE(std::abs(v), s);
    }
    for (double b : p.bias.values) ASSERT_EQ(b, 0.0);
  });
}

TEST(InitParams, KernelMeanWithinThreeSigma) {
  const auto cfg = ICNNConfig::make(9, 64);
  const auto params = init_params(cfg, 12);
  const ConvParams& p = params.final_layer;  // 9·9·8·9 = 5832 draws
  const ConvParams& q = params.rounds[1][1];  // 5·5·24·8 = 4800 draws
  for (const ConvParams* c : {&p, &q}) {
    const double area = c->kernel.kh() * c->kernel.kw();
    const double s =
        std::sqrt(6.0 / (area * c->kernel.in_channels() + area * c->kernel.out_channels()));
    const auto d = c->kernel.data();
    ASSERT_GE(d.size(), 4800u);
    double sum = 0.0;
    for (double v : d) sum += v;
    const double mean = sum / static_cast<double>(d.size());
    const double sigma = s / std::sqrt(3.0) / std::sqrt(static_cast<double>(d.size()));
    EXPECT_LT(std::abs(mean), 3.0 * sigma);
  }
}

TEST(Params, CountAndCanonicalOrder) {
  const auto cfg = ICNNConfig::make(9, 64);
  const auto params = init_params(cfg, 1);
  std::size_t expected = 0;
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 4; ++k) expected += 25 * cfg.interlink_in_channels(r, k) * 8 + 8;
  }
  for (int k = 0; k < 3; ++k) expected += 25 * 16 * 8 + 8;
  expected += 81 * 8 * 9 + 9;
  EXPECT_EQ(params.parameter_count(), expected);

  std::vector<const ConvParams*> order;
  params.for_each([&](const ConvParams& p) { order.push_back(&p); });
  ASSERT_EQ(order.size(), 16u);
  EXPECT_EQ(order[0], &params.rounds[0][0]);
  EXPECT_EQ(order[1], &params.rounds[1][0]);
  EXPECT_EQ(order[3], &params.rounds[0][1]);
  EXPECT_EQ(order[12], &params.integration[0]);
  EXPECT_EQ(order[15], &params.final_layer);
}

TEST(GradCheckICNN, ReducedFullNetwork) {
  std::mt19937_64 rng(21);
  const auto cfg = ICNNConfig::make(3, 16, 2);
  auto params = init_params(cfg, 21);
  const auto r = grad_check(differentiable(cfg, params), test::random_tensor(16, 16, 3, rng),
                            test::random_labels(16, 16, 3, rng), 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_EQ(r.params_checked, params.parameter_count());
}

TEST(ComputeGradient, MatchesTape) {
  std::mt19937_64 rng(6);
  const auto cfg = ICNNConfig::make(2, 16, 2);
  auto params = init_params(cfg, 6);
  const Tensor3 x = test::random_tensor(16, 16, 3, rng);
  const LabelMap y = test::random_labels(16, 16, 2, rng);
  const auto eg = compute_gradient(cfg, params, x, y);
  EXPECT_NEAR(eg.loss, evaluate_loss(differentiable(cfg, params), x, y), 1e-12);
  // Perturb along the gradient: loss must decrease for a small step.
  auto stepped = params;
  std::vector<ConvParams*> dst;
  stepped.for_each([&](ConvParams& p) { dst.push_back(&p); });
  std::size_t i = 0;
  eg.grads.for_each([&](const ConvParams& g) {
    auto d = dst[i++]->kernel.data();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] -= 1e-3 * g.kernel.data()[k];
  });
  EXPECT_LT(compute_gradient(cfg, stepped, x, y).loss, eg.loss);
}

}  // namespace
}  // namespace icnn
