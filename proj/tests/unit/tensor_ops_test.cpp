#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "icnn/errors.hpp"
#include "icnn/ops.hpp"
#include "test_support.hpp"

namespace icnn {
namespace {

Tensor3 ramp4x4() {
  Tensor3 t(4, 4, 1);
  std::iota(t.data().begin(), t.data().end(), 0.0);
  return t;
}

TEST(Conv2dSame, AllOnesThreeByThree) {
  Tensor3 in(3, 3, 1, 1.0);
  Tensor4 k(3, 3, 1, 1, 1.0);
  const Tensor3 out = conv2d_same(in, k, BiasVec(1));
  EXPECT_DOUBLE_EQ(out(1, 1, 0), 9.0);
  for (auto [r, c] : {std::pair{0, 0}, {0, 2}, {2, 0}, {2, 2}}) EXPECT_DOUBLE_EQ(out(r, c, 0), 4.0);
  for (auto [r, c] : {std::pair{0, 1}, {1, 0}, {1, 2}, {2, 1}}) EXPECT_DOUBLE_EQ(out(r, c, 0), 6.0);
}

TEST(Conv2dSame, BiasIsAddedPerChannel) {
  Tensor3 in(2, 2, 1);
  Tensor4 k(1, 1, 1, 2);
  const Tensor3 out = conv2d_same(in, k, BiasVec(std::vector<double>{1.5, -2.0}));
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      EXPECT_EQ(out(r, c, 0), 1.5);
      EXPECT_EQ(out(r, c, 1), -2.0);
    }
  }
}

TEST(Conv2dSame, MatchesNaiveOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 12), w = 1 + static_cast<int>(rng() % 12);
    const int c = 1 + static_cast<int>(rng() % 4), q = 1 + static_cast<int>(rng() % 4);
    const int ks = std::array{1, 3, 5}[rng() % 3];
    const auto in = test::random_tensor(h, w, c, rng);
    const auto k = test::random_kernel(ks, ks, c, q, rng);
    const auto b = test::random_bias(q, rng);
    EXPECT_LT(test::max_rel_diff(conv2d_same(in, k, b).data(),
                                 test::naive_conv2d_same(in, k, b).data()),
              1e-10);
  }
}

TEST(Conv2dSame, LargeInputUsesSeveralTiles) {
  std::mt19937_64 rng(3);
  const auto in = test::random_tensor(70, 66, 7, rng);
  const auto k = test::random_kernel(5, 5, 7, 3, rng);
  const auto b = test::random_bias(3, rng);
  EXPECT_LT(test::max_rel_diff(conv2d_same(in, k, b).data(),
                               test::naive_conv2d_same(in, k, b).data()),
            1e-10);
}

TEST(Conv2dSame, RejectsMismatchedChannels) {
  EXPECT_THROW(conv2d_same(Tensor3(3, 3, 2), Tensor4(3, 3, 1, 1), BiasVec(1)), ConfigError);
  EXPECT_THROW(conv2d_same(Tensor3(3, 3, 1), Tensor4(3, 3, 1, 2), BiasVec(1)), ConfigError);
}

TEST(Tensor4Test, EvenKernelIsConfigError) {
  EXPECT_THROW(Tensor4(2, 3, 1, 1), ConfigError);
  EXPECT_THROW(Tensor4(3, 4, 1, 1), ConfigError);
}

TEST(Conv2dSameBackward, AdjointOfForward) {
  // <conv(x), g> is linear in x and k, so the backward pass must satisfy the adjoint
  // identities exactly up to rounding.
  std::mt19937_64 rng(5);
  const auto x = test::random_tensor(9, 7, 3, rng);
  const auto k = test::random_kernel(5, 5, 3, 2, rng);
  const auto g = test::random_tensor(9, 7, 2, rng);
  const auto grads = conv2d_same_backward(x, k, g);
  const auto y = conv2d_same(x, k, BiasVec(2));
  const double lhs = std::inner_product(y.data().begin(), y.data().end(), g.data().begin(), 0.0);
  const double via_input =
      std::inner_product(x.data().begin(), x.data().end(), grads.input.data().begin(), 0.0);
  const double via_kernel =
      std::inner_product(k.data().begin(), k.data().end(), grads.kernel.data().begin(), 0.0);
  EXPECT_NEAR(lhs, via_input, 1e-10 * std::abs(lhs) + 1e-12);
  EXPECT_NEAR(lhs, via_kernel, 1e-10 * std::abs(lhs) + 1e-12);
  const double gsum0 = [&] {
    double s = 0;
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 7; ++j) s += g(i, j, 0);
    return s;
  }();
  EXPECT_NEAR(grads.bias.values[0], gsum0, 1e-12);
}

TEST(TanhMap, KnownValue) {
  const Tensor3 out = tanh_map(Tensor3(1, 1, 1, 1.0));
  EXPECT_NEAR(out(0, 0, 0), 0.761594155955765, 1e-12);
}

TEST(MeanPool2, RampOracle) {
  const Tensor3 out = mean_pool2(ramp4x4());
  ASSERT_EQ(out.height(), 2);
  ASSERT_EQ(out.width(), 2);
  EXPECT_DOUBLE_EQ(out(0, 0, 0), 2.5);
  EXPECT_DOUBLE_EQ(out(0, 1, 0), 4.5);
  EXPECT_DOUBLE_EQ(out(1, 0, 0), 10.5);
  EXPECT_DOUBLE_EQ(out(1, 1, 0), 12.5);
}

TEST(MeanPool2, OddEdgeAveragesPresentElements) {
  Tensor3 in(3, 3, 1);
  std::iota(in.data().begin(), in.data().end(), 0.0);
  const Tensor3 out = mean_pool2(in);
  ASSERT_EQ(out.height(), 2);
  EXPECT_DOUBLE_EQ(out(0, 1, 0), (2.0 + 5.0) / 2.0);
  EXPECT_DOUBLE_EQ(out(1, 0, 0), (6.0 + 7.0) / 2.0);
  EXPECT_DOUBLE_EQ(out(1, 1, 0), 8.0);
}

TEST(MaxPool2, RampOracle) {
  const Tensor3 out = max_pool2(ramp4x4());
  EXPECT_DOUBLE_EQ(out(0, 0, 0), 5);
  EXPECT_DOUBLE_EQ(out(0, 1, 0), 7);
  EXPECT_DOUBLE_EQ(out(1, 0, 0), 13);
  EXPECT_DOUBLE_EQ(out(1, 1, 0), 15);
}

TEST(MaxPool2, TiesRouteGradientToFirstElement) {
  Tensor3 in(2, 2, 1, 3.0);
  const auto res = max_pool2_indexed(in);
  ASSERT_EQ(res.argmax.size(), 1u);
  EXPECT_EQ(res.argmax[0], 0u);
  const Tensor3 g = max_pool2_backward(Tensor3(1, 1, 1, 1.0), res.argmax, 2, 2);
  EXPECT_EQ(g(0, 0, 0), 1.0);
  EXPECT_EQ(g(0, 1, 0) + g(1, 0, 0) + g(1, 1, 0), 0.0);
}

TEST(UpsampleNN2, FillsBlocks) {
  Tensor3 in(1, 2, 1);
  in(0, 0, 0) = 1;
  in(0, 1, 0) = 2;
  const Tensor3 out = upsample_nn2(in);
  ASSERT_EQ(out.height(), 2);
  ASSERT_EQ(out.width(), 4);
  EXPECT_EQ(out(1, 1, 0), 1);
  EXPECT_EQ(out(0, 2, 0), 2);
  EXPECT_EQ(out(1, 3, 0), 2);
  const Tensor3 back = upsample_nn2_backward(Tensor3(2, 4, 1, 1.0));
  EXPECT_EQ(back(0, 0, 0), 4.0);
}

TEST(Softmax, KnownValues) {
  Tensor3 in(1, 1, 3);
  in(0, 0, 0) = 1;
  in(0, 0, 1) = 2;
  in(0, 0, 2) = 3;
  const Tensor3 p = softmax_channels(in);
  EXPECT_NEAR(p(0, 0, 0), 0.09003, 5e-6);
  EXPECT_NEAR(p(0, 0, 1), 0.24473, 5e-6);
  EXPECT_NEAR(p(0, 0, 2), 0.66524, 5e-6);
}

TEST(Softmax, StableForHugeLogits) {
  Tensor3 in(1, 1, 2);
  in(0, 0, 0) = 1000.0;
  in(0, 0, 1) = 999.0;
  const Tensor3 p = softmax_channels(in);
  EXPECT_TRUE(std::isfinite(p(0, 0, 0)));
  EXPECT_NEAR(p(0, 0, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(Softmax, SingleChannelIsShapeError) {
  EXPECT_THROW(softmax_channels(Tensor3(2, 2, 1)), ShapeError);
}

TEST(ConcatSlice, RoundTrip) {
  std::mt19937_64 rng(2);
  const auto a = test::random_tensor(3, 4, 2, rng);
  const auto b = test::random_tensor(3, 4, 5, rng);
  const Tensor3 ab = concat_channels({&a, &b});
  ASSERT_EQ(ab.channels(), 7);
  EXPECT_EQ(slice_channels(ab, 0, 2), a);
  EXPECT_EQ(slice_channels(ab, 2, 5), b);
  const Tensor3 c(3, 5, 1);
  EXPECT_THROW(concat_channels({&a, &c}), ShapeError);
}

TEST(FlipHorizontal, MirrorsColumns) {
  Tensor3 in(1, 3, 1);
  std::iota(in.data().begin(), in.data().end(), 0.0);
  const Tensor3 out = flip_horizontal(in);
  EXPECT_EQ(out(0, 0, 0), 2);
  EXPECT_EQ(out(0, 2, 0), 0);
  LabelMap m(1, 2, 3, std::vector<std::uint8_t>{1, 2});
  EXPECT_EQ(flip_horizontal(m)(0, 0), 2);
}

TEST(LabelMapTest, OneHotAndValidation) {
  LabelMap m(1, 2, 3, std::vector<std::uint8_t>{2, 0});
  const Tensor3 oh = m.one_hot();
  EXPECT_EQ(oh(0, 0, 2), 1.0);
  EXPECT_EQ(oh(0, 0, 0), 0.0);
  EXPECT_EQ(oh(0, 1, 0), 1.0);
  EXPECT_THROW(LabelMap(1, 1, 2, std::vector<std::uint8_t>{2}), DataError);
}

TEST(ArgmaxLabels, FirstMaximumWins) {
  Tensor3 s(1, 1, 3, 0.5);
  EXPECT_EQ(argmax_labels(s)(0, 0), 0);
  s(0, 0, 2) = 0.9;
  EXPECT_EQ(argmax_labels(s)(0, 0), 2);
}

}  // namespace
}  // namespace icnn
