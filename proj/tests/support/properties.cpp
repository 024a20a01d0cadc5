#include "properties.hpp"

#include <cmath>
#include <random>

#include "icnn/checkpoint.hpp"
#include "icnn/ops.hpp"
#include "test_support.hpp"

namespace icnn::test {
namespace {

int draw(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::string at(int r, int c, int k) {
  return "(" + std::to_string(r) + "," + std::to_string(c) + "," + std::to_string(k) + ")";
}

// Relative error with an exact-zero case.
double rel(double a, double b) { return a == b ? 0.0 : std::abs(a - b) / std::abs(a); }

}  // namespace

std::optional<std::string> softmax_sums_to_one(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double scale = std::pow(10.0, draw(rng, 0, 3));
  const Tensor3 x = random_tensor(draw(rng, 1, 12), draw(rng, 1, 12), draw(rng, 2, 9), rng,
                                  -scale, scale);
  const Tensor3 p = softmax_channels(x);
  for (int r = 0; r < p.height(); ++r) {
    for (int c = 0; c < p.width(); ++c) {
      double sum = 0.0;
      for (int k = 0; k < p.channels(); ++k) {
        if (!(p(r, c, k) >= 0.0)) return "negative probability at " + at(r, c, k);
        sum += p(r, c, k);
      }
      if (std::abs(sum - 1.0) > 1e-12) return "sum " + std::to_string(sum) + " at " + at(r, c, 0);
    }
  }
  return std::nullopt;
}

std::optional<std::string> maxpool_inverts_upsample(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor3 x = random_tensor(draw(rng, 1, 16), draw(rng, 1, 16), draw(rng, 1, 6), rng);
  if (max_pool2(upsample_nn2(x)) != x) return std::string("max_pool2(upsample(x)) != x");
  return std::nullopt;
}

std::optional<std::string> conv_preserves_shape(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int k = 2 * draw(rng, 0, 4) + 1;
  const int in = draw(rng, 1, 5);
  const int out = draw(rng, 1, 5);
  const Tensor3 x = random_tensor(draw(rng, 1, 20), draw(rng, 1, 20), in, rng);
  const Tensor3 y = conv2d_same(x, random_kernel(k, k, in, out, rng), random_bias(out, rng));
  if (y.height() != x.height() || y.width() != x.width() || y.channels() != out) {
    return "k=" + std::to_string(k) + " maps " + std::to_string(x.height()) + "x" +
           std::to_string(x.width()) + " to " + std::to_string(y.height()) + "x" +
           std::to_string(y.width());
  }
  return std::nullopt;
}

std::optional<std::string> flip_is_involution(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int h = draw(rng, 1, 16), w = draw(rng, 1, 16);
  const Tensor3 x = random_tensor(h, w, draw(rng, 1, 4), rng);
  if (flip_horizontal(flip_horizontal(x)) != x) return std::string("tensor flip twice differs");
  const LabelMap l = random_labels(h, w, 9, rng);
  if (flip_horizontal(flip_horizontal(l)) != l) return std::string("label flip twice differs");
  return std::nullopt;
}

std::optional<std::string> checkpoint_round_trip(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int columns = draw(rng, 2, 4);
  const int size = 1 << columns;
  ICNNConfig cfg = ICNNConfig::make(draw(rng, 2, 9), size * draw(rng, 1, 2), draw(rng, 1, 4),
                                    draw(rng, 1, 3), columns);
  cfg.kernel_size = 2 * draw(rng, 0, 2) + 1;
  cfg.final_kernel_size = 2 * draw(rng, 0, 3) + 1;
  ICNNParams params = init_params(cfg, rng());
  params.for_each([&](ConvParams& p) { p.bias = random_bias(static_cast<int>(p.bias.size()), rng); });
  const CheckpointMeta meta{{"seed", std::to_string(seed)}};
  const Checkpoint back = decode_checkpoint(encode_checkpoint(cfg, params, meta));
  if (!(back.config == cfg)) return std::string("config differs");
  if (back.meta != meta) return std::string("meta differs");
  std::vector<const ConvParams*> a, b;
  params.for_each([&](const ConvParams& p) { a.push_back(&p); });
  back.params.for_each([&](const ConvParams& p) { b.push_back(&p); });
  if (a.size() != b.size()) return std::string("layer count differs");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i]->kernel.same_shape(b[i]->kernel) || a[i]->bias.size() != b[i]->bias.size()) {
      return "layer " + std::to_string(i) + " shape differs";
    }
    for (std::size_t j = 0; j < a[i]->kernel.size(); ++j) {
      const double d = rel(a[i]->kernel.data()[j], b[i]->kernel.data()[j]);
      if (d > 1e-6) return "layer " + std::to_string(i) + " kernel error " + std::to_string(d);
    }
    for (std::size_t j = 0; j < a[i]->bias.size(); ++j) {
      const double d = rel(a[i]->bias.values[j], b[i]->bias.values[j]);
      if (d > 1e-6) return "layer " + std::to_string(i) + " bias error " + std::to_string(d);
    }
  }
  return std::nullopt;
}

const std::vector<Property>& all_properties() {
  static const std::vector<Property> props = {
      {"softmax sums to one", softmax_sums_to_one},
      {"max_pool2 inverts upsample", maxpool_inverts_upsample},
      {"same conv preserves spatial shape", conv_preserves_shape},
      {"horizontal flip is an involution", flip_is_involution},
      {"checkpoint round trip within 1e-6 relative", checkpoint_round_trip},
  };
  return props;
}

}  // namespace icnn::test
