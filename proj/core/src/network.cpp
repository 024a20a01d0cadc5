#include "icnn/network.hpp"

#include <cmath>
#include <random>
#include <string>

#include "icnn/errors.hpp"
#include "icnn/ops.hpp"

namespace icnn {
namespace {

void check_scale_chain(int finer_h, int finer_w, int coarser_h, int coarser_w, int column) {
  if (finer_h != 2 * coarser_h || finer_w != 2 * coarser_w) {
    throw ShapeError("interlink: column " + std::to_string(column + 1) + " is " +
                     std::to_string(coarser_h) + "x" + std::to_string(coarser_w) +
                     " but its finer neighbour is " + std::to_string(finer_h) + "x" +
                     std::to_string(finer_w));
  }
}

void check_params_layout(const ICNNConfig& config, const ICNNParams& params) {
  if (static_cast<int>(params.rounds.size()) != config.interlink_rounds ||
      static_cast<int>(params.integration.size()) != config.num_columns - 1) {
    throw ConfigError("parameters do not match the network configuration");
  }
  for (const auto& round : params.rounds) {
    if (static_cast<int>(round.size()) != config.num_columns) {
      throw ConfigError("parameters do not match the network configuration");
    }
  }
}

}  // namespace

ICNNConfig ICNNConfig::make(int num_labels, int input_size, int maps, int rounds, int columns) {
  ICNNConfig c;
  c.num_columns = columns;
  c.num_labels = num_labels;
  c.interlink_rounds = rounds;
  c.maps_per_column.assign(static_cast<std::size_t>(std::max(rounds, 0)),
                           std::vector<int>(static_cast<std::size_t>(std::max(columns, 0)), maps));
  c.input_height = input_size;
  c.input_width = input_size;
  return c;
}

void ICNNConfig::validate() const {
  if (num_columns < 2) throw ConfigError("num_columns must be >= 2");
  if (num_labels < 2 || num_labels > 255) throw ConfigError("num_labels must be in [2, 255]");
  if (interlink_rounds < 1) throw ConfigError("interlink_rounds must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("kernel_size must be odd");
  if (final_kernel_size < 1 || final_kernel_size % 2 == 0) {
    throw ConfigError("final_kernel_size must be odd");
  }
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
  const int div = 1 << (num_columns - 1);
  if (input_height < 1 || input_width < 1 || input_height % div != 0 || input_width % div != 0) {
    throw ConfigError("input size " + std::to_string(input_height) + "x" +
                      std::to_string(input_width) + " must be divisible by " +
                      std::to_string(div));
  }
  if (static_cast<int>(maps_per_column.size()) != interlink_rounds) {
    throw ConfigError("maps_per_column must have one row per interlinking round");
  }
  for (const auto& row : maps_per_column) {
    if (static_cast<int>(row.size()) != num_columns) {
      throw ConfigError("maps_per_column rows must have one entry per column");
    }
    for (int m : row) {
      if (m < 1) throw ConfigError("maps_per_column entries must be >= 1");
    }
  }
}

int ICNNConfig::interlink_in_channels(int round, int column) const {
  auto prev = [&](int k) { return round == 0 ? input_channels : maps(round - 1, k); };
  int c = prev(column);
  if (column > 0) c += prev(column - 1);
  if (column + 1 < num_columns) c += prev(column + 1);
  return c;
}

int ICNNConfig::integration_in_channels(int column) const {
  const int last = interlink_rounds - 1;
  return maps(last, column) + maps(last, column + 1);
}

void ICNNParams::for_each(const std::function<void(ConvParams&)>& fn) {
  const std::size_t columns = rounds.empty() ? 0 : rounds.front().size();
  for (std::size_t k = 0; k < columns; ++k) {
    for (auto& round : rounds) fn(round[k]);
  }
  for (auto& p : integration) fn(p);
  fn(final_layer);
}

void ICNNParams::for_each(const std::function<void(const ConvParams&)>& fn) const {
  const_cast<ICNNParams*>(this)->for_each([&](ConvParams& p) { fn(p); });
}

std::size_t ICNNParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const ConvParams& p) { n += p.kernel.size() + p.bias.size(); });
  return n;
}

ICNNParams ICNNParams::zeros_like() const {
  ICNNParams z = *this;
  z.for_each([](ConvParams& p) {
    for (double& v : p.kernel.data()) v = 0.0;
    for (double& v : p.bias.values) v = 0.0;
  });
  return z;
}

std::vector<Tensor3> build_pyramid(const Tensor3& input, int levels) {
  if (levels < 1) throw ConfigError("build_pyramid: levels must be >= 1");
  const int div = 1 << (levels - 1);
  if (input.height() % div != 0 || input.width() % div != 0) {
    throw ShapeError("build_pyramid: " + std::to_string(input.height()) + "x" +
                     std::to_string(input.width()) + " is not divisible by " +
                     std::to_string(div));
  }
  std::vector<Tensor3> out;
  out.reserve(static_cast<std::size_t>(levels));
  out.push_back(input);
  for (int k = 1; k < levels; ++k) out.push_back(mean_pool2(out.back()));
  return out;
}

std::vector<Tensor3> interlink_round(const std::vector<Tensor3>& features,
                                     std::span<const ConvParams> params) {
  const int columns = static_cast<int>(features.size());
  if (static_cast<int>(params.size()) != columns) {
    throw ConfigError("interlink_round: one parameter set per column required");
  }
  for (int k = 1; k < columns; ++k) {
    check_scale_chain(features[k - 1].height(), features[k - 1].width(), features[k].height(),
                      features[k].width(), k);
  }
  std::vector<Tensor3> out;
  out.reserve(features.size());
  for (int k = 0; k < columns; ++k) {
    Tensor3 down, up;
    std::vector<const Tensor3*> parts;
    if (k > 0) {
      down = max_pool2(features[k - 1]);
      parts.push_back(&down);
    }
    parts.push_back(&features[k]);
    if (k + 1 < columns) {
      up = upsample_nn2(features[k + 1]);
      parts.push_back(&up);
    }
    out.push_back(tanh_map(conv2d_same(concat_channels(parts), params[k].kernel, params[k].bias)));
  }
  return out;
}

Tensor3 integrate_outputs(const std::vector<Tensor3>& features,
                          std::span<const ConvParams> integration) {
  const int columns = static_cast<int>(features.size());
  if (columns < 1 || static_cast<int>(integration.size()) != columns - 1) {
    throw ConfigError("integrate_outputs: need one integration layer per merge step");
  }
  Tensor3 current = features.back();
  for (int s = 0; s + 1 < columns; ++s) {
    const int col = columns - 2 - s;
    Tensor3 up = upsample_nn2(current);
    if (!(up.height() == features[col].height() && up.width() == features[col].width())) {
      throw ShapeError("integrate_outputs: column " + std::to_string(col + 2) +
                       " does not upsample onto column " + std::to_string(col + 1));
    }
    const ConvParams& p = integration[static_cast<std::size_t>(s)];
    current = tanh_map(conv2d_same(concat_channels({&features[col], &up}), p.kernel, p.bias));
  }
  return current;
}

Tensor3 icnn_logits(const ICNNConfig& config, const ICNNParams& params, const Tensor3& image) {
  check_params_layout(config, params);
  if (image.channels() != config.input_channels) {
    throw ShapeError("icnn: image has " + std::to_string(image.channels()) +
                     " channels, network expects " + std::to_string(config.input_channels));
  }
  auto features = build_pyramid(image, config.num_columns);
  for (const auto& round : params.rounds) features = interlink_round(features, round);
  Tensor3 merged = integrate_outputs(features, params.integration);
  return conv2d_same(merged, params.final_layer.kernel, params.final_layer.bias);
}

Tensor3 icnn_forward(const ICNNConfig& config, const ICNNParams& params, const Tensor3& image) {
  return softmax_channels(icnn_logits(config, params, image));
}

ICNNParams init_params(const ICNNConfig& config, std::uint64_t seed) {
  config.validate();
  const int ks = config.kernel_size;
  const int k_cols = config.num_columns;
  ICNNParams p;
  p.rounds.resize(static_cast<std::size_t>(config.interlink_rounds));
  for (int r = 0; r < config.interlink_rounds; ++r) {
    for (int k = 0; k < k_cols; ++k) {
      p.rounds[r].emplace_back(ks, ks, config.interlink_in_channels(r, k), config.maps(r, k));
    }
  }
  for (int s = 0; s + 1 < k_cols; ++s) {
    const int col = k_cols - 2 - s;
    p.integration.emplace_back(ks, ks, config.integration_in_channels(col),
                               config.maps(config.interlink_rounds - 1, col));
  }
  p.final_layer = ConvParams(config.final_kernel_size, config.final_kernel_size,
                             config.maps(config.interlink_rounds - 1, 0), config.num_labels);

  std::mt19937_64 rng(seed);
  p.for_each([&](ConvParams& cp) {
    const double area = static_cast<double>(cp.kernel.kh()) * cp.kernel.kw();
    const double fan_in = area * cp.kernel.in_channels();
    const double fan_out = area * cp.kernel.out_channels();
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-s, s);
    for (double& v : cp.kernel.data()) v = dist(rng);
  });
  return p;
}

std::vector<Tape::NodeId> build_pyramid(Tape& tape, Tape::NodeId input, int levels) {
  const Tensor3& img = tape.value(input);
  const int div = 1 << (levels - 1);
  if (levels < 1 || img.height() % div != 0 || img.width() % div != 0) {
    throw ShapeError("build_pyramid: input not divisible by " + std::to_string(div));
  }
  std::vector<Tape::NodeId> out{input};
  for (int k = 1; k < levels; ++k) out.push_back(tape.apply(Layer::mean_pool2(), {out.back()}));
  return out;
}

std::vector<Tape::NodeId> interlink_round(Tape& tape, std::span<const Tape::NodeId> features,
                                          std::span<const ConvParams> params) {
  const int columns = static_cast<int>(features.size());
  if (static_cast<int>(params.size()) != columns) {
    throw ConfigError("interlink_round: one parameter set per column required");
  }
  for (int k = 1; k < columns; ++k) {
    const Tensor3& f = tape.value(features[k - 1]);
    const Tensor3& c = tape.value(features[k]);
    check_scale_chain(f.height(), f.width(), c.height(), c.width(), k);
  }
  std::vector<Tape::NodeId> out;
  for (int k = 0; k < columns; ++k) {
    std::vector<Tape::NodeId> parts;
    if (k > 0) parts.push_back(tape.apply(Layer::max_pool2(), {features[k - 1]}));
    parts.push_back(features[k]);
    if (k + 1 < columns) parts.push_back(tape.apply(Layer::upsample_nn2(), {features[k + 1]}));
    const auto cat = tape.apply(Layer::concat_channels(), parts);
    out.push_back(tape.apply(Layer::conv_tanh(params[k]), {cat}));
  }
  return out;
}

Tape::NodeId integrate_outputs(Tape& tape, std::span<const Tape::NodeId> features,
                               std::span<const ConvParams> integration) {
  const int columns = static_cast<int>(features.size());
  if (columns < 1 || static_cast<int>(integration.size()) != columns - 1) {
    throw ConfigError("integrate_outputs: need one integration layer per merge step");
  }
  Tape::NodeId current = features.back();
  for (int s = 0; s + 1 < columns; ++s) {
    const int col = columns - 2 - s;
    const auto up = tape.apply(Layer::upsample_nn2(), {current});
    const auto cat = tape.apply(Layer::concat_channels(), {features[col], up});
    current = tape.apply(Layer::conv_tanh(integration[static_cast<std::size_t>(s)]), {cat});
  }
  return current;
}

Tape::NodeId build_icnn(Tape& tape, const ICNNConfig& config, const ICNNParams& params,
                        Tape::NodeId image) {
  check_params_layout(config, params);
  if (tape.value(image).channels() != config.input_channels) {
    throw ShapeError("icnn: image channel count does not match the network");
  }
  auto features = build_pyramid(tape, image, config.num_columns);
  for (const auto& round : params.rounds) features = interlink_round(tape, features, round);
  const auto merged = integrate_outputs(tape, features, params.integration);
  return tape.apply(Layer::conv_linear(params.final_layer), {merged});
}

ExampleGradient compute_gradient(const ICNNConfig& config, const ICNNParams& params,
                                 const Tensor3& image, const LabelMap& target) {
  Tape tape;
  const auto x = tape.leaf(image);
  const auto logits = build_icnn(tape, config, params, x);
  const auto out = tape.apply(Layer::softmax_xent(target), {logits});
  ExampleGradient eg;
  eg.loss = tape.layer(out).loss();
  tape.backward(out, Tensor3(1, 1, 1, 1.0));
  eg.grads = params.zeros_like();
  // Walk both structures in lockstep; params and grads share the canonical order.
  std::vector<const ConvParams*> order;
  params.for_each([&](const ConvParams& p) { order.push_back(&p); });
  std::size_t i = 0;
  eg.grads.for_each([&](ConvParams& g) {
    if (const ConvParams* pg = tape.param_grad(*order[i++])) g = *pg;
  });
  return eg;
}

void validate_params(const ICNNConfig& config, const ICNNParams& params) {
  config.validate();
  check_params_layout(config, params);
  const ICNNParams expected = init_params(config, 0);
  std::vector<const ConvParams*> want;
  expected.for_each([&](const ConvParams& p) { want.push_back(&p); });
  std::size_t i = 0;
  params.for_each([&](const ConvParams& p) {
    const ConvParams& w = *want[i++];
    if (!p.kernel.same_shape(w.kernel) || p.bias.size() != w.bias.size()) {
      throw ConfigError("parameter set " + std::to_string(i - 1) +
                        " does not match the network configuration");
    }
  });
}

DifferentiableNet differentiable(const ICNNConfig& config, ICNNParams& params) {
  DifferentiableNet net;
  params.for_each([&net](ConvParams& p) { net.params.push_back(&p); });
  net.build = [config, &params](Tape& tape, Tape::NodeId x) {
    return build_icnn(tape, config, params, x);
  };
  return net;
}

}  // namespace icnn
