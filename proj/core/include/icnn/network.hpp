#pragma once

// The interlinked multi-column network: an input pyramid feeding K parallel columns that
// exchange feature maps every round, a coarse-to-fine output merge, a linear
// convolution to L maps and a per-pixel softmax.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "icnn/grad_check.hpp"
#include "icnn/layers.hpp"
#include "icnn/tensor.hpp"

namespace icnn {

struct ICNNConfig {
  int num_columns = 4;
  int num_labels = 9;
  int interlink_rounds = 3;
  /// maps[round][column]: output channels of that column's convolution in that round.
  std::vector<std::vector<int>> maps_per_column;
  int kernel_size = 5;
  int final_kernel_size = 9;
  int input_channels = 3;
  int input_height = 64;
  int input_width = 64;

  /// Uniform width across every column and round.
  static ICNNConfig make(int num_labels, int input_size, int maps = 8, int rounds = 3,
                         int columns = 4);

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  int maps(int round, int column) const { return maps_per_column.at(round).at(column); }
  /// Channels entering column `column`'s convolution in round `round`.
  int interlink_in_channels(int round, int column) const;
  /// Channels entering the integration convolution that merges `column`+1 into `column`.
  int integration_in_channels(int column) const;

  bool operator==(const ICNNConfig&) const = default;
};

struct ICNNParams {
  /// rounds[r][k]: convolution of column k in interlinking round r.
  std::vector<std::vector<ConvParams>> rounds;
  /// integration[s]: step s merges column K-1-s into column K-2-s (0-based columns),
  /// i.e. the steps run k = K..2 in 1-based terms.
  std::vector<ConvParams> integration;
  ConvParams final_layer;

  bool operator==(const ICNNParams&) const = default;

  /// Visits every parameter set in canonical order: column-major over (column, round),
  /// then integration steps, then the final layer. Checkpoints and initialization use
  /// this order.
  void for_each(const std::function<void(ConvParams&)>& fn);
  void for_each(const std::function<void(const ConvParams&)>& fn) const;
  std::size_t parameter_count() const;

  /// Same structure with every value zeroed.
  ICNNParams zeros_like() const;
};

struct Model {
  ICNNConfig config;
  ICNNParams params;
};

/// Element 0 is the input; element k is mean_pool2 applied k times.
std::vector<Tensor3> build_pyramid(const Tensor3& input, int levels);

/// One interlinking round: per column concat(maxpool(finer), own, upsample(coarser))
/// followed by ConvTanh.
std::vector<Tensor3> interlink_round(const std::vector<Tensor3>& features,
                                     std::span<const ConvParams> params);

/// Coarse-to-fine merge of the column outputs; returns column 1's integrated maps.
Tensor3 integrate_outputs(const std::vector<Tensor3>& features,
                          std::span<const ConvParams> integration);

/// Pre-softmax maps (the final linear convolution).
Tensor3 icnn_logits(const ICNNConfig& config, const ICNNParams& params, const Tensor3& image);
/// Per-pixel class probabilities.
Tensor3 icnn_forward(const ICNNConfig& config, const ICNNParams& params, const Tensor3& image);

/// Throws ConfigError unless every parameter set has the shape `config` implies.
void validate_params(const ICNNConfig& config, const ICNNParams& params);

/// Glorot-uniform kernels, zero biases; deterministic in `seed`.
ICNNParams init_params(const ICNNConfig& config, std::uint64_t seed);

// Graph-building variants used for training and gradient checks.
std::vector<Tape::NodeId> build_pyramid(Tape& tape, Tape::NodeId input, int levels);
std::vector<Tape::NodeId> interlink_round(Tape& tape, std::span<const Tape::NodeId> features,
                                          std::span<const ConvParams> params);
Tape::NodeId integrate_outputs(Tape& tape, std::span<const Tape::NodeId> features,
                               std::span<const ConvParams> integration);
/// Appends the full network to the tape and returns the logits node.
Tape::NodeId build_icnn(Tape& tape, const ICNNConfig& config, const ICNNParams& params,
                        Tape::NodeId image);

/// Wraps a network for grad_check. `params` must outlive the result.
DifferentiableNet differentiable(const ICNNConfig& config, ICNNParams& params);

struct ExampleGradient {
  double loss = 0.0;
  ICNNParams grads;
};

/// Loss and parameter gradients of one (already normalized) example.
ExampleGradient compute_gradient(const ICNNConfig& config, const ICNNParams& params,
                                 const Tensor3& image, const LabelMap& target);

}  // namespace icnn
