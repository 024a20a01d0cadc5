#pragma once

// Differentiable wrappers over the tensor kernels plus a small reverse-mode tape.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "icnn/tensor.hpp"

namespace icnn {

enum class LayerKind {
  ConvTanh,
  ConvLinear,
  MeanPool2,
  MaxPool2,
  UpsampleNN2,
  ConcatChannels,
  SoftmaxXent,
  FlipH,
};

std::string_view to_string(LayerKind kind);

struct LayerGrads {
  std::vector<Tensor3> inputs;
  std::optional<ConvParams> params;
};

/// One node's operation. Convolution layers reference externally owned parameters,
/// which must outlive the layer. SoftmaxXent fuses softmax with the mean per-pixel
/// cross-entropy against its target.
class Layer {
 public:
  static Layer conv_tanh(const ConvParams& params);
  static Layer conv_linear(const ConvParams& params);
  static Layer mean_pool2();
  static Layer max_pool2();
  static Layer upsample_nn2();
  static Layer concat_channels();
  static Layer flip_h();
  static Layer softmax_xent(LabelMap target);

  LayerKind kind() const { return kind_; }
  const ConvParams* params() const { return params_; }

  /// Runs the layer and caches what backward needs.
  Tensor3 forward(std::span<const Tensor3* const> inputs);
  Tensor3 forward(const Tensor3& input);

  /// Consumes the cache. For SoftmaxXent `grad_out` is a 1×1×1 tensor holding dL/dloss.
  LayerGrads backward(const Tensor3& grad_out);

  /// Cross-entropy of the last forward (SoftmaxXent only).
  double loss() const;

 private:
  explicit Layer(LayerKind kind, const ConvParams* params = nullptr)
      : kind_(kind), params_(params) {}

  LayerKind kind_;
  const ConvParams* params_ = nullptr;
  std::optional<LabelMap> target_;

  bool cached_ = false;
  std::vector<Tensor3> inputs_;
  Tensor3 output_;
  std::vector<std::uint32_t> argmax_;
  double loss_ = 0.0;
};

/// Mean per-pixel cross-entropy of probabilities against a label map; log argument
/// clamped at 1e-12.
double cross_entropy_loss(const Tensor3& probs, const LabelMap& target);

/// Records a forward computation graph and replays it backwards. Nodes are appended in
/// topological order, so reverse creation order is a valid backward schedule.
class Tape {
 public:
  using NodeId = std::size_t;

  NodeId leaf(Tensor3 value);
  NodeId apply(Layer layer, std::initializer_list<NodeId> inputs);
  NodeId apply(Layer layer, std::span<const NodeId> inputs);

  const Tensor3& value(NodeId id) const { return nodes_.at(id).value; }
  const Layer& layer(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  /// Propagates `seed` (dL/d value(root)) to every node reachable from root.
  void backward(NodeId root, const Tensor3& seed);

  /// Accumulated gradient of a node; empty tensor when no gradient reached it.
  const Tensor3& grad(NodeId id) const { return nodes_.at(id).grad; }

  /// Accumulated gradient for a parameter set used by any conv node, or nullptr.
  const ConvParams* param_grad(const ConvParams& params) const;

 private:
  struct Node {
    std::optional<Layer> layer;
    std::vector<NodeId> inputs;
    Tensor3 value;
    Tensor3 grad;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<const ConvParams*, ConvParams>> param_grads_;
};

namespace testing {
/// Scales every conv kernel gradient by (1 + factor). Used to prove the gradient checker
/// notices a broken backward; 0 disables.
void set_backward_corruption(double factor);
double backward_corruption();
}  // namespace testing

}  // namespace icnn
