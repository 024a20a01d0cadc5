#include "icnn/layers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "icnn/errors.hpp"
#include "icnn/ops.hpp"

namespace icnn {
namespace {

std::atomic<double> g_backward_corruption{0.0};

void expect_inputs(LayerKind kind, std::size_t got, std::size_t want) {
  if (got != want) {
    throw ShapeError(std::string(to_string(kind)) + ": expected " + std::to_string(want) +
                     " input(s), got " + std::to_string(got));
  }
}

}  // namespace

namespace testing {
void set_backward_corruption(double factor) { g_backward_corruption.store(factor); }
double backward_corruption() { return g_backward_corruption.load(); }
}  // namespace testing

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::ConvTanh: return "ConvTanh";
    case LayerKind::ConvLinear: return "ConvLinear";
    case LayerKind::MeanPool2: return "MeanPool2";
    case LayerKind::MaxPool2: return "MaxPool2";
    case LayerKind::UpsampleNN2: return "UpsampleNN2";
    case LayerKind::ConcatChannels: return "ConcatChannels";
    case LayerKind::SoftmaxXent: return "SoftmaxXent";
    case LayerKind::FlipH: return "FlipH";
  }
  return "?";
}

Layer Layer::conv_tanh(const ConvParams& params) { return Layer(LayerKind::ConvTanh, &params); }
Layer Layer::conv_linear(const ConvParams& params) {
  return Layer(LayerKind::ConvLinear, &params);
}
Layer Layer::mean_pool2() { return Layer(LayerKind::MeanPool2); }
Layer Layer::max_pool2() { return Layer(LayerKind::MaxPool2); }
Layer Layer::upsample_nn2() { return Layer(LayerKind::UpsampleNN2); }
Layer Layer::concat_channels() { return Layer(LayerKind::ConcatChannels); }
Layer Layer::flip_h() { return Layer(LayerKind::FlipH); }
Layer Layer::softmax_xent(LabelMap target) {
  Layer l(LayerKind::SoftmaxXent);
  l.target_ = std::move(target);
  return l;
}

Tensor3 Layer::forward(const Tensor3& input) {
  const Tensor3* p = &input;
  return forward(std::span<const Tensor3* const>(&p, 1));
}

Tensor3 Layer::forward(std::span<const Tensor3* const> inputs) {
  inputs_.clear();
  argmax_.clear();
  Tensor3 out;
  switch (kind_) {
    case LayerKind::ConvTanh:
    case LayerKind::ConvLinear: {
      expect_inputs(kind_, inputs.size(), 1);
      out = conv2d_same(*inputs[0], params_->kernel, params_->bias);
      if (kind_ == LayerKind::ConvTanh) {
        for (double& v : out.data()) v = std::tanh(v);
        output_ = out;
      }
      inputs_.push_back(*inputs[0]);
      break;
    }
    case LayerKind::MeanPool2:
      expect_inputs(kind_, inputs.size(), 1);
      out = icnn::mean_pool2(*inputs[0]);
      inputs_.emplace_back(inputs[0]->height(), inputs[0]->width(), 1);
      break;
    case LayerKind::MaxPool2: {
      expect_inputs(kind_, inputs.size(), 1);
      auto res = max_pool2_indexed(*inputs[0]);
      out = std::move(res.output);
      argmax_ = std::move(res.argmax);
      inputs_.emplace_back(inputs[0]->height(), inputs[0]->width(), 1);
      break;
    }
    case LayerKind::UpsampleNN2:
      expect_inputs(kind_, inputs.size(), 1);
      out = icnn::upsample_nn2(*inputs[0]);
      break;
    case LayerKind::ConcatChannels:
      out = icnn::concat_channels(inputs);
      // Only the channel split is needed to slice the gradient back.
      for (const Tensor3* p : inputs) inputs_.emplace_back(1, 1, p->channels());
      break;
    case LayerKind::FlipH:
      expect_inputs(kind_, inputs.size(), 1);
      out = flip_horizontal(*inputs[0]);
      break;
    case LayerKind::SoftmaxXent:
      expect_inputs(kind_, inputs.size(), 1);
      if (inputs[0]->height() != target_->height() || inputs[0]->width() != target_->width()) {
        throw ShapeError("SoftmaxXent: logits and target dims differ");
      }
      if (inputs[0]->channels() != target_->num_classes()) {
        throw ShapeError("SoftmaxXent: logits have " + std::to_string(inputs[0]->channels()) +
                         " channels but target has " +
                         std::to_string(target_->num_classes()) + " classes");
      }
      out = softmax_channels(*inputs[0]);
      loss_ = cross_entropy_loss(out, *target_);
      output_ = out;
      break;
  }
  cached_ = true;
  return out;
}

LayerGrads Layer::backward(const Tensor3& grad_out) {
  if (!cached_) {
    throw StateError(std::string(to_string(kind_)) + ": backward called before forward");
  }
  LayerGrads g;
  switch (kind_) {
    case LayerKind::ConvTanh:
    case LayerKind::ConvLinear: {
      Tensor3 pre_grad = grad_out;
      if (kind_ == LayerKind::ConvTanh) {
        if (!pre_grad.same_shape(output_)) throw ShapeError("ConvTanh: grad_out shape mismatch");
        auto y = output_.data();
        auto d = pre_grad.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - y[i] * y[i];
      }
      ConvGrads cg = conv2d_same_backward(inputs_[0], params_->kernel, pre_grad);
      if (const double f = testing::backward_corruption(); f != 0.0) {
        for (double& v : cg.kernel.data()) v *= 1.0 + f;
      }
      g.inputs.push_back(std::move(cg.input));
      g.params = ConvParams{};
      g.params->kernel = std::move(cg.kernel);
      g.params->bias = std::move(cg.bias);
      break;
    }
    case LayerKind::MeanPool2:
      g.inputs.push_back(
          mean_pool2_backward(grad_out, inputs_[0].height(), inputs_[0].width()));
      break;
    case LayerKind::MaxPool2:
      g.inputs.push_back(
          max_pool2_backward(grad_out, argmax_, inputs_[0].height(), inputs_[0].width()));
      break;
    case LayerKind::UpsampleNN2:
      g.inputs.push_back(upsample_nn2_backward(grad_out));
      break;
    case LayerKind::ConcatChannels: {
      int offset = 0;
      for (const Tensor3& shape : inputs_) {
        g.inputs.push_back(slice_channels(grad_out, offset, shape.channels()));
        offset += shape.channels();
      }
      if (offset != grad_out.channels()) {
        throw ShapeError("ConcatChannels: grad_out channel count mismatch");
      }
      break;
    }
    case LayerKind::FlipH:
      g.inputs.push_back(flip_horizontal(grad_out));
      break;
    case LayerKind::SoftmaxXent: {
      if (grad_out.size() != 1) {
        throw ShapeError("SoftmaxXent: backward expects a 1x1x1 upstream gradient");
      }
      const double scale =
          grad_out.data()[0] / (static_cast<double>(output_.height()) * output_.width());
      Tensor3 d = output_;
      const int l = d.channels();
      auto dd = d.data();
      auto t = target_->data();
      for (std::size_t px = 0; px < t.size(); ++px) {
        dd[px * l + t[px]] -= 1.0;
        for (int k = 0; k < l; ++k) dd[px * l + k] *= scale;
      }
      g.inputs.push_back(std::move(d));
      break;
    }
  }
  cached_ = false;
  inputs_.clear();
  output_ = Tensor3();
  argmax_.clear();
  return g;
}

double Layer::loss() const {
  if (kind_ != LayerKind::SoftmaxXent) throw StateError("loss() is only defined for SoftmaxXent");
  return loss_;
}

double cross_entropy_loss(const Tensor3& probs, const LabelMap& target) {
  if (probs.height() != target.height() || probs.width() != target.width()) {
    throw ShapeError("cross_entropy_loss: dims differ");
  }
  const int l = probs.channels();
  auto p = probs.data();
  auto t = target.data();
  double sum = 0.0;
  for (std::size_t px = 0; px < t.size(); ++px) {
    if (t[px] >= l) {
      throw DataError("cross_entropy_loss: class " + std::to_string(t[px]) + " >= L=" +
                      std::to_string(l));
    }
    sum -= std::log(std::max(p[px * l + t[px]], 1e-12));
  }
  return sum / static_cast<double>(t.size());
}

Tape::NodeId Tape::leaf(Tensor3 value) {
  nodes_.push_back(Node{std::nullopt, {}, std::move(value), {}});
  return nodes_.size() - 1;
}

Tape::NodeId Tape::apply(Layer layer, std::initializer_list<NodeId> inputs) {
  return apply(std::move(layer), std::span<const NodeId>(inputs.begin(), inputs.size()));
}

Tape::NodeId Tape::apply(Layer layer, std::span<const NodeId> inputs) {
  std::vector<const Tensor3*> values;
  values.reserve(inputs.size());
  for (NodeId id : inputs) values.push_back(&nodes_.at(id).value);
  Tensor3 out = layer.forward(values);
  nodes_.push_back(
      Node{std::move(layer), std::vector<NodeId>(inputs.begin(), inputs.end()), std::move(out), {}});
  return nodes_.size() - 1;
}

const Layer& Tape::layer(NodeId id) const {
  const auto& n = nodes_.at(id);
  if (!n.layer) throw StateError("tape node is a leaf");
  return *n.layer;
}

void Tape::backward(NodeId root, const Tensor3& seed) {
  if (root >= nodes_.size()) throw StateError("backward: unknown root node");
  nodes_[root].grad = seed;
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.layer || n.grad.empty()) continue;
    LayerGrads g = n.layer->backward(n.grad);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      Tensor3& dst = nodes_[n.inputs[k]].grad;
      if (dst.empty()) {
        dst = std::move(g.inputs[k]);
      } else {
        dst += g.inputs[k];
      }
    }
    if (g.params) {
      const ConvParams* key = n.layer->params();
      auto it = std::find_if(param_grads_.begin(), param_grads_.end(),
                             [key](const auto& e) { return e.first == key; });
      if (it == param_grads_.end()) {
        param_grads_.emplace_back(key, std::move(*g.params));
      } else {
        auto dst = it->second.kernel.data();
        auto src = g.params->kernel.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        for (std::size_t k = 0; k < it->second.bias.size(); ++k) {
          it->second.bias.values[k] += g.params->bias.values[k];
        }
      }
    }
  }
}

const ConvParams* Tape::param_grad(const ConvParams& params) const {
  for (const auto& [key, grad] : param_grads_) {
    if (key == &params) return &grad;
  }
  return nullptr;
}

}  // namespace icnn
