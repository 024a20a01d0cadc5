#pragma once

// Numeric kernels shared by every layer. All functions are pure.

#include <cstdint>
#include <span>
#include <vector>

#include "icnn/tensor.hpp"

namespace icnn {

/// Zero-padded "same" convolution: out(i,j,q) = Σ_{u,v,c} w(u,v,c,q)·in(i+u-P1/2, j+v-P2/2, c) + b(q).
Tensor3 conv2d_same(const Tensor3& input, const Tensor4& kernel, const BiasVec& bias);

struct ConvGrads {
  Tensor3 input;
  Tensor4 kernel;
  BiasVec bias;
};

/// Gradients of a scalar loss through conv2d_same given dLoss/dOutput.
ConvGrads conv2d_same_backward(const Tensor3& input, const Tensor4& kernel,
                               const Tensor3& grad_out);

Tensor3 tanh_map(const Tensor3& input);

/// 2×2 non-overlapping mean; partial windows at odd edges average what is present.
Tensor3 mean_pool2(const Tensor3& input);
Tensor3 mean_pool2_backward(const Tensor3& grad_out, int in_height, int in_width);

struct MaxPoolResult {
  Tensor3 output;
  // Flat input index of the selected element for every output element.
  std::vector<std::uint32_t> argmax;
};

/// 2×2 non-overlapping max. Ties resolve to the first element in row-major order.
Tensor3 max_pool2(const Tensor3& input);
MaxPoolResult max_pool2_indexed(const Tensor3& input);
Tensor3 max_pool2_backward(const Tensor3& grad_out, std::span<const std::uint32_t> argmax,
                           int in_height, int in_width);

/// Nearest-neighbour 2× upsampling: every element fills a 2×2 block.
Tensor3 upsample_nn2(const Tensor3& input);
Tensor3 upsample_nn2_backward(const Tensor3& grad_out);

Tensor3 concat_channels(std::span<const Tensor3* const> parts);
Tensor3 concat_channels(std::initializer_list<const Tensor3*> parts);
Tensor3 slice_channels(const Tensor3& input, int begin, int count);

/// Per-pixel softmax over channels, max-subtracted.
Tensor3 softmax_channels(const Tensor3& logits);

Tensor3 flip_horizontal(const Tensor3& input);
LabelMap flip_horizontal(const LabelMap& labels);

}  // namespace icnn
