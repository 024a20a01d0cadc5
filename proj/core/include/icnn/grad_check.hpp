#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "icnn/layers.hpp"

namespace icnn {

/// Any composition of layers: `build` appends nodes to the tape starting from the input
/// leaf and returns the logits node. `params` lists every parameter set it uses.
struct DifferentiableNet {
  std::vector<ConvParams*> params;
  std::function<Tape::NodeId(Tape&, Tape::NodeId)> build;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_param_error = 0.0;
  double max_input_error = 0.0;
  std::size_t params_checked = 0;
  std::size_t inputs_checked = 0;
  std::string worst;  // human-readable location of the worst coordinate
};

/// Compares the tape's analytic gradients with central differences of the fused
/// softmax cross-entropy loss. Every parameter is perturbed, plus up to `input_samples`
/// input coordinates (all of them if the input is smaller). Relative error per coordinate
/// is |a−n| / max(|a|+|n|, 1e-8).
GradCheckResult grad_check(const DifferentiableNet& net, const Tensor3& input,
                           const LabelMap& target, double epsilon,
                           std::size_t input_samples = 200, std::uint64_t seed = 0);

/// Evaluates the loss of `net` on (input, target).
double evaluate_loss(const DifferentiableNet& net, const Tensor3& input, const LabelMap& target);

}  // namespace icnn
