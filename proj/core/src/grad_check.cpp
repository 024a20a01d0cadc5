#include "icnn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "icnn/errors.hpp"

namespace icnn {
namespace {

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
}

double checked_loss(const DifferentiableNet& net, const Tensor3& input, const LabelMap& target) {
  const double loss = evaluate_loss(net, input, target);
  if (!std::isfinite(loss)) throw NumericError("grad_check: non-finite loss");
  return loss;
}

}  // namespace

double evaluate_loss(const DifferentiableNet& net, const Tensor3& input, const LabelMap& target) {
  Tape tape;
  const auto x = tape.leaf(input);
  const auto logits = net.build(tape, x);
  const auto out = tape.apply(Layer::softmax_xent(target), {logits});
  return tape.layer(out).loss();
}

GradCheckResult grad_check(const DifferentiableNet& net, const Tensor3& input,
                           const LabelMap& target, double epsilon, std::size_t input_samples,
                           std::uint64_t seed) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw ConfigError("grad_check: epsilon must lie in [1e-7, 1e-3]");
  }

  Tape tape;
  const auto x = tape.leaf(input);
  const auto logits = net.build(tape, x);
  const auto out = tape.apply(Layer::softmax_xent(target), {logits});
  if (!std::isfinite(tape.layer(out).loss())) throw NumericError("grad_check: non-finite loss");
  tape.backward(out, Tensor3(1, 1, 1, 1.0));

  GradCheckResult res;
  auto record = [&](double analytic, double numeric, bool is_param, const std::string& where) {
    const double e = rel_error(analytic, numeric);
    if (is_param) {
      res.max_param_error = std::max(res.max_param_error, e);
      ++res.params_checked;
    } else {
      res.max_input_error = std::max(res.max_input_error, e);
      ++res.inputs_checked;
    }
    if (e > res.max_rel_error || (res.worst.empty())) {
      res.max_rel_error = std::max(res.max_rel_error, e);
      std::ostringstream os;
      os << where << " analytic=" << analytic << " numeric=" << numeric;
      res.worst = os.str();
    }
  };

  auto central = [&](double& slot, const Tensor3& in) {
    const double saved = slot;
    slot = saved + epsilon;
    const double plus = checked_loss(net, in, target);
    slot = saved - epsilon;
    const double minus = checked_loss(net, in, target);
    slot = saved;
    return (plus - minus) / (2.0 * epsilon);
  };

  for (std::size_t pi = 0; pi < net.params.size(); ++pi) {
    ConvParams& p = *net.params[pi];
    const ConvParams* g = tape.param_grad(p);
    auto kd = p.kernel.data();
    for (std::size_t i = 0; i < kd.size(); ++i) {
      const double analytic = g ? g->kernel.data()[i] : 0.0;
      const double numeric = central(kd[i], input);
      record(analytic, numeric, true,
             "param " + std::to_string(pi) + " kernel[" + std::to_string(i) + "]");
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i) {
      const double analytic = g ? g->bias.values[i] : 0.0;
      const double numeric = central(p.bias.values[i], input);
      record(analytic, numeric, true,
             "param " + std::to_string(pi) + " bias[" + std::to_string(i) + "]");
    }
  }

  std::vector<std::size_t> coords(input.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (coords.size() > input_samples) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(input_samples);
    std::sort(coords.begin(), coords.end());
  }
  const Tensor3& gin = tape.grad(x);
  Tensor3 perturbed = input;
  for (std::size_t i : coords) {
    const double analytic = gin.empty() ? 0.0 : gin.data()[i];
    const double numeric = central(perturbed.data()[i], perturbed);
    record(analytic, numeric, false, "input[" + std::to_string(i) + "]");
  }
  return res;
}

}  // namespace icnn
