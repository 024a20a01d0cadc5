#include <cstdio>
#include <functional>
#include <memory>
#include <ostream>
#include <random>

#include "icnn/app/commands.hpp"
#include "icnn/network.hpp"

namespace icnn::app {
namespace {

using Owned = std::vector<std::shared_ptr<ConvParams>>;

std::shared_ptr<ConvParams> random_conv(int k, int in, int out, std::mt19937_64& rng) {
  auto p = std::make_shared<ConvParams>(k, k, in, out);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (double& v : p->kernel.data()) v = u(rng);
  for (double& v : p->bias.values) v = u(rng);
  return p;
}

Tensor3 random_input(int h, int w, int c, std::mt19937_64& rng) {
  Tensor3 t(h, w, c);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : t.data()) v = u(rng);
  return t;
}

LabelMap random_target(int h, int w, int labels, std::mt19937_64& rng) {
  LabelMap m(h, w, labels);
  std::uniform_int_distribution<int> u(0, labels - 1);
  for (auto& v : m.data()) v = static_cast<std::uint8_t>(u(rng));
  return m;
}

struct Case {
  std::string name;
  int in_h, in_w, in_c, out_h, out_w, labels;
  std::function<DifferentiableNet(std::mt19937_64&, Owned&)> make;
};

DifferentiableNet single(LayerKind kind, std::mt19937_64& rng, Owned& own) {
  switch (kind) {
    case LayerKind::ConvTanh: {
      auto p = random_conv(3, 2, 3, rng);
      auto q = random_conv(1, 3, 3, rng);
      own = {p, q};
      return {{p.get(), q.get()}, [p, q](Tape& t, Tape::NodeId x) {
                return t.apply(Layer::conv_linear(*q), {t.apply(Layer::conv_tanh(*p), {x})});
              }};
    }
    case LayerKind::ConvLinear: {
      auto p = random_conv(5, 2, 3, rng);
      own = {p};
      return {{p.get()}, [p](Tape& t, Tape::NodeId x) {
                return t.apply(Layer::conv_linear(*p), {x});
              }};
    }
    case LayerKind::MeanPool2:
      return {{}, [](Tape& t, Tape::NodeId x) { return t.apply(Layer::mean_pool2(), {x}); }};
    case LayerKind::MaxPool2:
      return {{}, [](Tape& t, Tape::NodeId x) { return t.apply(Layer::max_pool2(), {x}); }};
    case LayerKind::UpsampleNN2:
      return {{}, [](Tape& t, Tape::NodeId x) { return t.apply(Layer::upsample_nn2(), {x}); }};
    case LayerKind::ConcatChannels: {
      auto a = random_conv(3, 2, 2, rng);
      auto b = random_conv(1, 2, 1, rng);
      own = {a, b};
      return {{a.get(), b.get()}, [a, b](Tape& t, Tape::NodeId x) {
                auto u = t.apply(Layer::conv_tanh(*a), {x});
                auto v = t.apply(Layer::conv_linear(*b), {x});
                return t.apply(Layer::concat_channels(), {u, v});
              }};
    }
    case LayerKind::FlipH: {
      auto p = random_conv(3, 2, 3, rng);
      own = {p};
      return {{p.get()}, [p](Tape& t, Tape::NodeId x) {
                return t.apply(Layer::conv_linear(*p), {t.apply(Layer::flip_h(), {x})});
              }};
    }
    case LayerKind::SoftmaxXent:
      return {{}, [](Tape&, Tape::NodeId x) { return x; }};
  }
  return {};
}

std::vector<Case> cases() {
  auto layer = [](LayerKind k) {
    return [k](std::mt19937_64& rng, Owned& own) { return single(k, rng, own); };
  };
  auto reduced = [](int labels) {
    return [labels](std::mt19937_64& rng, Owned&) -> DifferentiableNet {
      auto net_cfg = std::make_shared<ICNNConfig>(ICNNConfig::make(labels, 16, 2));
      net_cfg->kernel_size = 3;
      net_cfg->final_kernel_size = 3;
      auto params = std::make_shared<ICNNParams>(init_params(*net_cfg, rng()));
      // Non-zero biases so their gradients are exercised too.
      std::uniform_real_distribution<double> u(-0.2, 0.2);
      params->for_each([&](ConvParams& p) {
        for (double& v : p.bias.values) v = u(rng);
      });
      DifferentiableNet net = differentiable(*net_cfg, *params);
      // Keep config and params alive inside the builder.
      auto build = net.build;
      net.build = [net_cfg, params, build](Tape& t, Tape::NodeId x) { return build(t, x); };
      return net;
    };
  };
  return {
      {"ConvTanh", 8, 8, 2, 8, 8, 3, layer(LayerKind::ConvTanh)},
      {"ConvLinear", 7, 6, 2, 7, 6, 3, layer(LayerKind::ConvLinear)},
      {"MeanPool2", 7, 8, 3, 4, 4, 3, layer(LayerKind::MeanPool2)},
      {"MaxPool2", 8, 7, 3, 4, 4, 3, layer(LayerKind::MaxPool2)},
      {"UpsampleNN2", 3, 4, 2, 6, 8, 2, layer(LayerKind::UpsampleNN2)},
      {"ConcatChannels", 6, 6, 2, 6, 6, 3, layer(LayerKind::ConcatChannels)},
      {"FlipH", 5, 6, 2, 5, 6, 3, layer(LayerKind::FlipH)},
      {"SoftmaxXent", 4, 4, 4, 4, 4, 4, layer(LayerKind::SoftmaxXent)},
      {"pooling-only", 4, 4, 2, 4, 4, 2,
       [](std::mt19937_64&, Owned&) {
         return DifferentiableNet{{}, [](Tape& t, Tape::NodeId x) {
                                    auto m = t.apply(Layer::max_pool2(), {x});
                                    return t.apply(Layer::upsample_nn2(), {m});
                                  }};
       }},
      {"icnn-reduced", 16, 16, 3, 16, 16, 3, reduced(3)},
      {"icnn-reduced-nose", 16, 16, 3, 16, 16, 2, reduced(2)},
  };
}

}  // namespace

GradCheckSummary cmd_gradcheck(const RunConfig& cfg, std::ostream& out, double corrupt_backward) {
  cfg.validate();
  struct Guard {
    explicit Guard(double f) { testing::set_backward_corruption(f); }
    ~Guard() { testing::set_backward_corruption(0.0); }
  } guard(corrupt_backward);

  GradCheckSummary summary;
  summary.pass = true;
  std::uint64_t k = 0;
  char line[256];
  std::snprintf(line, sizeof line, "%-18s %14s %8s %8s  %s\n", "case", "max_rel_error", "params",
                "inputs", "status");
  out << line;
  for (const Case& c : cases()) {
    std::mt19937_64 rng(cfg.seed * 1000003ULL + k++);
    Owned owned;
    const DifferentiableNet net = c.make(rng, owned);
    const Tensor3 x = random_input(c.in_h, c.in_w, c.in_c, rng);
    const LabelMap y = random_target(c.out_h, c.out_w, c.labels, rng);
    GradCheckCase gc{c.name, grad_check(net, x, y, cfg.gradcheck_epsilon, 200, rng()), false};
    gc.pass = gc.result.max_rel_error < cfg.gradcheck_tolerance;
    summary.pass = summary.pass && gc.pass;
    std::snprintf(line, sizeof line, "%-18s %14.3e %8zu %8zu  %s\n", c.name.c_str(),
                  gc.result.max_rel_error, gc.result.params_checked, gc.result.inputs_checked,
                  gc.pass ? "ok" : "FAIL");
    out << line;
    if (!gc.pass) out << "  worst: " << gc.result.worst << "\n";
    summary.cases.push_back(std::move(gc));
  }
  out << "gradcheck: " << (summary.pass ? "PASS" : "FAIL") << " (epsilon "
      << cfg.gradcheck_epsilon << ", tolerance " << cfg.gradcheck_tolerance << ")\n";
  return summary;
}

}  // namespace icnn::app
