#include "icnn/train.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "icnn/errors.hpp"
#include "icnn/layers.hpp"
#include "icnn/parallel.hpp"

namespace icnn {
namespace {

void add_scaled(ICNNParams& dst, const ICNNParams& src, double scale) {
  std::vector<const ConvParams*> s;
  src.for_each([&](const ConvParams& p) { s.push_back(&p); });
  std::size_t i = 0;
  dst.for_each([&](ConvParams& d) {
    const ConvParams& g = *s[i++];
    auto dk = d.kernel.data();
    auto gk = g.kernel.data();
    for (std::size_t k = 0; k < dk.size(); ++k) dk[k] += scale * gk[k];
    for (std::size_t k = 0; k < d.bias.size(); ++k) d.bias.values[k] += scale * g.bias.values[k];
  });
}

std::mt19937_64 example_rng(std::uint64_t seed, int epoch, std::size_t position) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(position),
                    0x61756775u};
  return std::mt19937_64(seq);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.learning_rate must be > 0");
  }
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (max_epochs < 0) throw ConfigError("train.max_epochs must be >= 0");
  if (eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train.lr_decay must be in (0, 1]");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x7065726du};
  std::mt19937_64 rng(seq);
  // Fisher-Yates with an explicit draw so the order does not depend on std::shuffle's
  // library-specific implementation.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

double sgd_epoch(ICNNParams& params, const ICNNConfig& config, std::span<const Sample> data,
                 const TrainConfig& train, const AugmentSpec& augment_spec, int epoch) {
  if (data.empty()) throw ConfigError("sgd_epoch: empty dataset");
  train.validate();
  if (train.augment) augment_spec.validate();
  const double lr = train.learning_rate * std::pow(train.lr_decay, epoch);
  const auto order = epoch_permutation(data.size(), train.seed, epoch);

  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += train.batch_size) {
    const std::size_t count = std::min<std::size_t>(train.batch_size, order.size() - start);
    std::vector<ExampleGradient> grads(count);
    parallel_for(count, train.threads, [&](std::size_t b) {
      const std::size_t pos = start + b;
      const Sample& s = data[order[pos]];
      if (train.augment) {
        auto rng = example_rng(train.seed, epoch, pos);
        auto [img, lbl] = augment(s.image, s.labels, augment_spec, rng);
        grads[b] = compute_gradient(config, params, normalize_image(img), lbl);
      } else {
        grads[b] = compute_gradient(config, params, normalize_image(s.image), s.labels);
      }
    });
    for (std::size_t b = 0; b < count; ++b) {
      if (!std::isfinite(grads[b].loss)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << ", example " << order[start + b]
           << ": loss=" << grads[b].loss;
        throw NumericError(os.str());
      }
      loss_sum += grads[b].loss;
    }
    ICNNParams total = std::move(grads[0].grads);
    for (std::size_t b = 1; b < count; ++b) add_scaled(total, grads[b].grads, 1.0);
    add_scaled(params, total, -lr / static_cast<double>(count));
  }
  return loss_sum / static_cast<double>(data.size());
}

double dataset_loss(const ICNNConfig& config, const ICNNParams& params,
                    std::span<const Sample> data, int threads) {
  if (data.empty()) return 0.0;
  std::vector<double> losses(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const Tensor3 probs = icnn_forward(config, params, normalize_image(data[i].image));
    losses[i] = cross_entropy_loss(probs, data[i].labels);
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(data.size());
}

TrainResult train_model(ICNNParams& params, const ICNNConfig& config,
                        std::span<const Sample> train_set, std::span<const Sample> val_set,
                        const TrainConfig& train, const AugmentSpec& augment_spec,
                        const std::function<void(const EpochStats&)>& on_epoch) {
  train.validate();
  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < train.max_epochs; ++epoch) {
    EpochStats stats;
    stats.epoch = epoch;
    stats.learning_rate = train.learning_rate * std::pow(train.lr_decay, epoch);
    stats.train_loss = sgd_epoch(params, config, train_set, train, augment_spec, epoch);
    result.steps += (train_set.size() + train.batch_size - 1) / train.batch_size;
    result.epochs_run = epoch + 1;
    const bool evaluate = !val_set.empty() && ((epoch + 1) % train.eval_every == 0 ||
                                               epoch + 1 == train.max_epochs);
    if (evaluate) {
      stats.val_loss = dataset_loss(config, params, val_set, train.threads);
      if (*stats.val_loss < best_val) {
        best_val = *stats.val_loss;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (since_best >= train.patience) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace icnn
