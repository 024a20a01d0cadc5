#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "icnn/augment.hpp"
#include "icnn/network.hpp"

namespace icnn {

struct TrainConfig {
  double learning_rate = 0.05;
  int batch_size = 1;
  int max_epochs = 20;
  std::uint64_t seed = 1;
  bool augment = true;
  int eval_every = 1;
  double lr_decay = 1.0;
  /// Stop after this many evaluations without validation-loss improvement.
  int patience = 10;
  /// Workers computing per-example gradients inside a batch. Results do not depend on it.
  int threads = 1;

  void validate() const;
};

/// A raw (un-normalized) image with its label map.
struct Sample {
  Tensor3 image;
  LabelMap labels;
};

/// Visit order of epoch `epoch`: a permutation of [0, n) seeded by (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch);

/// One pass of minibatch SGD over `data` in `epoch_permutation` order. Each example is
/// augmented (when enabled), normalized and differentiated; batch gradients are summed
/// in visit order and applied as params −= lr·Σgrad/|batch|. Returns the mean loss.
double sgd_epoch(ICNNParams& params, const ICNNConfig& config, std::span<const Sample> data,
                 const TrainConfig& train, const AugmentSpec& augment_spec, int epoch);

/// Mean cross-entropy over samples without augmentation.
double dataset_loss(const ICNNConfig& config, const ICNNParams& params,
                    std::span<const Sample> data, int threads = 1);

struct EpochStats {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int epochs_run = 0;
  std::size_t steps = 0;
  bool stopped_early = false;
};

/// Runs up to max_epochs epochs, evaluating on `val` every eval_every epochs and stopping
/// once validation loss has not improved for `patience` evaluations. The parameters
/// from the last epoch are kept.
TrainResult train_model(ICNNParams& params, const ICNNConfig& config,
                        std::span<const Sample> train_set, std::span<const Sample> val_set,
                        const TrainConfig& train, const AugmentSpec& augment_spec,
                        const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace icnn
