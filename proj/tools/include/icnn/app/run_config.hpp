#pragma once

// Run configuration: a UTF-8 text file of `key = value` lines with '#' comments. Every key
// has a default, unknown keys are rejected and values are range-checked as they are set.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "icnn/augment.hpp"
#include "icnn/network.hpp"
#include "icnn/synth.hpp"
#include "icnn/train.hpp"

namespace icnn::app {

enum class CenterSource { Truth, Stage1 };

struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;

  // Network shape shared by every stage; the label count and input size follow the stage.
  int maps = 8;
  int rounds = 3;
  int columns = 4;
  int kernel_size = 5;
  int final_kernel_size = 9;

  TrainConfig train;  // train.seed and train.threads mirror seed and threads
  AugmentSpec augment;
  SynthSpec synth;
  CenterSource centers = CenterSource::Truth;

  double gradcheck_epsilon = 1e-5;
  double gradcheck_tolerance = 1e-4;

  std::filesystem::path data_dir = "data";
  std::filesystem::path manifest;  // empty: <data_dir>/manifest.txt
  std::filesystem::path run_dir = "run";

  /// Sets one key from its text form. Throws ConfigError naming the key.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  static const std::vector<std::string>& keys();

  /// Cross-field checks; throws ConfigError.
  void validate() const;

  /// `key = value` lines in declaration order for every key that affects results; paths
  /// and the thread count are left out so relocated or re-threaded runs hash equal.
  std::string canonical_text() const;
  /// CRC32 of canonical_text().
  std::uint32_t hash() const;

  ICNNConfig network(int num_labels, int input_size) const;
  /// Training settings with the global seed and thread count applied.
  TrainConfig training() const;
  std::filesystem::path manifest_path() const;
};

/// Applies `key = value` lines from `text` on top of `base`. `origin` names the source in
/// error messages.
RunConfig parse_run_config(std::string_view text, const std::string& origin,
                           RunConfig base = RunConfig{});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = RunConfig{});

/// Splits "key=value" (from a --set flag).
std::pair<std::string, std::string> split_assignment(std::string_view text);

}  // namespace icnn::app
