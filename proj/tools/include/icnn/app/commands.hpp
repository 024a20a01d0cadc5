#pragma once

// Subcommands of the icnn tool as plain functions. Each writes its human-readable output
// to `out` and reports failures by throwing icnn::Error subclasses.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "icnn/app/run_config.hpp"
#include "icnn/dataset.hpp"
#include "icnn/grad_check.hpp"
#include "icnn/metrics.hpp"
#include "icnn/pipeline.hpp"
#include "icnn/synth.hpp"

namespace icnn::app {

/// Checkpoint file of the stage-1 network (nullopt) or of a part network, under run.dir.
std::filesystem::path checkpoint_path(const RunConfig& cfg, std::optional<PartNetwork> net);

SynthDataset cmd_synth(const RunConfig& cfg, std::ostream& out);

struct TrainOutcome {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  TrainResult result;
  std::size_t train_examples = 0;
  std::size_t val_examples = 0;
};

/// Stage 1 when `net` is nullopt, otherwise the given part network.
TrainOutcome cmd_train(const RunConfig& cfg, std::optional<PartNetwork> net, std::ostream& out);

/// Calibrates the part network's background modulation on the validation split and
/// stores it in the network's checkpoint meta.
CalibrationResult cmd_calibrate(const RunConfig& cfg, PartNetwork net, std::ostream& out);

/// Loads all five checkpoints into a parser.
FaceParser load_parser(const RunConfig& cfg);

/// Parses one image file and writes the label map (and an optional PPM visualisation).
LabelMap cmd_predict(const RunConfig& cfg, const std::filesystem::path& image,
                     const std::filesystem::path& output,
                     const std::optional<std::filesystem::path>& color, std::ostream& out);

struct EvalOutcome {
  ConfusionCounts counts;
  std::vector<ReportRow> rows;
  /// Distance in pixels between each localized part centre and its ground-truth median;
  /// one entry per (image, part) with a ground-truth median.
  std::vector<double> localization_errors;
  int fallbacks = 0;
  std::string report_text;
  std::filesystem::path report_csv;
};

EvalOutcome cmd_eval(const RunConfig& cfg, Split split, std::ostream& out);

struct GradCheckCase {
  std::string name;
  GradCheckResult result;
  bool pass = false;
};

struct GradCheckSummary {
  std::vector<GradCheckCase> cases;
  bool pass = false;
};

/// Gradient checks for every layer kind, a pooling-only network and two width-reduced
/// networks (16×16 input, two maps per column). `corrupt_backward` scales conv kernel
/// gradients to prove failures are caught.
GradCheckSummary cmd_gradcheck(const RunConfig& cfg, std::ostream& out,
                               double corrupt_backward = 0.0);

/// Process exit code for an exception escaping a command.
int exit_code(const std::exception& e);
/// "error[<category>]: <message>" on a single line.
std::string error_line(const std::exception& e);

/// Full command-line entry point; returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace icnn::app
