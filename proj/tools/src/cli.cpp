#include <CLI11.hpp>

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "icnn/app/commands.hpp"
#include "icnn/errors.hpp"

namespace icnn::app {

namespace {

constexpr int kExitUsage = 2;

}  // namespace

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 3;
  if (dynamic_cast<const DataError*>(&e)) return 4;
  if (dynamic_cast<const FormatError*>(&e)) return 5;
  if (dynamic_cast<const ShapeError*>(&e)) return 6;
  if (dynamic_cast<const NumericError*>(&e)) return 7;
  if (dynamic_cast<const StateError*>(&e)) return 8;
  return 1;
}

std::string error_line(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  std::string msg = e.what();
  for (char& c : msg) {
    if (c == '\n') c = ' ';
  }
  return "error[" + std::string(err ? err->category() : "internal") + "]: " + msg;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interlinked CNN face parsing: synthesize data, train, calibrate, predict, evaluate"};
  app.name("icnn");
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir;
  std::string data_dir;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "Configuration file (key = value lines)");
  app.add_option("--seed", seed, "Master seed (also the synthetic data seed)");
  app.add_option("--threads", threads, "Worker threads");
  app.add_option("--out", out_dir, "Output directory: data dir for synth, run dir otherwise");
  app.add_option("--data", data_dir, "Dataset directory containing manifest.txt");
  app.add_option("--set", overrides, "Override one configuration key (key=value)")
      ->take_all()
      ->allow_extra_args(false);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic face dataset");
  std::optional<int> count, val_count, test_count;
  synth->add_option("--count", count, "Number of faces");
  synth->add_option("--val-count", val_count, "Faces assigned to the validation split");
  synth->add_option("--test-count", test_count, "Faces assigned to the test split");

  auto* train = app.add_subcommand("train", "Train the stage-1 or a part network");
  int stage = 1;
  std::string part;
  std::optional<std::string> centers;
  std::optional<int> epochs;
  train->add_option("--stage", stage, "1 (whole face) or 2 (part network)")
      ->check(CLI::IsMember({1, 2}));
  train->add_option("--part", part, "eyebrow, eye, nose or mouth (stage 2)");
  train->add_option("--centers", centers, "Patch centres for stage 2: truth or stage1");
  train->add_option("--epochs", epochs, "Maximum epochs");

  auto* calibrate = app.add_subcommand("calibrate", "Fit background modulation on the val split");
  std::string calib_part;
  calibrate->add_option("--part", calib_part, "eyebrow, eye, nose or mouth")->required();

  auto* predict = app.add_subcommand("predict", "Parse one image tensor file");
  std::string image, output, color;
  predict->add_option("--image", image, "Input image (tensor file)")->required();
  predict->add_option("--output", output, "Output label map file")->required();
  predict->add_option("--color", color, "Optional PPM visualisation");

  auto* eval = app.add_subcommand("eval", "Evaluate the full pipeline on a split");
  std::string split = "test";
  eval->add_option("--split", split, "train, val or test");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  double corrupt = 0.0;
  gradcheck->add_option("--corrupt-backward", corrupt,
                        "Scale conv kernel gradients by (1 + f) to exercise failure reporting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path, cfg);
    for (const auto& o : overrides) {
      const auto [k, v] = split_assignment(o);
      cfg.set(k, v);
    }
    if (seed) {
      cfg.set("seed", std::to_string(*seed));
      cfg.set("synth.seed", std::to_string(*seed));
    }
    if (threads) cfg.set("threads", std::to_string(*threads));
    if (!data_dir.empty()) cfg.set("data.dir", data_dir);
    if (!out_dir.empty()) cfg.set(synth->parsed() ? "data.dir" : "run.dir", out_dir);

    if (synth->parsed()) {
      if (count) cfg.set("synth.count", std::to_string(*count));
      if (val_count) cfg.set("synth.val_count", std::to_string(*val_count));
      if (test_count) cfg.set("synth.test_count", std::to_string(*test_count));
      cmd_synth(cfg, out);
    } else if (train->parsed()) {
      if (centers) cfg.set("train.centers", *centers);
      if (epochs) cfg.set("train.epochs", std::to_string(*epochs));
      if (stage == 1) {
        if (!part.empty()) throw ConfigError("--part is only valid with --stage 2");
        cmd_train(cfg, std::nullopt, out);
      } else {
        if (part.empty()) throw ConfigError("--stage 2 requires --part");
        cmd_train(cfg, parse_network(part), out);
      }
    } else if (calibrate->parsed()) {
      cmd_calibrate(cfg, parse_network(calib_part), out);
    } else if (predict->parsed()) {
      cmd_predict(cfg, image, output,
                  color.empty() ? std::nullopt : std::optional<std::filesystem::path>(color), out);
    } else if (eval->parsed()) {
      cmd_eval(cfg, parse_split(split), out);
    } else if (gradcheck->parsed()) {
      if (!cmd_gradcheck(cfg, out, corrupt).pass) return 1;
    }
  } catch (const std::exception& e) {
    err << error_line(e) << "\n";
    return exit_code(e);
  }
  return 0;
}

}  // namespace icnn::app
