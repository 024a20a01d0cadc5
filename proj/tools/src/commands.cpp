#include "icnn/app/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "icnn/checkpoint.hpp"
#include "icnn/errors.hpp"
#include "icnn/io.hpp"
#include "icnn/parallel.hpp"

namespace icnn::app {
namespace {

namespace fs = std::filesystem;

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << text;
    if (!f) throw ConfigError("cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

std::vector<Sample> require_split(const RunConfig& cfg, Split split) {
  const fs::path manifest = cfg.manifest_path();
  if (!fs::exists(manifest)) {
    throw ConfigError("manifest not found: " + manifest.string() +
                      " (run `icnn synth` or set data.manifest)");
  }
  auto data = load_dataset(manifest, split);
  if (data.empty()) {
    throw DataError("split '" + std::string(to_string(split)) + "' is empty in " +
                    manifest.string());
  }
  return data;
}

Model load_model(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) {
    throw ConfigError(what + " checkpoint not found: " + path.string());
  }
  Checkpoint ck = load_checkpoint(path);
  return Model{std::move(ck.config), std::move(ck.params)};
}

void check_part_model(const Model& m, PartNetwork net) {
  if (m.config.num_labels != network_num_labels(net) ||
      m.config.input_height != network_patch_size(net) ||
      m.config.input_width != network_patch_size(net)) {
    throw ConfigError(std::string(network_name(net)) + " checkpoint has the wrong shape: " +
                      std::to_string(m.config.num_labels) + " labels at " +
                      std::to_string(m.config.input_height) + "x" +
                      std::to_string(m.config.input_width));
  }
}

// Centre of every part for each full-size sample: ground-truth medians, or the stage-1
// localization when configured. Absent parts are nullopt.
using CenterList = std::vector<std::array<std::optional<PixelCoord>, kAllParts.size()>>;

CenterList part_centers(const RunConfig& cfg, const std::vector<Sample>& full) {
  CenterList out(full.size());
  if (cfg.centers == CenterSource::Truth) {
    for (std::size_t i = 0; i < full.size(); ++i) out[i] = truth_centers(full[i].labels);
    return out;
  }
  const fs::path s1 = checkpoint_path(cfg, std::nullopt);
  if (!fs::exists(s1)) {
    throw ConfigError("train.centers = stage1 needs the stage-1 checkpoint " + s1.string() +
                      "; train stage 1 first or set train.centers = truth");
  }
  const Checkpoint ck = load_checkpoint(s1);
  const Model stage1{ck.config, ck.params};
  const PartCenters fallback = load_fallback(ck.meta);
  parallel_for(full.size(), cfg.threads, [&](std::size_t i) {
    const Localization loc = localize(stage1, full[i].image, fallback);
    for (std::size_t p = 0; p < kAllParts.size(); ++p) out[i][p] = loc.centers[p];
  });
  return out;
}

std::vector<Sample> part_dataset(const RunConfig& cfg, const std::vector<Sample>& full,
                                 PartNetwork net) {
  const CenterList centers = part_centers(cfg, full);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < full.size(); ++i) {
    for (std::size_t p = 0; p < kAllParts.size(); ++p) {
      if (descriptor(kAllParts[p]).network != net || !centers[i][p]) continue;
      out.push_back(part_sample(kAllParts[p], full[i], *centers[i][p]));
    }
  }
  return out;
}

// Mean ground-truth median of each part over the training faces, used when stage 1 finds
// no pixels of a part.
PartCenters mean_truth_centers(const std::vector<Sample>& full) {
  std::array<double, kAllParts.size()> rows{}, cols{};
  std::array<int, kAllParts.size()> n{};
  for (const Sample& s : full) {
    const auto c = truth_centers(s.labels);
    for (std::size_t p = 0; p < kAllParts.size(); ++p) {
      if (!c[p]) continue;
      rows[p] += c[p]->row;
      cols[p] += c[p]->col;
      ++n[p];
    }
  }
  PartCenters out{};
  for (std::size_t p = 0; p < kAllParts.size(); ++p) {
    if (n[p] == 0) {
      out[p] = {full.front().labels.height() / 2, full.front().labels.width() / 2};
    } else {
      out[p] = {static_cast<int>(std::lround(rows[p] / n[p])),
                static_cast<int>(std::lround(cols[p] / n[p]))};
    }
  }
  return out;
}

void write_ppm(const fs::path& path, const LabelMap& labels) {
  std::vector<std::uint8_t> bytes;
  const std::string header = "P6\n" + std::to_string(labels.width()) + " " +
                             std::to_string(labels.height()) + "\n255\n";
  bytes.assign(header.begin(), header.end());
  for (auto v : labels.data()) {
    // Background is drawn black; parts use their synthetic colours.
    const auto rgb = v == kBackground ? std::array<double, 3>{0, 0, 0} : class_color(v);
    for (double c : rgb) {
      bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)));
    }
  }
  write_text(path, std::string(bytes.begin(), bytes.end()));
}

}  // namespace

fs::path checkpoint_path(const RunConfig& cfg, std::optional<PartNetwork> net) {
  return cfg.run_dir / ((net ? std::string(network_name(*net)) : std::string("stage1")) + ".ckpt");
}

SynthDataset cmd_synth(const RunConfig& cfg, std::ostream& out) {
  cfg.synth.validate();
  const SynthDataset ds = generate_synthetic(cfg.synth, cfg.data_dir);
  out << "manifest: " << ds.manifest.generic_string() << "\n"
      << "medians: " << ds.medians.generic_string() << "\n"
      << "images: " << ds.count << "\n"
      << "checksum: " << hex32(ds.checksum) << "\n";
  return ds;
}

TrainOutcome cmd_train(const RunConfig& cfg, std::optional<PartNetwork> net, std::ostream& out) {
  cfg.validate();
  const std::vector<Sample> train_full = require_split(cfg, Split::Train);
  const std::vector<Sample> val_full = load_dataset(cfg.manifest_path(), Split::Val);

  ICNNConfig net_cfg;
  CheckpointMeta meta;
  std::vector<Sample> train_set, val_set;
  const std::string name = net ? std::string(network_name(*net)) : std::string("stage1");
  if (!net) {
    net_cfg = cfg.network(kNumFaceClasses, kStage1Size);
    for (const Sample& s : train_full) train_set.push_back(stage1_sample(s));
    for (const Sample& s : val_full) val_set.push_back(stage1_sample(s));
    store_fallback(meta, mean_truth_centers(train_full));
    meta["stage"] = "1";
  } else {
    net_cfg = cfg.network(network_num_labels(*net), network_patch_size(*net));
    train_set = part_dataset(cfg, train_full, *net);
    if (!val_full.empty()) val_set = part_dataset(cfg, val_full, *net);
    if (train_set.empty()) throw DataError("no " + name + " patches in the training split");
    meta["stage"] = "2";
    meta["network"] = name;
    meta["centers"] = cfg.get("train.centers");
  }

  const TrainConfig tc = cfg.training();
  const std::uint32_t hash = cfg.hash();
  std::ostringstream log;
  log << "# icnn train " << name << "\n"
      << "# seed = " << cfg.seed << "\n"
      << "# config_hash = " << hex32(hash) << "\n"
      << "# examples = " << train_set.size() << " train, " << val_set.size() << " val\n"
      << "# parameters = " << init_params(net_cfg, 0).parameter_count() << "\n";
  std::istringstream cfg_lines(cfg.canonical_text());
  for (std::string line; std::getline(cfg_lines, line);) log << "#   " << line << "\n";
  out << "training " << name << ": " << train_set.size() << " train / " << val_set.size()
      << " val examples, config hash " << hex32(hash) << "\n";

  ICNNParams params = init_params(net_cfg, cfg.seed);
  const TrainResult result =
      train_model(params, net_cfg, train_set, val_set, tc, cfg.augment, [&](const EpochStats& s) {
        std::ostringstream line;
        line << "epoch=" << s.epoch << " lr=" << fixed(s.learning_rate, 8)
             << " train_loss=" << fixed(s.train_loss)
             << " val_loss=" << (s.val_loss ? fixed(*s.val_loss) : std::string("-"));
        log << line.str() << "\n";
        out << line.str() << std::endl;
      });
  log << "# epochs_run = " << result.epochs_run << ", steps = " << result.steps
      << (result.stopped_early ? ", stopped early" : "") << "\n";

  meta["seed"] = std::to_string(cfg.seed);
  meta["config_hash"] = hex32(hash);
  meta["epochs_run"] = std::to_string(result.epochs_run);
  meta["steps"] = std::to_string(result.steps);

  TrainOutcome outcome;
  outcome.checkpoint = checkpoint_path(cfg, net);
  outcome.log = cfg.run_dir / (name + ".log");
  outcome.result = result;
  outcome.train_examples = train_set.size();
  outcome.val_examples = val_set.size();
  fs::create_directories(cfg.run_dir);
  save_checkpoint(outcome.checkpoint, net_cfg, params, meta);
  write_text(outcome.log, log.str());
  out << "checkpoint: " << outcome.checkpoint.generic_string() << "\n"
      << "log: " << outcome.log.generic_string() << "\n";
  return outcome;
}

CalibrationResult cmd_calibrate(const RunConfig& cfg, PartNetwork net, std::ostream& out) {
  cfg.validate();
  const fs::path path = checkpoint_path(cfg, net);
  if (!fs::exists(path)) {
    throw ConfigError(std::string(network_name(net)) + " checkpoint not found: " + path.string());
  }
  Checkpoint ck = load_checkpoint(path);
  const Model model{ck.config, ck.params};
  check_part_model(model, net);
  const std::vector<Sample> val = part_dataset(cfg, require_split(cfg, Split::Val), net);
  if (val.empty()) throw DataError("no " + std::string(network_name(net)) + " patches in 'val'");

  const CalibrationResult res = calibrate_modulation(model, val);
  out << "calibrating " << network_name(net) << " on " << val.size() << " validation patches\n"
      << "grid: " << kBetaGridSize << " x " << kBeta0GridSize << " coarse ("
      << res.coarse_evaluations << ") + " << 2 * kRefineSteps + 1 << " x "
      << 2 * kRefineSteps + 1 << " refinement (" << res.refine_evaluations << ")\n"
      << "F before: " << fixed(res.f_before) << "\n"
      << "F after: " << fixed(res.f_after) << "\n"
      << "beta = " << res.params.beta << ", beta0 = " << res.params.beta0 << "\n";

  store_modulation(ck.meta, res.params);
  ck.meta["calibration.f_before"] = fixed(res.f_before, 9);
  ck.meta["calibration.f_after"] = fixed(res.f_after, 9);
  save_checkpoint(path, ck.config, ck.params, ck.meta);
  return res;
}

FaceParser load_parser(const RunConfig& cfg) {
  const fs::path s1 = checkpoint_path(cfg, std::nullopt);
  if (!fs::exists(s1)) throw ConfigError("stage-1 checkpoint not found: " + s1.string());
  const Checkpoint stage1 = load_checkpoint(s1);
  if (stage1.config.num_labels != kNumFaceClasses || stage1.config.input_height != kStage1Size ||
      stage1.config.input_width != kStage1Size) {
    throw ConfigError("stage-1 checkpoint must be a 64x64 network with 9 labels");
  }
  PartModels parts;
  for (PartNetwork n : kAllNetworks) {
    const fs::path p = checkpoint_path(cfg, n);
    if (!fs::exists(p)) {
      throw ConfigError(std::string(network_name(n)) + " checkpoint not found: " + p.string());
    }
    Checkpoint ck = load_checkpoint(p);
    Model m{std::move(ck.config), std::move(ck.params)};
    check_part_model(m, n);
    parts.emplace(n, PartModel{std::move(m), load_modulation(ck.meta)});
  }
  return FaceParser(Model{stage1.config, stage1.params}, load_fallback(stage1.meta),
                    std::move(parts));
}

LabelMap cmd_predict(const RunConfig& cfg, const fs::path& image, const fs::path& output,
                     const std::optional<fs::path>& color, std::ostream& out) {
  const FaceParser parser = load_parser(cfg);
  const Tensor3 img = io::read_tensor(image);
  if (img.channels() != 3) throw ShapeError("predict: image must have 3 channels");
  const ParseResult res = parser.parse(img);
  for (std::size_t p = 0; p < kAllParts.size(); ++p) {
    if (res.localization.used_fallback[p]) {
      out << "warning: stage 1 found no " << part_name(kAllParts[p])
          << " pixels; using the fallback centre\n";
    }
  }
  io::write_labels(output, res.labels);
  out << "labels: " << output.generic_string() << "\n";
  if (color) {
    write_ppm(*color, res.labels);
    out << "visualization: " << color->generic_string() << "\n";
  }
  return res.labels;
}

EvalOutcome cmd_eval(const RunConfig& cfg, Split split, std::ostream& out) {
  const std::vector<Sample> data = require_split(cfg, split);
  const FaceParser parser = load_parser(cfg);

  struct PerImage {
    LabelMap labels;
    std::array<double, kAllParts.size()> error{};
    std::array<bool, kAllParts.size()> has_truth{};
    int fallbacks = 0;
  };
  std::vector<PerImage> results(data.size());
  parallel_for(data.size(), cfg.threads, [&](std::size_t i) {
    const ParseResult r = parser.parse(data[i].image);
    const auto truth = truth_centers(data[i].labels);
    PerImage& pi = results[i];
    pi.labels = r.labels;
    for (std::size_t p = 0; p < kAllParts.size(); ++p) {
      pi.fallbacks += r.localization.used_fallback[p] ? 1 : 0;
      if (!truth[p]) continue;
      pi.has_truth[p] = true;
      pi.error[p] = std::hypot(r.localization.centers[p].row - truth[p]->row,
                               r.localization.centers[p].col - truth[p]->col);
    }
  });

  EvalOutcome outcome;
  for (std::size_t i = 0; i < data.size(); ++i) {
    outcome.counts.accumulate(results[i].labels, data[i].labels);
    outcome.fallbacks += results[i].fallbacks;
    for (std::size_t p = 0; p < kAllParts.size(); ++p) {
      if (results[i].has_truth[p]) outcome.localization_errors.push_back(results[i].error[p]);
    }
  }
  outcome.rows = report(outcome.counts);

  const auto& errs = outcome.localization_errors;
  const auto within = std::count_if(errs.begin(), errs.end(), [](double e) { return e <= 8.0; });
  double mean = 0.0, worst = 0.0;
  for (double e : errs) {
    mean += e;
    worst = std::max(worst, e);
  }
  if (!errs.empty()) mean /= static_cast<double>(errs.size());

  std::ostringstream text;
  text << "split: " << to_string(split) << " (" << data.size() << " images)\n"
       << format_report_text(outcome.rows) << "localization: " << within << "/" << errs.size()
       << " parts within 8 px, mean error " << fixed(mean, 3) << " px, max " << fixed(worst, 3)
       << " px, fallbacks " << outcome.fallbacks << "\n";
  outcome.report_text = text.str();
  outcome.report_csv = cfg.run_dir / ("eval_" + std::string(to_string(split)) + ".csv");
  write_text(outcome.report_csv, format_report_csv(outcome.rows));
  write_text(cfg.run_dir / ("eval_" + std::string(to_string(split)) + ".txt"), outcome.report_text);
  out << outcome.report_text << "report: " << outcome.report_csv.generic_string() << "\n";
  return outcome;
}

}  // namespace icnn::app
