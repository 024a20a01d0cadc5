#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "icnn/app/commands.hpp"
#include "icnn/app/run_config.hpp"
#include "icnn/checkpoint.hpp"
#include "icnn/errors.hpp"
#include "icnn/io.hpp"
#include "test_support.hpp"

namespace icnn::app {
namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "icnn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

TEST(RunConfigTest, ParsesKeysCommentsAndBlankLines) {
  const RunConfig c = parse_run_config(
      "# comment\n\nseed = 9\nnet.maps=4   # trailing\ntrain.centers = stage1\n", "cfg", {});
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.maps, 4);
  EXPECT_EQ(c.centers, CenterSource::Stage1);
  EXPECT_EQ(c.get("net.maps"), "4");
}

TEST(RunConfigTest, UnknownKeyAndBadValueCarryLineNumbers) {
  try {
    parse_run_config("seed = 1\nnet.mapz = 4\n", "my.cfg", {});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("my.cfg:2:"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("net.mapz"), std::string::npos);
  }
  EXPECT_THROW(parse_run_config("threads = 0\n", "x", {}), ConfigError);
  EXPECT_THROW(parse_run_config("train.learning_rate = abc\n", "x", {}), ConfigError);
  EXPECT_THROW(parse_run_config("just words\n", "x", {}), ConfigError);
}

TEST(RunConfigTest, CanonicalTextRoundTripsAndHashTracksChanges) {
  RunConfig a;
  a.set("train.learning_rate", "0.125");
  const RunConfig b = parse_run_config(a.canonical_text(), "canon", {});
  EXPECT_EQ(b.canonical_text(), a.canonical_text());
  EXPECT_EQ(b.hash(), a.hash());
  RunConfig c = a;
  c.set("seed", "2");
  EXPECT_NE(c.hash(), a.hash());
  const std::string text = a.canonical_text();
  EXPECT_EQ(RunConfig::keys().size() - 4,
            static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
  RunConfig moved = a;
  moved.set("run.dir", "/elsewhere");
  moved.set("threads", "8");
  EXPECT_EQ(moved.hash(), a.hash());
  EXPECT_EQ(text.find("run.dir"), std::string::npos);
}

TEST(RunConfigTest, ValidateRejectsInconsistentNetworks) {
  RunConfig c;
  c.set("net.kernel_size", "4");
  EXPECT_THROW(c.validate(), ConfigError);
  RunConfig d;
  d.set("augment.scale_min", "1");
  d.set("augment.scale_max", "1");
  EXPECT_NO_THROW(d.validate());
  EXPECT_THROW(split_assignment("novalue"), ConfigError);
  EXPECT_EQ(split_assignment("a.b = 3").second, "3");
}

TEST(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_NE(run({}).code, 0);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"train", "--stage", "3"}).code, 2);
}

TEST(CliTest, SynthIsReproducible) {
  test::TempDir a("cli_synth_a"), b("cli_synth_b");
  const CliRun r1 = run({"synth", "--seed", "7", "--count", "3", "--out", a.path().string()});
  const CliRun r2 = run({"synth", "--seed", "7", "--count", "3", "--out", b.path().string()});
  ASSERT_EQ(r1.code, 0) << r1.err;
  ASSERT_EQ(r2.code, 0) << r2.err;
  const auto checksum = [](const std::string& s) { return s.substr(s.find("checksum:")); };
  EXPECT_EQ(checksum(r1.out), checksum(r2.out));
  EXPECT_TRUE(std::filesystem::exists(a.path() / "manifest.txt"));
}

TEST(CliTest, SynthZeroCountWritesEmptyManifest) {
  test::TempDir d("cli_synth_zero");
  const CliRun r = run({"synth", "--count", "0", "--out", d.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("images: 0"), std::string::npos);
}

TEST(CliTest, InvalidSynthSettingNamesTheKey) {
  test::TempDir d("cli_synth_bad");
  const CliRun r = run({"synth", "--set", "synth.face_jitter=80", "--out", d.path().string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("synth.face_jitter"), std::string::npos) << r.err;
  EXPECT_EQ(r.err.rfind("error[config]", 0), 0u) << r.err;
}

TEST(CliTest, ConfigFileThenOverrides) {
  test::TempDir d("cli_cfg");
  {
    std::ofstream f(d.path() / "run.cfg");
    f << "synth.count = 2\nsynth.face_jitter = 80\n";
  }
  const std::string cfg = (d.path() / "run.cfg").string();
  EXPECT_EQ(run({"synth", "--config", cfg, "--out", d.path().string()}).code, 3);
  const CliRun ok = run({"synth", "--config", cfg, "--set", "synth.face_jitter=5", "--out",
                      d.path().string()});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.out.find("images: 2"), std::string::npos);
  EXPECT_EQ(run({"synth", "--config", (d.path() / "missing.cfg").string()}).code, 3);
}

TEST(CliTest, StageOneCentresRequireStageOneCheckpoint) {
  test::TempDir d("cli_stage2");
  ASSERT_EQ(run({"synth", "--count", "2", "--out", (d.path() / "data").string()}).code, 0);
  const CliRun r = run({"train", "--stage", "2", "--part", "eye", "--centers", "stage1", "--data",
                     (d.path() / "data").string(), "--out", (d.path() / "run").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("stage-1 checkpoint"), std::string::npos) << r.err;
  EXPECT_EQ(run({"train", "--stage", "2", "--data", (d.path() / "data").string()}).code, 3);
  EXPECT_EQ(run({"train", "--stage", "2", "--part", "ear", "--data",
                 (d.path() / "data").string()})
                .code,
            3);
}

TEST(CliTest, TrainWithoutManifestIsConfigError) {
  test::TempDir d("cli_nomanifest");
  const CliRun r = run({"train", "--stage", "1", "--data", d.path().string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("manifest"), std::string::npos);
}

TEST(CliTest, PredictWithMissingCheckpointIsConfigError) {
  test::TempDir d("cli_predict");
  io::write_tensor(d.path() / "img.tnsr", Tensor3(256, 256, 3, 0.5));
  const CliRun r = run({"predict", "--image", (d.path() / "img.tnsr").string(), "--output",
                     (d.path() / "out.lbl").string(), "--out", d.path().string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("checkpoint not found"), std::string::npos) << r.err;
}

TEST(CliTest, EmptyEvalSplitNamesTheSplit) {
  test::TempDir d("cli_eval_empty");
  ASSERT_EQ(run({"synth", "--count", "2", "--out", d.path().string()}).code, 0);
  const CliRun r = run({"eval", "--split", "test", "--data", d.path().string()});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("'test'"), std::string::npos) << r.err;
  EXPECT_EQ(run({"eval", "--split", "holdout", "--data", d.path().string()}).code, 3);
}

TEST(CliTest, GradcheckPassesAndCorruptionFails) {
  const CliRun ok = run({"gradcheck"});
  EXPECT_EQ(ok.code, 0) << ok.out;
  for (const char* name : {"ConvTanh", "ConvLinear", "MeanPool2", "MaxPool2", "UpsampleNN2",
                           "ConcatChannels", "FlipH", "SoftmaxXent", "pooling-only",
                           "icnn-reduced"}) {
    EXPECT_NE(ok.out.find(name), std::string::npos) << name;
  }
  EXPECT_NE(ok.out.find("gradcheck: PASS"), std::string::npos);
  const CliRun bad = run({"gradcheck", "--corrupt-backward", "0.01"});
  EXPECT_NE(bad.code, 0);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
  EXPECT_EQ(testing::backward_corruption(), 0.0);
}

TEST(CliTest, GradcheckRejectsEpsilonOutOfRange) {
  EXPECT_EQ(run({"gradcheck", "--set", "gradcheck.epsilon=0.1"}).code, 3);
}

// Smallest possible networks through every subcommand.
TEST(CliTest, TinyPipelineEndToEnd) {
  test::TempDir d("cli_e2e");
  const std::string data = (d.path() / "data").string();
  const std::string runs = (d.path() / "run").string();
  ASSERT_EQ(run({"synth", "--count", "4", "--val-count", "1", "--test-count", "1", "--out", data})
                .code,
            0);
  const std::vector<std::string> common = {"--data", data, "--out", runs, "--set", "net.maps=1",
                                           "--set", "net.rounds=1", "--epochs", "1",
                                           "--threads", "2"};
  auto with = [&](std::vector<std::string> args) {
    args.insert(args.end(), common.begin(), common.end());
    return args;
  };
  CliRun r = run(with({"train", "--stage", "1"}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("epoch=0"), std::string::npos);
  for (const char* part : {"eyebrow", "eye", "nose", "mouth"}) {
    r = run(with({"train", "--stage", "2", "--part", part}));
    ASSERT_EQ(r.code, 0) << part << ": " << r.err;
  }
  std::ifstream log(d.path() / "run" / "eye.log");
  std::stringstream log_text;
  log_text << log.rdbuf();
  EXPECT_NE(log_text.str().find("# config_hash = 0x"), std::string::npos);
  EXPECT_NE(log_text.str().find("net.maps = 1"), std::string::npos);

  r = run({"calibrate", "--part", "nose", "--data", data, "--out", runs});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("17 x 25"), std::string::npos);
  const Checkpoint nose = load_checkpoint(d.path() / "run" / "nose.ckpt");
  EXPECT_TRUE(nose.meta.contains("calibration.f_after"));

  const std::string image = (d.path() / "data" / "images" / "face_00000.tns").string();
  ASSERT_TRUE(std::filesystem::exists(image));
  r = run({"predict", "--image", image, "--output", (d.path() / "p.lbl").string(), "--color",
           (d.path() / "p.ppm").string(), "--out", runs});
  ASSERT_EQ(r.code, 0) << r.err;
  const LabelMap pred = io::read_labels(d.path() / "p.lbl");
  EXPECT_EQ(pred.height(), 256);
  EXPECT_EQ(pred.num_classes(), 9);
  EXPECT_GT(std::filesystem::file_size(d.path() / "p.ppm"), 3u * 256 * 256);

  r = run({"eval", "--split", "test", "--data", data, "--out", runs});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("overall"), std::string::npos) << r.out;
  EXPECT_TRUE(std::filesystem::exists(d.path() / "run" / "eval_test.csv"));

  // A corrupted checkpoint surfaces as a format error.
  {
    std::fstream f(d.path() / "run" / "mouth.ckpt", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    f.put('\x7f');
  }
  EXPECT_EQ(run({"eval", "--split", "test", "--data", data, "--out", runs}).code, 5);
}

}  // namespace
}  // namespace icnn::app
