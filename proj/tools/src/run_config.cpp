#include "icnn/app/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "icnn/errors.hpp"
#include "icnn/io.hpp"

namespace icnn::app {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError(std::string(key) + ": invalid value '" + std::string(value) + "' (expected " +
                    std::string(want) + ")");
}

template <typename T>
T parse_integer(std::string_view key, std::string_view text, T lo, T hi) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || v < lo || v > hi) {
    bad_value(key, text, "integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return v;
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// lo_open/hi_open make the corresponding bound exclusive.
double parse_real(std::string_view key, std::string_view text, double lo, double hi,
                  bool lo_open = false, bool hi_open = false) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  const bool ok = ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(v) &&
                  (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
  if (!ok) {
    bad_value(key, text, std::string("number in ") + (lo_open ? "(" : "[") + format_double(lo) +
                             ", " + format_double(hi) + (hi_open ? ")" : "]"));
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  bad_value(key, text, "true or false");
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Ref>
Field int_field(std::string key, Ref ref, long long lo, long long hi) {
  return {std::move(key),
          [ref, lo, hi](RunConfig& c, std::string_view k, std::string_view v) {
            ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(
                parse_integer<long long>(k, v, lo, hi));
          },
          [ref](const RunConfig& c) {
            return std::to_string(ref(const_cast<RunConfig&>(c)));
          }};
}

template <typename Ref>
Field seed_field(std::string key, Ref ref) {
  return {std::move(key),
          [ref](RunConfig& c, std::string_view k, std::string_view v) {
            ref(c) = parse_integer<std::uint64_t>(k, v, 0, UINT64_MAX);
          },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

template <typename Ref>
Field real_field(std::string key, Ref ref, double lo, double hi, bool lo_open = false,
                 bool hi_open = false) {
  return {std::move(key),
          [=](RunConfig& c, std::string_view k, std::string_view v) {
            ref(c) = parse_real(k, v, lo, hi, lo_open, hi_open);
          },
          [ref](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); }};
}

template <typename Ref>
Field path_field(std::string key, Ref ref) {
  return {std::move(key),
          [ref](RunConfig& c, std::string_view, std::string_view v) {
            ref(c) = std::filesystem::path(std::string(v));
          },
          [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)).generic_string(); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(seed_field("seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; }));
    f.push_back(int_field("threads", [](RunConfig& c) -> int& { return c.threads; }, 1, 256));

    f.push_back(int_field("net.maps", [](RunConfig& c) -> int& { return c.maps; }, 1, 256));
    f.push_back(int_field("net.rounds", [](RunConfig& c) -> int& { return c.rounds; }, 1, 16));
    f.push_back(int_field("net.columns", [](RunConfig& c) -> int& { return c.columns; }, 2, 6));
    f.push_back(
        int_field("net.kernel_size", [](RunConfig& c) -> int& { return c.kernel_size; }, 1, 15));
    f.push_back(int_field("net.final_kernel_size",
                          [](RunConfig& c) -> int& { return c.final_kernel_size; }, 1, 31));

    f.push_back(real_field("train.learning_rate",
                           [](RunConfig& c) -> double& { return c.train.learning_rate; }, 0.0,
                           10.0, true));
    f.push_back(int_field("train.batch_size",
                          [](RunConfig& c) -> int& { return c.train.batch_size; }, 1, 4096));
    f.push_back(int_field("train.epochs", [](RunConfig& c) -> int& { return c.train.max_epochs; },
                          0, 100000));
    f.push_back({"train.augment",
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   c.train.augment = parse_bool(k, v);
                 },
                 [](const RunConfig& c) { return std::string(c.train.augment ? "true" : "false"); }});
    f.push_back(int_field("train.eval_every",
                          [](RunConfig& c) -> int& { return c.train.eval_every; }, 1, 100000));
    f.push_back(real_field("train.lr_decay",
                           [](RunConfig& c) -> double& { return c.train.lr_decay; }, 0.0, 1.0,
                           true));
    f.push_back(int_field("train.patience", [](RunConfig& c) -> int& { return c.train.patience; },
                          1, 100000));
    f.push_back({"train.centers",
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   if (v == "truth") {
                     c.centers = CenterSource::Truth;
                   } else if (v == "stage1") {
                     c.centers = CenterSource::Stage1;
                   } else {
                     bad_value(k, v, "truth or stage1");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.centers == CenterSource::Truth ? "truth" : "stage1");
                 }});

    f.push_back(real_field("augment.max_rotation",
                           [](RunConfig& c) -> double& { return c.augment.max_rotation_deg; }, 0.0,
                           180.0));
    f.push_back(real_field("augment.scale_min",
                           [](RunConfig& c) -> double& { return c.augment.scale_min; }, 0.0, 1.0,
                           true));
    f.push_back(real_field("augment.scale_max",
                           [](RunConfig& c) -> double& { return c.augment.scale_max; }, 1.0, 10.0));
    f.push_back(real_field("augment.max_shift",
                           [](RunConfig& c) -> double& { return c.augment.max_shift; }, 0.0,
                           1000.0));

    f.push_back(seed_field("synth.seed", [](RunConfig& c) -> std::uint64_t& { return c.synth.seed; }));
    f.push_back(int_field("synth.count", [](RunConfig& c) -> int& { return c.synth.count; }, 0,
                          1000000));
    f.push_back(int_field("synth.val_count", [](RunConfig& c) -> int& { return c.synth.val_count; },
                          0, 1000000));
    f.push_back(int_field("synth.test_count",
                          [](RunConfig& c) -> int& { return c.synth.test_count; }, 0, 1000000));
    f.push_back(int_field("synth.image_size",
                          [](RunConfig& c) -> int& { return c.synth.image_size; }, 256, 256));
    f.push_back(real_field("synth.face_jitter",
                           [](RunConfig& c) -> double& { return c.synth.face_jitter; }, 0.0, 128.0));
    f.push_back(real_field("synth.part_jitter",
                           [](RunConfig& c) -> double& { return c.synth.part_jitter; }, 0.0, 128.0));
    f.push_back(real_field("synth.size_jitter",
                           [](RunConfig& c) -> double& { return c.synth.size_jitter; }, 0.0, 0.5,
                           false, true));
    f.push_back(real_field("synth.brow_rotation",
                           [](RunConfig& c) -> double& { return c.synth.brow_rotation; }, 0.0, 45.0));
    f.push_back(real_field("synth.color_jitter",
                           [](RunConfig& c) -> double& { return c.synth.color_jitter; }, 0.0, 0.1));
    f.push_back(
        real_field("synth.noise", [](RunConfig& c) -> double& { return c.synth.noise; }, 0.0, 0.1));

    f.push_back(real_field("gradcheck.epsilon",
                           [](RunConfig& c) -> double& { return c.gradcheck_epsilon; }, 1e-7, 1e-3));
    f.push_back(real_field("gradcheck.tolerance",
                           [](RunConfig& c) -> double& { return c.gradcheck_tolerance; }, 0.0, 1.0,
                           true));

    f.push_back(path_field("data.dir", [](RunConfig& c) -> std::filesystem::path& { return c.data_dir; }));
    f.push_back(
        path_field("data.manifest", [](RunConfig& c) -> std::filesystem::path& { return c.manifest; }));
    f.push_back(path_field("run.dir", [](RunConfig& c) -> std::filesystem::path& { return c.run_dir; }));
    return f;
  }();
  return table;
}

// Keys that say where or how fast a run happens, not what it computes.
bool is_location_key(std::string_view key) {
  return key == "threads" || key == "data.dir" || key == "data.manifest" || key == "run.dir";
}

const Field& find_field(std::string_view key) {
  for (const Field& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  find_field(key).set(*this, key, trim(value));
}

std::string RunConfig::get(std::string_view key) const { return find_field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const Field& f : fields()) out.push_back(f.key);
    return out;
  }();
  return k;
}

void RunConfig::validate() const {
  if (kernel_size % 2 == 0) throw ConfigError("net.kernel_size must be odd");
  if (final_kernel_size % 2 == 0) throw ConfigError("net.final_kernel_size must be odd");
  if (64 % (1 << (columns - 1)) != 0 || 80 % (1 << (columns - 1)) != 0) {
    throw ConfigError("net.columns: 64 and 80 px inputs must be divisible by 2^(columns-1)");
  }
  if (augment.scale_min > augment.scale_max) {
    throw ConfigError("augment.scale_min must not exceed augment.scale_max");
  }
  training().validate();
  augment.validate();
  synth.validate();
}

std::string RunConfig::canonical_text() const {
  std::string out;
  for (const Field& f : fields()) {
    if (!is_location_key(f.key)) out += f.key + " = " + f.get(*this) + "\n";
  }
  return out;
}

std::uint32_t RunConfig::hash() const {
  const std::string text = canonical_text();
  return io::checksum(
      std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ICNNConfig RunConfig::network(int num_labels, int input_size) const {
  ICNNConfig cfg = ICNNConfig::make(num_labels, input_size, maps, rounds, columns);
  cfg.kernel_size = kernel_size;
  cfg.final_kernel_size = final_kernel_size;
  cfg.validate();
  return cfg;
}

TrainConfig RunConfig::training() const {
  TrainConfig t = train;
  t.seed = seed;
  t.threads = threads;
  return t;
}

std::filesystem::path RunConfig::manifest_path() const {
  return manifest.empty() ? data_dir / "manifest.txt" : manifest;
}

RunConfig parse_run_config(std::string_view text, const std::string& origin, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    try {
      base.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string(), std::move(base));
}

std::pair<std::string, std::string> split_assignment(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("expected key=value, got '" + std::string(text) + "'");
  }
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

}  // namespace icnn::app
