#include "icnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "binary_io.hpp"
#include "icnn/errors.hpp"
#include "icnn/io.hpp"

namespace icnn {
namespace {

// Canonical layout relative to the face centre, in pixels for a 256×256 image.
constexpr double kBrowDx = 40, kBrowDy = -46, kBrowHalfW = 20, kBrowHalfH = 4.5;
constexpr double kEyeDx = 42, kEyeDy = -18, kEyeRx = 15, kEyeRy = 7;
constexpr double kNoseDy = 6, kNoseHalfW = 12, kNoseHalfH = 16;
constexpr double kMouthDy = 55, kMouthRx = 30, kMouthRy = 14;
constexpr double kFaceRx = 92, kFaceRy = 112;
// Mouth bands split the ellipse by normalized row t = (y − cy)/ry.
constexpr double kLipSplit = 0.2;

constexpr std::array<std::array<double, 3>, kNumFaceClasses> kColors = {{
    {0.87, 0.72, 0.58},  // skin
    {0.25, 0.15, 0.08},  // eyebrows
    {0.15, 0.45, 0.85},  // eyes
    {0.25, 0.15, 0.08},
    {0.15, 0.45, 0.85},
    {0.80, 0.45, 0.40},  // nose
    {0.75, 0.15, 0.20},  // upper lip
    {0.95, 0.93, 0.88},  // inner mouth
    {0.85, 0.30, 0.55},  // lower lip
}};

struct Box {
  double r0, r1, c0, c1;
  bool overlaps(const Box& o) const {
    return !(r1 < o.r0 - 1 || o.r1 < r0 - 1 || c1 < o.c0 - 1 || o.c1 < c0 - 1);
  }
};

struct PartExtent {
  const char* name;
  double dx, dy, half_w, half_h;
};

std::vector<PartExtent> worst_case_extents(const SynthSpec& s) {
  const double g = 1.0 + s.size_jitter;
  const double a = s.brow_rotation * std::numbers::pi / 180.0;
  const double bw = kBrowHalfW * g, bh = kBrowHalfH * g;
  const double brow_w = bw * std::cos(a) + bh * std::sin(a);
  const double brow_h = bw * std::sin(a) + bh * std::cos(a);
  return {
      {"left_eyebrow", -kBrowDx, kBrowDy, brow_w, brow_h},
      {"right_eyebrow", kBrowDx, kBrowDy, brow_w, brow_h},
      {"left_eye", -kEyeDx, kEyeDy, kEyeRx * g, kEyeRy * g},
      {"right_eye", kEyeDx, kEyeDy, kEyeRx * g, kEyeRy * g},
      {"nose", 0, kNoseDy, kNoseHalfW * g, kNoseHalfH * g},
      {"mouth", 0, kMouthDy, kMouthRx * g, kMouthRy * g},
  };
}

bool in_triangle(double x, double y, double ax, double ay, double bx, double by, double cx,
                 double cy) {
  auto edge = [](double px, double py, double qx, double qy, double rx, double ry) {
    return (qx - px) * (ry - py) - (qy - py) * (rx - px);
  };
  const double e0 = edge(ax, ay, bx, by, x, y);
  const double e1 = edge(bx, by, cx, cy, x, y);
  const double e2 = edge(cx, cy, ax, ay, x, y);
  return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
}

// Lower median from a coordinate histogram.
int histogram_median(const std::vector<int>& hist, int total) {
  const int want = (total - 1) / 2 + 1;
  int cum = 0;
  for (std::size_t v = 0; v < hist.size(); ++v) {
    cum += hist[v];
    if (cum >= want) return static_cast<int>(v);
  }
  return -1;
}

}  // namespace

std::array<double, 3> class_color(int cls) { return kColors.at(static_cast<std::size_t>(cls)); }

void SynthSpec::validate() const {
  if (count < 0) throw ConfigError("synth.count must be >= 0");
  if (val_count < 0 || test_count < 0 || val_count + test_count > count) {
    throw ConfigError("synth.val_count + synth.test_count must not exceed synth.count");
  }
  if (image_size != 256) throw ConfigError("synth.image_size must be 256");
  if (!(face_jitter >= 0)) throw ConfigError("synth.face_jitter must be >= 0");
  if (!(part_jitter >= 0)) throw ConfigError("synth.part_jitter must be >= 0");
  if (!(size_jitter >= 0 && size_jitter < 0.5)) {
    throw ConfigError("synth.size_jitter must be in [0, 0.5)");
  }
  if (!(brow_rotation >= 0 && brow_rotation <= 45)) {
    throw ConfigError("synth.brow_rotation must be in [0, 45]");
  }
  if (!(color_jitter >= 0 && color_jitter <= 0.1)) {
    throw ConfigError("synth.color_jitter must be in [0, 0.1]");
  }
  if (!(noise >= 0 && noise <= 0.1)) throw ConfigError("synth.noise must be in [0, 0.1]");

  const auto parts = worst_case_extents(*this);
  std::vector<Box> boxes;
  const double c = image_size / 2.0;
  for (const auto& p : parts) {
    Box b{c + p.dy - p.half_h - part_jitter, c + p.dy + p.half_h + part_jitter,
          c + p.dx - p.half_w - part_jitter, c + p.dx + p.half_w + part_jitter};
    if (b.r0 - face_jitter < 0 || b.c0 - face_jitter < 0 ||
        b.r1 + face_jitter > image_size - 1 || b.c1 + face_jitter > image_size - 1) {
      throw ConfigError(std::string("synth.face_jitter/synth.part_jitter/synth.size_jitter: ") +
                        p.name + " can leave the frame");
    }
    boxes.push_back(b);
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      if (boxes[i].overlaps(boxes[j])) {
        throw ConfigError(std::string("synth.part_jitter/synth.size_jitter/synth.brow_rotation: ") +
                          parts[i].name + " and " + parts[j].name + " can overlap");
      }
    }
  }
}

SynthFace render_face(const SynthSpec& spec, int index) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed),
                    static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(index), 0x66616365u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto sym = [&](double a) { return a * (2.0 * unit(rng) - 1.0); };

  const int n = spec.image_size;
  const double fx = n / 2.0 + sym(spec.face_jitter), fy = n / 2.0 + sym(spec.face_jitter);
  auto size = [&] { return 1.0 + sym(spec.size_jitter); };
  auto jit = [&] { return sym(spec.part_jitter); };

  struct Brow { double cx, cy, hw, hh, angle; };
  struct Ell { double cx, cy, rx, ry; };
  Brow brows[2];
  Ell eyes[2];
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? -1.0 : 1.0;
    const double g = size();
    brows[side] = {fx + sx * kBrowDx + jit(), fy + kBrowDy + jit(), kBrowHalfW * g,
                   kBrowHalfH * g, sym(spec.brow_rotation) * std::numbers::pi / 180.0};
  }
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? -1.0 : 1.0;
    const double g = size();
    eyes[side] = {fx + sx * kEyeDx + jit(), fy + kEyeDy + jit(), kEyeRx * g, kEyeRy * g};
  }
  const double nose_g = size();
  const double ncx = fx + jit(), ncy = fy + kNoseDy + jit();
  const double nhw = kNoseHalfW * nose_g, nhh = kNoseHalfH * nose_g;
  const double mouth_g = size();
  const Ell mouth{fx + jit(), fy + kMouthDy + jit(), kMouthRx * mouth_g, kMouthRy * mouth_g};

  std::array<std::array<double, 3>, kNumFaceClasses> colors = kColors;
  for (auto& col : colors) {
    for (double& v : col) v += sym(spec.color_jitter);
  }
  std::array<double, 3> backdrop;
  for (double& v : backdrop) v = 0.1 + 0.25 * unit(rng);

  SynthFace face{Tensor3(n, n, 3), LabelMap(n, n, kNumFaceClasses), {}};
  auto in_ellipse = [](const Ell& e, double x, double y) {
    const double dx = (x - e.cx) / e.rx, dy = (y - e.cy) / e.ry;
    return dx * dx + dy * dy <= 1.0;
  };
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double x = c, y = r;
      int cls = -1;  // -1: backdrop outside the face
      const double fdx = (x - fx) / kFaceRx, fdy = (y - fy) / kFaceRy;
      if (fdx * fdx + fdy * fdy <= 1.0) cls = kBackground;
      for (int side = 0; side < 2; ++side) {
        const Brow& b = brows[side];
        const double dx = x - b.cx, dy = y - b.cy;
        const double u = std::cos(b.angle) * dx + std::sin(b.angle) * dy;
        const double v = -std::sin(b.angle) * dx + std::cos(b.angle) * dy;
        if (std::abs(u) <= b.hw && std::abs(v) <= b.hh) cls = side == 0 ? kLeftEyebrow : kRightEyebrow;
        if (in_ellipse(eyes[side], x, y)) cls = side == 0 ? kLeftEye : kRightEye;
      }
      if (in_triangle(x, y, ncx, ncy - nhh, ncx - nhw, ncy + nhh, ncx + nhw, ncy + nhh)) {
        cls = kNose;
      }
      if (in_ellipse(mouth, x, y)) {
        const double t = (y - mouth.cy) / mouth.ry;
        cls = t < -kLipSplit ? kUpperLip : (t <= kLipSplit ? kInnerMouth : kLowerLip);
      }
      const auto& base = cls < 0 ? backdrop : colors[static_cast<std::size_t>(cls)];
      for (int k = 0; k < 3; ++k) face.image(r, c, k) = base[k] + sym(spec.noise);
      face.labels(r, c) = static_cast<std::uint8_t>(std::max(cls, 0));
    }
  }

  for (std::size_t p = 0; p < kAllParts.size(); ++p) {
    const auto classes = part_classes(kAllParts[p]);
    std::vector<int> rows(static_cast<std::size_t>(n)), cols(static_cast<std::size_t>(n));
    int total = 0;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        if (std::find(classes.begin(), classes.end(), face.labels(r, c)) != classes.end()) {
          ++rows[r];
          ++cols[c];
          ++total;
        }
      }
    }
    if (total == 0) {
      throw ConfigError("synthetic face " + std::to_string(index) + " lost part " +
                        std::string(part_name(kAllParts[p])));
    }
    face.medians[p] = {histogram_median(rows, total), histogram_median(cols, total)};
  }
  return face;
}

SynthDataset generate_synthetic(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "labels");

  std::ostringstream manifest, medians;
  manifest << "# synthetic faces: seed " << spec.seed << ", " << spec.count << " images\n";
  medians << "image";
  for (PartId p : kAllParts) medians << ',' << part_name(p) << "_row," << part_name(p) << "_col";
  medians << '\n';

  std::uint32_t crc = io::checksum(std::span<const std::uint8_t>{});
  const int n_train = spec.count - spec.val_count - spec.test_count;
  for (int i = 0; i < spec.count; ++i) {
    const SynthFace face = render_face(spec, i);
    char name[32];
    std::snprintf(name, sizeof name, "face_%05d", i);
    const auto img_rel = fs::path("images") / (std::string(name) + ".tns");
    const auto lbl_rel = fs::path("labels") / (std::string(name) + ".lbl");
    const auto img_bytes = io::encode_tensor(face.image);
    const auto lbl_bytes = io::encode_labels(face.labels);
    detail::write_file(out_dir / img_rel, img_bytes);
    detail::write_file(out_dir / lbl_rel, lbl_bytes);
    crc = io::checksum_update(crc, img_bytes);
    crc = io::checksum_update(crc, lbl_bytes);

    const char* split = i < n_train ? "train" : (i < n_train + spec.val_count ? "val" : "test");
    manifest << img_rel.generic_string() << ' ' << lbl_rel.generic_string() << ' ' << split
             << '\n';
    medians << name;
    for (const auto& m : face.medians) medians << ',' << m.row << ',' << m.col;
    medians << '\n';
  }

  SynthDataset ds;
  ds.manifest = out_dir / "manifest.txt";
  ds.medians = out_dir / "medians.csv";
  const std::string man = manifest.str(), med = medians.str();
  detail::write_file(ds.manifest, std::vector<std::uint8_t>(man.begin(), man.end()));
  detail::write_file(ds.medians, std::vector<std::uint8_t>(med.begin(), med.end()));
  crc = io::checksum_update(crc, std::span(reinterpret_cast<const std::uint8_t*>(man.data()), man.size()));
  crc = io::checksum_update(crc, std::span(reinterpret_cast<const std::uint8_t*>(med.data()), med.size()));
  ds.checksum = crc;
  ds.count = spec.count;
  return ds;
}

}  // namespace icnn
