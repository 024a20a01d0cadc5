#include "icnn/augment.hpp"

#include <cmath>
#include <numbers>

#include "icnn/errors.hpp"

namespace icnn {

void AugmentSpec::validate() const {
  if (!(max_rotation_deg >= 0.0)) throw ConfigError("augment.max_rotation must be >= 0");
  if (!(scale_min > 0.0 && scale_min <= 1.0 && scale_max >= 1.0)) {
    throw ConfigError("augment scale range must be positive and contain 1.0");
  }
  if (!(max_shift >= 0.0)) throw ConfigError("augment.max_shift must be >= 0");
}

SimilarityTransform draw_transform(const AugmentSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  SimilarityTransform t;
  t.rotation_deg = uniform(-spec.max_rotation_deg, spec.max_rotation_deg);
  t.scale = uniform(spec.scale_min, spec.scale_max);
  t.shift_x = uniform(-spec.max_shift, spec.max_shift);
  t.shift_y = uniform(-spec.max_shift, spec.max_shift);
  return t;
}

std::vector<double> channel_means(const Tensor3& image) {
  std::vector<double> mean(static_cast<std::size_t>(image.channels()), 0.0);
  const std::size_t pixels = static_cast<std::size_t>(image.height()) * image.width();
  auto d = image.data();
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < image.channels(); ++c) mean[c] += d[p * image.channels() + c];
  }
  for (double& m : mean) m /= static_cast<double>(pixels);
  return mean;
}

std::pair<Tensor3, LabelMap> apply_transform(const Tensor3& image, const LabelMap& labels,
                                             const SimilarityTransform& t) {
  if (image.height() != labels.height() || image.width() != labels.width()) {
    throw ShapeError("augment: image and labels differ in size");
  }
  if (t.is_identity()) return {image, labels};

  const int h = image.height(), w = image.width(), ch = image.channels();
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double theta = t.rotation_deg * std::numbers::pi / 180.0;
  // Inverse map: p = R(−θ)·(p' − c − shift)/s + c.
  const double cos_t = std::cos(theta) / t.scale, sin_t = std::sin(theta) / t.scale;
  const auto mean = channel_means(image);

  Tensor3 out_img(h, w, ch);
  LabelMap out_lbl(h, w, labels.num_classes());
  auto pixel = [&](int r, int c, int k) {
    return (r < 0 || r >= h || c < 0 || c >= w) ? mean[k] : image(r, c, k);
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double dx = c - cx - t.shift_x, dy = r - cy - t.shift_y;
      const double sx = cos_t * dx + sin_t * dy + cx;
      const double sy = -sin_t * dx + cos_t * dy + cy;

      const int nr = static_cast<int>(std::lround(sy)), nc = static_cast<int>(std::lround(sx));
      out_lbl(r, c) = (nr < 0 || nr >= h || nc < 0 || nc >= w) ? 0 : labels(nr, nc);

      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      if (x0 < -1 || x0 >= w || y0 < -1 || y0 >= h) {
        for (int k = 0; k < ch; ++k) out_img(r, c, k) = mean[k];
        continue;
      }
      for (int k = 0; k < ch; ++k) {
        out_img(r, c, k) = (1 - fy) * ((1 - fx) * pixel(y0, x0, k) + fx * pixel(y0, x0 + 1, k)) +
                           fy * ((1 - fx) * pixel(y0 + 1, x0, k) + fx * pixel(y0 + 1, x0 + 1, k));
      }
    }
  }
  return {std::move(out_img), std::move(out_lbl)};
}

std::pair<Tensor3, LabelMap> augment(const Tensor3& image, const LabelMap& labels,
                                     const AugmentSpec& spec, std::mt19937_64& rng) {
  return apply_transform(image, labels, draw_transform(spec, rng));
}

Tensor3 normalize_image(const Tensor3& image) {
  Tensor3 out = image;
  auto d = out.data();
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(d.size());
  double sq = 0.0;
  for (double& v : d) {
    v -= mean;
    sq += v * v;
  }
  const double rms = std::sqrt(sq / static_cast<double>(d.size()));
  if (rms >= 1e-8) {
    for (double& v : d) v /= rms;
  }
  return out;
}

}  // namespace icnn
