#include "icnn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "icnn/augment.hpp"
#include "icnn/errors.hpp"

namespace icnn {

PointF ScaleInfo::to_resized(PointF p) const {
  return {(p.row + 0.5) * scale - 0.5 + pad_row, (p.col + 0.5) * scale - 0.5 + pad_col};
}

PointF ScaleInfo::to_original(PointF q) const {
  return {(q.row - pad_row + 0.5) / scale - 0.5, (q.col - pad_col + 0.5) / scale - 0.5};
}

PixelCoord ScaleInfo::to_original_pixel(PixelCoord q) const {
  const PointF p = to_original({static_cast<double>(q.row), static_cast<double>(q.col)});
  return {std::clamp(static_cast<int>(std::lround(p.row)), 0, source_height - 1),
          std::clamp(static_cast<int>(std::lround(p.col)), 0, source_width - 1)};
}

namespace {

ScaleInfo make_scale(int h, int w, int target) {
  if (target < 1) throw ConfigError("resize target must be positive");
  if (h < 1 || w < 1) throw ShapeError("resize_to: degenerate image");
  if (std::min(h, w) < target) {
    throw ShapeError("resize_to: short side " + std::to_string(std::min(h, w)) +
                     " is smaller than target " + std::to_string(target));
  }
  ScaleInfo info;
  info.source_height = h;
  info.source_width = w;
  info.scale = static_cast<double>(target) / std::max(h, w);
  const int nh = std::clamp(static_cast<int>(std::lround(h * info.scale)), 1, target);
  const int nw = std::clamp(static_cast<int>(std::lround(w * info.scale)), 1, target);
  info.pad_row = (target - nh) / 2;
  info.pad_col = (target - nw) / 2;
  return info;
}

bool inside_content(const ScaleInfo& info, int target, int r, int c) {
  const int nh = std::clamp(static_cast<int>(std::lround(info.source_height * info.scale)), 1, target);
  const int nw = std::clamp(static_cast<int>(std::lround(info.source_width * info.scale)), 1, target);
  return r >= info.pad_row && r < info.pad_row + nh && c >= info.pad_col && c < info.pad_col + nw;
}

}  // namespace

std::pair<Tensor3, ScaleInfo> resize_to(const Tensor3& image, int target) {
  const ScaleInfo info = make_scale(image.height(), image.width(), target);
  const int h = image.height(), w = image.width(), ch = image.channels();
  if (h == target && w == target) return {image, info};

  const auto mean = channel_means(image);
  Tensor3 out(target, target, ch);
  for (int r = 0; r < target; ++r) {
    for (int c = 0; c < target; ++c) {
      if (!inside_content(info, target, r, c)) {
        for (int k = 0; k < ch; ++k) out(r, c, k) = mean[k];
        continue;
      }
      const PointF s = info.to_original({static_cast<double>(r), static_cast<double>(c)});
      const double sy = std::clamp(s.row, 0.0, h - 1.0), sx = std::clamp(s.col, 0.0, w - 1.0);
      const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
      const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double fy = sy - y0, fx = sx - x0;
      for (int k = 0; k < ch; ++k) {
        out(r, c, k) = (1 - fy) * ((1 - fx) * image(y0, x0, k) + fx * image(y0, x1, k)) +
                       fy * ((1 - fx) * image(y1, x0, k) + fx * image(y1, x1, k));
      }
    }
  }
  return {std::move(out), info};
}

LabelMap resize_labels(const LabelMap& labels, const ScaleInfo& info, int target) {
  if (labels.height() != info.source_height || labels.width() != info.source_width) {
    throw ShapeError("resize_labels: label dims do not match the scale info");
  }
  if (labels.height() == target && labels.width() == target) return labels;
  LabelMap out(target, target, labels.num_classes());
  for (int r = 0; r < target; ++r) {
    for (int c = 0; c < target; ++c) {
      if (!inside_content(info, target, r, c)) continue;
      const PixelCoord s = info.to_original_pixel({r, c});
      out(r, c) = labels(s.row, s.col);
    }
  }
  return out;
}

std::optional<PixelCoord> median_point(const LabelMap& labels, std::span<const int> classes) {
  std::vector<int> rows, cols;
  for (int r = 0; r < labels.height(); ++r) {
    for (int c = 0; c < labels.width(); ++c) {
      const int v = labels(r, c);
      if (std::find(classes.begin(), classes.end(), v) != classes.end()) {
        rows.push_back(r);
        cols.push_back(c);
      }
    }
  }
  if (rows.empty()) return std::nullopt;
  const std::size_t mid = (rows.size() - 1) / 2;
  std::nth_element(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(mid), rows.end());
  std::nth_element(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(mid), cols.end());
  return PixelCoord{rows[mid], cols[mid]};
}

PatchOrigin patch_origin(int height, int width, PixelCoord center, int size) {
  if (size < 1 || height < size || width < size) {
    throw ShapeError("patch of size " + std::to_string(size) + " does not fit a " +
                     std::to_string(height) + "x" + std::to_string(width) + " image");
  }
  return {std::clamp(center.row - size / 2, 0, height - size),
          std::clamp(center.col - size / 2, 0, width - size)};
}

std::pair<Tensor3, PatchOrigin> extract_patch(const Tensor3& image, PixelCoord center, int size) {
  const PatchOrigin o = patch_origin(image.height(), image.width(), center, size);
  const int ch = image.channels();
  Tensor3 patch(size, size, ch);
  for (int r = 0; r < size; ++r) {
    const double* src = image.data().data() + image.index(o.row + r, o.col, 0);
    std::copy(src, src + static_cast<std::ptrdiff_t>(size) * ch,
              patch.data().data() + patch.index(r, 0, 0));
  }
  return {std::move(patch), o};
}

LabelMap crop_labels(const LabelMap& labels, PatchOrigin origin, int size) {
  if (origin.row < 0 || origin.col < 0 || origin.row + size > labels.height() ||
      origin.col + size > labels.width()) {
    throw ShapeError("crop_labels: window outside the label map");
  }
  LabelMap out(size, size, labels.num_classes());
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) out(r, c) = labels(origin.row + r, origin.col + c);
  }
  return out;
}

void paste_patch(Tensor3& canvas, const Tensor3& patch, PatchOrigin origin) {
  if (patch.channels() != canvas.channels() || origin.row < 0 || origin.col < 0 ||
      origin.row + patch.height() > canvas.height() ||
      origin.col + patch.width() > canvas.width()) {
    throw ShapeError("paste_patch: patch does not fit the canvas");
  }
  for (int r = 0; r < patch.height(); ++r) {
    for (int c = 0; c < patch.width(); ++c) {
      for (int k = 0; k < patch.channels(); ++k) {
        canvas(origin.row + r, origin.col + c, k) = patch(r, c, k);
      }
    }
  }
}

}  // namespace icnn
