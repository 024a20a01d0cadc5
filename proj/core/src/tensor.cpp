#include "icnn/tensor.hpp"

#include <string>

#include "icnn/errors.hpp"

namespace icnn {
namespace {

void check_dims(int h, int w, int c) {
  if (h < 1 || w < 1 || c < 1) {
    throw ShapeError("tensor dims must be positive, got " + std::to_string(h) + "x" +
                     std::to_string(w) + "x" + std::to_string(c));
  }
}

}  // namespace

Tensor3::Tensor3(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Tensor3::Tensor3(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match dims");
  }
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
  if (!same_shape(other)) throw ShapeError("tensor += with mismatched shapes");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor4::Tensor4(int kh, int kw, int in_channels, int out_channels, double fill)
    : kh_(kh), kw_(kw), in_(in_channels), out_(out_channels) {
  if (kh < 1 || kw < 1 || in_channels < 1 || out_channels < 1) {
    throw ConfigError("kernel dims must be positive");
  }
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ConfigError("kernel spatial dims must be odd, got " + std::to_string(kh) + "x" +
                      std::to_string(kw));
  }
  data_.assign(static_cast<std::size_t>(kh) * kw * in_channels * out_channels, fill);
}

LabelMap::LabelMap(int height, int width, int num_classes, std::uint8_t fill)
    : height_(height), width_(width), num_classes_(num_classes) {
  check_dims(height, width, 1);
  if (num_classes < 1 || num_classes > 256) throw ConfigError("num_classes out of range");
  if (fill >= num_classes) throw DataError("label fill value out of range");
  data_.assign(static_cast<std::size_t>(height) * width, fill);
}

LabelMap::LabelMap(int height, int width, int num_classes, std::vector<std::uint8_t> data)
    : height_(height), width_(width), num_classes_(num_classes), data_(std::move(data)) {
  check_dims(height, width, 1);
  if (num_classes < 1 || num_classes > 256) throw ConfigError("num_classes out of range");
  if (data_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("label data length does not match dims");
  }
  for (auto v : data_) {
    if (v >= num_classes) {
      throw DataError("label " + std::to_string(v) + " >= num_classes " +
                      std::to_string(num_classes));
    }
  }
}

Tensor3 LabelMap::one_hot() const {
  Tensor3 out(height_, width_, num_classes_);
  for (std::size_t p = 0; p < data_.size(); ++p) {
    out.data()[p * num_classes_ + data_[p]] = 1.0;
  }
  return out;
}

LabelMap argmax_labels(const Tensor3& scores) {
  const int n = scores.channels();
  if (n > 256) throw ShapeError("argmax_labels supports at most 256 channels");
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(scores.height()) * scores.width());
  auto d = scores.data();
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const double* px = d.data() + p * n;
    int best = 0;
    for (int c = 1; c < n; ++c) {
      if (px[c] > px[best]) best = c;
    }
    labels[p] = static_cast<std::uint8_t>(best);
  }
  return LabelMap(scores.height(), scores.width(), n, std::move(labels));
}

}  // namespace icnn
