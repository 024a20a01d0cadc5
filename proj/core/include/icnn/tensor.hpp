#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace icnn {

/// Dense H×W×C array of doubles, row-major by (row, col, channel).
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int height, int width, int channels, double fill = 0.0);
  Tensor3(int height, int width, int channels, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }
  double& operator()(int row, int col, int ch) { return data_[index(row, col, ch)]; }
  double operator()(int row, int col, int ch) const { return data_[index(row, col, ch)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }

  bool same_shape(const Tensor3& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool operator==(const Tensor3& other) const = default;

  Tensor3& operator+=(const Tensor3& other);

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Convolution kernel with layout (kh, kw, in, out). Spatial dims must be odd.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(int kh, int kw, int in_channels, int out_channels, double fill = 0.0);

  int kh() const { return kh_; }
  int kw() const { return kw_; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int u, int v, int c, int q) const {
    return ((static_cast<std::size_t>(u) * kw_ + v) * in_ + c) * out_ + q;
  }
  double& operator()(int u, int v, int c, int q) { return data_[index(u, v, c, q)]; }
  double operator()(int u, int v, int c, int q) const { return data_[index(u, v, c, q)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Tensor4& other) const {
    return kh_ == other.kh_ && kw_ == other.kw_ && in_ == other.in_ && out_ == other.out_;
  }
  bool operator==(const Tensor4& other) const = default;

 private:
  int kh_ = 0;
  int kw_ = 0;
  int in_ = 0;
  int out_ = 0;
  std::vector<double> data_;
};

/// One bias per output channel.
struct BiasVec {
  std::vector<double> values;

  BiasVec() = default;
  explicit BiasVec(std::size_t n, double fill = 0.0) : values(n, fill) {}
  explicit BiasVec(std::vector<double> v) : values(std::move(v)) {}
  std::size_t size() const { return values.size(); }
  bool operator==(const BiasVec&) const = default;
};

/// Learnable parameters of one convolution layer.
struct ConvParams {
  Tensor4 kernel;
  BiasVec bias;

  ConvParams() = default;
  ConvParams(int kh, int kw, int in_channels, int out_channels)
      : kernel(kh, kw, in_channels, out_channels), bias(static_cast<std::size_t>(out_channels)) {}
  bool operator==(const ConvParams&) const = default;
};

/// Per-pixel class indices. `num_classes` bounds every entry.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int height, int width, int num_classes, std::uint8_t fill = 0);
  LabelMap(int height, int width, int num_classes, std::vector<std::uint8_t> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int num_classes() const { return num_classes_; }
  std::size_t size() const { return data_.size(); }

  std::uint8_t& operator()(int row, int col) {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  std::uint8_t operator()(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  std::span<std::uint8_t> data() { return data_; }
  std::span<const std::uint8_t> data() const { return data_; }

  bool same_dims(const LabelMap& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool operator==(const LabelMap&) const = default;

  /// H×W×num_classes tensor with a single 1 per pixel.
  Tensor3 one_hot() const;

 private:
  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Per-pixel argmax over channels (first maximum wins).
LabelMap argmax_labels(const Tensor3& scores);

}  // namespace icnn
