#include "icnn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "icnn/errors.hpp"

namespace icnn {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void check_conv_shapes(const Tensor3& input, const Tensor4& kernel) {
  if (input.empty()) throw ShapeError("conv2d_same: empty input");
  if (kernel.in_channels() != input.channels()) {
    throw ConfigError("conv2d_same: kernel expects " + std::to_string(kernel.in_channels()) +
                      " input channels, got " + std::to_string(input.channels()));
  }
  if (kernel.kh() % 2 == 0 || kernel.kw() % 2 == 0) {
    throw ConfigError("conv2d_same: kernel spatial dims must be odd");
  }
}

// Row p = ((i - r0)*W + j) holds the receptive field of output pixel (i, j), i in [r0, r1),
// laid out as (u, v, c) to match the kernel's row ordering. Out-of-frame taps are zero.
void im2col(const Tensor3& input, int kh, int kw, int r0, int r1, RowMatrix& cols) {
  const int h = input.height(), w = input.width(), c = input.channels();
  const int ph = kh / 2, pw = kw / 2;
  cols.resize(static_cast<Eigen::Index>(r1 - r0) * w, static_cast<Eigen::Index>(kh) * kw * c);
  const double* src = input.data().data();
  for (int i = r0; i < r1; ++i) {
    for (int j = 0; j < w; ++j) {
      double* row = cols.data() + (static_cast<std::size_t>(i - r0) * w + j) * cols.cols();
      for (int u = 0; u < kh; ++u) {
        const int si = i + u - ph;
        for (int v = 0; v < kw; ++v) {
          const int sj = j + v - pw;
          double* dst = row + (static_cast<std::size_t>(u) * kw + v) * c;
          if (si < 0 || si >= h || sj < 0 || sj >= w) {
            std::fill(dst, dst + c, 0.0);
          } else {
            const double* s = src + (static_cast<std::size_t>(si) * w + sj) * c;
            std::copy(s, s + c, dst);
          }
        }
      }
    }
  }
}

void col2im_add(const RowMatrix& cols, int kh, int kw, int r0, int r1, Tensor3& grad_input) {
  const int h = grad_input.height(), w = grad_input.width(), c = grad_input.channels();
  const int ph = kh / 2, pw = kw / 2;
  double* dst = grad_input.data().data();
  for (int i = r0; i < r1; ++i) {
    for (int j = 0; j < w; ++j) {
      const double* row = cols.data() + (static_cast<std::size_t>(i - r0) * w + j) * cols.cols();
      for (int u = 0; u < kh; ++u) {
        const int si = i + u - ph;
        if (si < 0 || si >= h) continue;
        for (int v = 0; v < kw; ++v) {
          const int sj = j + v - pw;
          if (sj < 0 || sj >= w) continue;
          const double* s = row + (static_cast<std::size_t>(u) * kw + v) * c;
          double* d = dst + (static_cast<std::size_t>(si) * w + sj) * c;
          for (int k = 0; k < c; ++k) d[k] += s[k];
        }
      }
    }
  }
}

// Image rows per im2col tile, sized so one tile stays near 256 KiB.
int tile_rows(int width, Eigen::Index taps) {
  const std::size_t row_bytes = static_cast<std::size_t>(width) * taps * sizeof(double);
  return static_cast<int>(std::max<std::size_t>(1, (256u << 10) / std::max<std::size_t>(row_bytes, 1)));
}

RowMatrix& scratch_columns() {
  thread_local RowMatrix cols;
  return cols;
}

}  // namespace

Tensor3 conv2d_same(const Tensor3& input, const Tensor4& kernel, const BiasVec& bias) {
  check_conv_shapes(input, kernel);
  if (bias.size() != static_cast<std::size_t>(kernel.out_channels())) {
    throw ConfigError("conv2d_same: bias length does not match kernel out_channels");
  }
  const int h = input.height(), w = input.width(), q = kernel.out_channels();
  const Eigen::Index pixels = static_cast<Eigen::Index>(h) * w;
  const Eigen::Index taps = static_cast<Eigen::Index>(kernel.kh()) * kernel.kw() *
                            kernel.in_channels();

  Tensor3 out(h, w, q);
  MatrixMap out_mat(out.data().data(), pixels, q);
  ConstMatrixMap k_mat(kernel.data().data(), taps, q);
  if (kernel.kh() == 1 && kernel.kw() == 1) {
    ConstMatrixMap in_mat(input.data().data(), pixels, taps);
    out_mat.noalias() = in_mat * k_mat;
  } else {
    RowMatrix& cols = scratch_columns();
    const int step = tile_rows(w, taps);
    for (int r0 = 0; r0 < h; r0 += step) {
      const int r1 = std::min(h, r0 + step);
      im2col(input, kernel.kh(), kernel.kw(), r0, r1, cols);
      out_mat.middleRows(static_cast<Eigen::Index>(r0) * w, cols.rows()).noalias() = cols * k_mat;
    }
  }
  Eigen::Map<const Eigen::RowVectorXd> b(bias.values.data(), q);
  out_mat.rowwise() += b;
  return out;
}

ConvGrads conv2d_same_backward(const Tensor3& input, const Tensor4& kernel,
                               const Tensor3& grad_out) {
  check_conv_shapes(input, kernel);
  const int h = input.height(), w = input.width(), q = kernel.out_channels();
  if (grad_out.height() != h || grad_out.width() != w || grad_out.channels() != q) {
    throw ShapeError("conv2d_same_backward: grad_out shape mismatch");
  }
  const Eigen::Index pixels = static_cast<Eigen::Index>(h) * w;
  const Eigen::Index taps = static_cast<Eigen::Index>(kernel.kh()) * kernel.kw() *
                            kernel.in_channels();

  ConvGrads g{Tensor3(h, w, input.channels()),
              Tensor4(kernel.kh(), kernel.kw(), kernel.in_channels(), q),
              BiasVec(static_cast<std::size_t>(q))};

  ConstMatrixMap g_out(grad_out.data().data(), pixels, q);
  ConstMatrixMap k_mat(kernel.data().data(), taps, q);
  MatrixMap gk(g.kernel.data().data(), taps, q);
  Eigen::Map<Eigen::RowVectorXd> gb(g.bias.values.data(), q);
  gb = g_out.colwise().sum();

  if (kernel.kh() == 1 && kernel.kw() == 1) {
    ConstMatrixMap in_mat(input.data().data(), pixels, taps);
    gk.noalias() = in_mat.transpose() * g_out;
    MatrixMap gi(g.input.data().data(), pixels, taps);
    gi.noalias() = g_out * k_mat.transpose();
  } else {
    RowMatrix& cols = scratch_columns();
    gk.setZero();
    const int step = tile_rows(w, taps);
    for (int r0 = 0; r0 < h; r0 += step) {
      const int r1 = std::min(h, r0 + step);
      im2col(input, kernel.kh(), kernel.kw(), r0, r1, cols);
      const auto g_tile = g_out.middleRows(static_cast<Eigen::Index>(r0) * w, cols.rows());
      gk.noalias() += cols.transpose() * g_tile;
      cols.noalias() = g_tile * k_mat.transpose();
      col2im_add(cols, kernel.kh(), kernel.kw(), r0, r1, g.input);
    }
  }
  return g;
}

Tensor3 tanh_map(const Tensor3& input) {
  Tensor3 out = input;
  for (double& v : out.data()) v = std::tanh(v);
  return out;
}

Tensor3 mean_pool2(const Tensor3& input) {
  const int h = input.height(), w = input.width(), c = input.channels();
  const int oh = (h + 1) / 2, ow = (w + 1) / 2;
  Tensor3 out(oh, ow, c);
  for (int i = 0; i < oh; ++i) {
    const int r1 = std::min(2 * i + 1, h - 1);
    for (int j = 0; j < ow; ++j) {
      const int c1 = std::min(2 * j + 1, w - 1);
      const double count = static_cast<double>((r1 - 2 * i + 1) * (c1 - 2 * j + 1));
      for (int k = 0; k < c; ++k) {
        double s = 0.0;
        for (int r = 2 * i; r <= r1; ++r) {
          for (int cc = 2 * j; cc <= c1; ++cc) s += input(r, cc, k);
        }
        out(i, j, k) = s / count;
      }
    }
  }
  return out;
}

Tensor3 mean_pool2_backward(const Tensor3& grad_out, int in_height, int in_width) {
  if (grad_out.height() != (in_height + 1) / 2 || grad_out.width() != (in_width + 1) / 2) {
    throw ShapeError("mean_pool2_backward: grad_out shape mismatch");
  }
  const int c = grad_out.channels();
  Tensor3 g(in_height, in_width, c);
  for (int r = 0; r < in_height; ++r) {
    const int i = r / 2;
    const int rows = std::min(2 * i + 1, in_height - 1) - 2 * i + 1;
    for (int col = 0; col < in_width; ++col) {
      const int j = col / 2;
      const int cols = std::min(2 * j + 1, in_width - 1) - 2 * j + 1;
      const double scale = 1.0 / (rows * cols);
      for (int k = 0; k < c; ++k) g(r, col, k) = grad_out(i, j, k) * scale;
    }
  }
  return g;
}

MaxPoolResult max_pool2_indexed(const Tensor3& input) {
  const int h = input.height(), w = input.width(), c = input.channels();
  const int oh = (h + 1) / 2, ow = (w + 1) / 2;
  MaxPoolResult res{Tensor3(oh, ow, c), std::vector<std::uint32_t>(static_cast<std::size_t>(oh) * ow * c)};
  for (int i = 0; i < oh; ++i) {
    const int r1 = std::min(2 * i + 1, h - 1);
    for (int j = 0; j < ow; ++j) {
      const int c1 = std::min(2 * j + 1, w - 1);
      for (int k = 0; k < c; ++k) {
        std::size_t best = input.index(2 * i, 2 * j, k);
        double best_v = input.data()[best];
        for (int r = 2 * i; r <= r1; ++r) {
          for (int cc = 2 * j; cc <= c1; ++cc) {
            const std::size_t idx = input.index(r, cc, k);
            if (input.data()[idx] > best_v) {
              best_v = input.data()[idx];
              best = idx;
            }
          }
        }
        res.output(i, j, k) = best_v;
        res.argmax[res.output.index(i, j, k)] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return res;
}

Tensor3 max_pool2(const Tensor3& input) { return max_pool2_indexed(input).output; }

Tensor3 max_pool2_backward(const Tensor3& grad_out, std::span<const std::uint32_t> argmax,
                           int in_height, int in_width) {
  if (argmax.size() != grad_out.size()) {
    throw ShapeError("max_pool2_backward: argmax size mismatch");
  }
  Tensor3 g(in_height, in_width, grad_out.channels());
  auto gd = g.data();
  auto go = grad_out.data();
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= gd.size()) throw ShapeError("max_pool2_backward: argmax out of range");
    gd[argmax[i]] += go[i];
  }
  return g;
}

Tensor3 upsample_nn2(const Tensor3& input) {
  const int h = input.height(), w = input.width(), c = input.channels();
  Tensor3 out(2 * h, 2 * w, c);
  for (int r = 0; r < 2 * h; ++r) {
    for (int col = 0; col < 2 * w; ++col) {
      const double* s = input.data().data() + input.index(r / 2, col / 2, 0);
      double* d = out.data().data() + out.index(r, col, 0);
      std::copy(s, s + c, d);
    }
  }
  return out;
}

Tensor3 upsample_nn2_backward(const Tensor3& grad_out) {
  if (grad_out.height() % 2 != 0 || grad_out.width() % 2 != 0) {
    throw ShapeError("upsample_nn2_backward: grad_out dims must be even");
  }
  const int h = grad_out.height() / 2, w = grad_out.width() / 2, c = grad_out.channels();
  Tensor3 g(h, w, c);
  for (int r = 0; r < 2 * h; ++r) {
    for (int col = 0; col < 2 * w; ++col) {
      for (int k = 0; k < c; ++k) g(r / 2, col / 2, k) += grad_out(r, col, k);
    }
  }
  return g;
}

Tensor3 concat_channels(std::span<const Tensor3* const> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const int h = parts[0]->height(), w = parts[0]->width();
  int total = 0;
  for (const Tensor3* p : parts) {
    if (p->height() != h || p->width() != w) {
      throw ShapeError("concat_channels: spatial mismatch " + std::to_string(p->height()) + "x" +
                       std::to_string(p->width()) + " vs " + std::to_string(h) + "x" +
                       std::to_string(w));
    }
    total += p->channels();
  }
  Tensor3 out(h, w, total);
  double* d = out.data().data();
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  for (std::size_t px = 0; px < pixels; ++px) {
    for (const Tensor3* p : parts) {
      const int c = p->channels();
      const double* s = p->data().data() + px * c;
      d = std::copy(s, s + c, d);
    }
  }
  return out;
}

Tensor3 concat_channels(std::initializer_list<const Tensor3*> parts) {
  return concat_channels(std::span<const Tensor3* const>(parts.begin(), parts.size()));
}

Tensor3 slice_channels(const Tensor3& input, int begin, int count) {
  if (begin < 0 || count < 1 || begin + count > input.channels()) {
    throw ShapeError("slice_channels: range out of bounds");
  }
  Tensor3 out(input.height(), input.width(), count);
  const std::size_t pixels = static_cast<std::size_t>(input.height()) * input.width();
  const int c = input.channels();
  for (std::size_t px = 0; px < pixels; ++px) {
    const double* s = input.data().data() + px * c + begin;
    std::copy(s, s + count, out.data().data() + px * count);
  }
  return out;
}

Tensor3 softmax_channels(const Tensor3& logits) {
  const int l = logits.channels();
  if (l < 2) throw ShapeError("softmax_channels: need at least 2 channels");
  Tensor3 out = logits;
  const std::size_t pixels = static_cast<std::size_t>(logits.height()) * logits.width();
  double* d = out.data().data();
  for (std::size_t px = 0; px < pixels; ++px, d += l) {
    const double m = *std::max_element(d, d + l);
    double sum = 0.0;
    for (int k = 0; k < l; ++k) {
      d[k] = std::exp(d[k] - m);
      sum += d[k];
    }
    for (int k = 0; k < l; ++k) d[k] /= sum;
  }
  return out;
}

Tensor3 flip_horizontal(const Tensor3& input) {
  const int h = input.height(), w = input.width(), c = input.channels();
  Tensor3 out(h, w, c);
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      const double* s = input.data().data() + input.index(r, w - 1 - col, 0);
      std::copy(s, s + c, out.data().data() + out.index(r, col, 0));
    }
  }
  return out;
}

LabelMap flip_horizontal(const LabelMap& labels) {
  LabelMap out = labels;
  for (int r = 0; r < labels.height(); ++r) {
    for (int col = 0; col < labels.width(); ++col) {
      out(r, col) = labels(r, labels.width() - 1 - col);
    }
  }
  return out;
}

}  // namespace icnn
