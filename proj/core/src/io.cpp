#include "icnn/io.hpp"

#include <zlib.h>

#include <limits>

#include "binary_io.hpp"
#include "icnn/errors.hpp"

namespace icnn::io {
namespace {

constexpr std::string_view kTensorMagic = "ICNNTNSR";
constexpr std::string_view kLabelMagic = "ICNNLBLS";
// Upper bound on elements so a corrupted header cannot trigger a huge allocation.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor3& t) {
  detail::ByteWriter w;
  w.bytes(kTensorMagic);
  w.u16(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(t.height()));
  w.u32(static_cast<std::uint32_t>(t.width()));
  w.u32(static_cast<std::uint32_t>(t.channels()));
  for (double v : t.data()) w.f32(static_cast<float>(v));
  w.finish_with_crc();
  return w.buffer();
}

Tensor3 decode_tensor(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kTensorMagic, "tensor");
  r.verify_crc("tensor");
  r.expect_version(kFormatVersion, "tensor");
  const std::size_t dims_at = r.offset();
  const std::uint64_t h = r.u32(), w = r.u32(), c = r.u32();
  if (h == 0 || w == 0 || c == 0 || h * w * c > kMaxElements ||
      h > std::numeric_limits<int>::max() || w > std::numeric_limits<int>::max() ||
      c > std::numeric_limits<int>::max()) {
    throw FormatError("tensor dims out of range", dims_at);
  }
  const std::uint64_t n = h * w * c;
  if (r.remaining() - 4 != 4 * n) {
    throw FormatError("tensor payload length does not match dims", r.offset());
  }
  std::vector<double> data(n);
  for (auto& v : data) v = r.f32();
  r.expect_end("tensor");
  return Tensor3(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), std::move(data));
}

std::vector<std::uint8_t> encode_labels(const LabelMap& labels) {
  detail::ByteWriter w;
  w.bytes(kLabelMagic);
  w.u16(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(labels.height()));
  w.u32(static_cast<std::uint32_t>(labels.width()));
  w.u8(static_cast<std::uint8_t>(labels.num_classes()));
  for (auto v : labels.data()) w.u8(v);
  w.finish_with_crc();
  return w.buffer();
}

LabelMap decode_labels(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kLabelMagic, "label map");
  r.verify_crc("label map");
  r.expect_version(kFormatVersion, "label map");
  const std::size_t dims_at = r.offset();
  const std::uint64_t h = r.u32(), w = r.u32();
  if (h == 0 || w == 0 || h * w > kMaxElements) {
    throw FormatError("label map dims out of range", dims_at);
  }
  const std::size_t classes_at = r.offset();
  const int classes = r.u8();
  if (classes < 1) throw FormatError("label map num_classes must be >= 1", classes_at);
  if (r.remaining() - 4 != h * w) {
    throw FormatError("label map payload length does not match dims", r.offset());
  }
  std::vector<std::uint8_t> data(h * w);
  for (auto& v : data) {
    const std::size_t at = r.offset();
    v = r.u8();
    if (v >= classes) {
      throw FormatError("label " + std::to_string(v) + " >= num_classes " +
                            std::to_string(classes),
                        at);
    }
  }
  r.expect_end("label map");
  return LabelMap(static_cast<int>(h), static_cast<int>(w), classes, std::move(data));
}

void write_tensor(const std::filesystem::path& path, const Tensor3& t) {
  detail::write_file(path, encode_tensor(t));
}

Tensor3 read_tensor(const std::filesystem::path& path) {
  return decode_tensor(detail::read_file(path));
}

void write_labels(const std::filesystem::path& path, const LabelMap& labels) {
  detail::write_file(path, encode_labels(labels));
}

LabelMap read_labels(const std::filesystem::path& path) {
  return decode_labels(detail::read_file(path));
}

std::uint32_t checksum(std::span<const std::uint8_t> bytes) { return detail::crc32(bytes); }

std::uint32_t checksum_update(std::uint32_t crc, std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace icnn::io
