#pragma once

// Little-endian byte buffers with CRC32 trailers, shared by every on-disk format.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace icnn::detail {

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

class ByteWriter {
 public:
  void bytes(std::string_view s);
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);

  /// Appends the CRC32 of everything written so far.
  void finish_with_crc();
  const std::vector<std::uint8_t>& buffer() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; every failure throws FormatError with the current offset.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  void expect_magic(std::string_view magic, std::string_view what);
  void expect_version(std::uint16_t version, std::string_view what);
  std::string bytes(std::size_t n);
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();

  /// Validates the trailing CRC32 over all bytes before it. Call before parsing the body.
  void verify_crc(std::string_view what) const;
  /// Fails unless exactly the CRC trailer remains.
  void expect_end(std::string_view what) const;

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  /// Payload size excluding the 4-byte CRC trailer.
  std::size_t body_size() const { return data_.size() >= 4 ? data_.size() - 4 : 0; }

 private:
  void need(std::size_t n, std::string_view what = "field");
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never observe a partial file.
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace icnn::detail
