#include "icnn/checkpoint.hpp"

#include "binary_io.hpp"
#include "icnn/errors.hpp"

namespace icnn {
namespace {

constexpr std::string_view kMagic = "ICNNCKPT";
constexpr std::uint32_t kMaxField = 1u << 16;

void write_block(detail::ByteWriter& w, std::uint32_t d0, std::uint32_t d1, std::uint32_t d2,
                 std::uint32_t d3, std::span<const double> values) {
  w.u32(d0);
  w.u32(d1);
  w.u32(d2);
  w.u32(d3);
  for (double v : values) w.f32(static_cast<float>(v));
}

void read_block(detail::ByteReader& r, std::uint32_t d0, std::uint32_t d1, std::uint32_t d2,
                std::uint32_t d3, std::span<double> out) {
  const std::size_t at = r.offset();
  const std::uint32_t a = r.u32(), b = r.u32(), c = r.u32(), d = r.u32();
  if (a != d0 || b != d1 || c != d2 || d != d3) {
    throw FormatError("parameter block dims (" + std::to_string(a) + "," + std::to_string(b) +
                          "," + std::to_string(c) + "," + std::to_string(d) +
                          ") do not match the stored configuration",
                      at);
  }
  for (double& v : out) v = static_cast<double>(r.f32());
}

std::uint32_t read_field(detail::ByteReader& r, const char* name) {
  const std::size_t at = r.offset();
  const std::uint32_t v = r.u32();
  if (v > kMaxField) throw FormatError(std::string("config field ") + name + " out of range", at);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ICNNConfig& config, const ICNNParams& params,
                                            const CheckpointMeta& meta) {
  validate_params(config, params);
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(config.num_columns));
  w.u32(static_cast<std::uint32_t>(config.num_labels));
  w.u32(static_cast<std::uint32_t>(config.interlink_rounds));
  for (const auto& row : config.maps_per_column) {
    for (int m : row) w.u32(static_cast<std::uint32_t>(m));
  }
  w.u32(static_cast<std::uint32_t>(config.kernel_size));
  w.u32(static_cast<std::uint32_t>(config.final_kernel_size));
  w.u32(static_cast<std::uint32_t>(config.input_channels));
  w.u32(static_cast<std::uint32_t>(config.input_height));
  w.u32(static_cast<std::uint32_t>(config.input_width));

  std::uint32_t sets = 0;
  params.for_each([&](const ConvParams&) { ++sets; });
  w.u32(2 * sets);
  params.for_each([&](const ConvParams& p) {
    const Tensor4& k = p.kernel;
    write_block(w, static_cast<std::uint32_t>(k.kh()), static_cast<std::uint32_t>(k.kw()),
                static_cast<std::uint32_t>(k.in_channels()),
                static_cast<std::uint32_t>(k.out_channels()), k.data());
    write_block(w, 1, 1, 1, static_cast<std::uint32_t>(p.bias.size()), p.bias.values);
  });

  w.u32(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [key, value] : meta) {
    w.u32(static_cast<std::uint32_t>(key.size()));
    w.bytes(key);
    w.u32(static_cast<std::uint32_t>(value.size()));
    w.bytes(value);
  }
  w.finish_with_crc();
  return w.buffer();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kMagic, "checkpoint");
  r.verify_crc("checkpoint");
  r.expect_version(kCheckpointVersion, "checkpoint");

  const std::size_t config_at = r.offset();
  ICNNConfig cfg;
  cfg.num_columns = static_cast<int>(read_field(r, "num_columns"));
  cfg.num_labels = static_cast<int>(read_field(r, "num_labels"));
  cfg.interlink_rounds = static_cast<int>(read_field(r, "interlink_rounds"));
  if (cfg.num_columns > 16 || cfg.interlink_rounds > 256) {
    throw FormatError("config block out of range", config_at);
  }
  cfg.maps_per_column.assign(static_cast<std::size_t>(cfg.interlink_rounds),
                             std::vector<int>(static_cast<std::size_t>(cfg.num_columns)));
  for (auto& row : cfg.maps_per_column) {
    for (int& m : row) m = static_cast<int>(read_field(r, "maps_per_column"));
  }
  cfg.kernel_size = static_cast<int>(read_field(r, "kernel_size"));
  cfg.final_kernel_size = static_cast<int>(read_field(r, "final_kernel_size"));
  cfg.input_channels = static_cast<int>(read_field(r, "input_channels"));
  cfg.input_height = static_cast<int>(read_field(r, "input_height"));
  cfg.input_width = static_cast<int>(read_field(r, "input_width"));
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid stored configuration: ") + e.what(), config_at);
  }

  Checkpoint ck;
  ck.config = cfg;
  ck.params = init_params(cfg, 0);
  std::uint32_t sets = 0;
  ck.params.for_each([&](const ConvParams&) { ++sets; });
  const std::size_t count_at = r.offset();
  if (r.u32() != 2 * sets) throw FormatError("unexpected parameter block count", count_at);
  ck.params.for_each([&](ConvParams& p) {
    Tensor4& k = p.kernel;
    read_block(r, static_cast<std::uint32_t>(k.kh()), static_cast<std::uint32_t>(k.kw()),
               static_cast<std::uint32_t>(k.in_channels()),
               static_cast<std::uint32_t>(k.out_channels()), k.data());
    read_block(r, 1, 1, 1, static_cast<std::uint32_t>(p.bias.size()), p.bias.values);
  });

  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    const std::size_t at = r.offset();
    const std::uint32_t klen = r.u32();
    if (klen > r.remaining()) throw FormatError("meta key length out of range", at);
    std::string key = r.bytes(klen);
    const std::size_t vat = r.offset();
    const std::uint32_t vlen = r.u32();
    if (vlen > r.remaining()) throw FormatError("meta value length out of range", vat);
    ck.meta[std::move(key)] = r.bytes(vlen);
  }
  r.expect_end("checkpoint");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ICNNConfig& config,
                     const ICNNParams& params, const CheckpointMeta& meta) {
  detail::write_file(path, encode_checkpoint(config, params, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("checkpoint not found: " + path.string());
  }
  return decode_checkpoint(detail::read_file(path));
}

}  // namespace icnn
