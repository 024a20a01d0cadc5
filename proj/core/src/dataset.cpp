#include "icnn/dataset.hpp"

#include <fstream>
#include <sstream>

#include "icnn/errors.hpp"
#include "icnn/io.hpp"

namespace icnn {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  throw ConfigError("unknown split '" + std::string(text) + "' (expected train, val or test)");
}

std::vector<ManifestRecord> parse_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot open manifest " + manifest_path.string());
  const auto base = manifest_path.parent_path();
  std::vector<ManifestRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string image, labels, split, extra;
    if (!(fields >> image >> labels >> split) || (fields >> extra)) {
      throw DataError(manifest_path.string() + ":" + std::to_string(line_no) +
                      ": expected '<image> <labels> <split>'");
    }
    ManifestRecord rec;
    rec.image = std::filesystem::path(image).is_absolute() ? std::filesystem::path(image) : base / image;
    rec.labels = std::filesystem::path(labels).is_absolute() ? std::filesystem::path(labels) : base / labels;
    try {
      rec.split = parse_split(split);
    } catch (const ConfigError& e) {
      throw DataError(manifest_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    rec.line = line_no;
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<Sample> load_dataset(const std::filesystem::path& manifest_path, Split split) {
  std::vector<Sample> out;
  for (const auto& rec : parse_manifest(manifest_path)) {
    if (rec.split != split) continue;
    const std::string where = manifest_path.string() + ":" + std::to_string(rec.line) + ": ";
    for (const auto& p : {rec.image, rec.labels}) {
      if (!std::filesystem::exists(p)) throw DataError(where + "missing file " + p.string());
    }
    Sample s;
    try {
      s.image = io::read_tensor(rec.image);
      s.labels = io::read_labels(rec.labels);
    } catch (const FormatError& e) {
      throw DataError(where + e.what());
    }
    if (s.image.height() != s.labels.height() || s.image.width() != s.labels.width()) {
      throw DataError(where + "image is " + std::to_string(s.image.height()) + "x" +
                      std::to_string(s.image.width()) + " but labels are " +
                      std::to_string(s.labels.height()) + "x" +
                      std::to_string(s.labels.width()));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace icnn
