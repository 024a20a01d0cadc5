#pragma once

// Manifest: UTF-8 text, one record per line "<image path> <label path> <split>" with
// split in {train, val, test}. Blank lines and lines starting with '#' are ignored.
// Relative paths resolve against the manifest's directory.

#include <filesystem>
#include <string>
#include <vector>

#include "icnn/train.hpp"

namespace icnn {

enum class Split { Train, Val, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct ManifestRecord {
  std::filesystem::path image;
  std::filesystem::path labels;
  Split split = Split::Train;
  int line = 0;
};

std::vector<ManifestRecord> parse_manifest(const std::filesystem::path& manifest_path);

/// Loads every record of `split` in manifest order; an empty split yields an empty list.
/// Missing files and image/label dimension mismatches throw DataError naming the line.
std::vector<Sample> load_dataset(const std::filesystem::path& manifest_path, Split split);

}  // namespace icnn
