#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "faircl/data.hpp"
#include "faircl/types.hpp"

namespace faircl {

struct ManifestRow {
  std::string id;
  std::string path;             // relative to image_root; empty for inline rows
  std::optional<Tensor> input;  // inline pixel data, [H, W, C] in [0, 1]
  int class_id = -1;
  std::vector<std::uint8_t> label_bits;
  std::string gender;
  std::string race;
  std::string split;  // "train" or "test"
};

// Text format: the first line is a JSON header
//   {"mode": "multiclass", "num_classes": 7,
//    "attributes": {"gender": [...], "race": [...]},
//    "image_root": "images", "image_shape": [100, 100, 3], "exclude": ["Unsure"]}
// followed by one CSV row per sample: id,path,label(s),gender,race,split.
// Multilabel rows carry ';'-separated 0/1 bits. A path of the form
// "inline:v0 v1 ..." embeds the pixel values (image_shape order).
struct DatasetManifest {
  TaskMode mode = TaskMode::kMulticlass;
  std::size_t num_classes = 7;  // classes, or labels in multilabel mode
  std::map<std::string, std::vector<std::string>> attributes;
  std::vector<std::string> exclude{"Unsure"};
  std::filesystem::path image_root;  // absolute after loading
  Shape image_shape{100, 100, 3};
  std::vector<ManifestRow> rows;
  std::size_t excluded_rows = 0;

  const std::vector<std::string>& vocabulary(const std::string& attribute) const;
  // counts[value][class] over rows of `split` ("" = all). Multilabel counts
  // positive labels.
  std::map<std::string, std::vector<std::size_t>> counts(const std::string& attribute,
                                                         const std::string& split = "") const;
};

// Throws InputError naming the row on schema violations; rows whose
// attributes hit the exclusion list are dropped and logged.
DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir);
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(std::ostream& out, const DatasetManifest& manifest);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

struct LoadReport {
  std::size_t loaded = 0;
  std::size_t skipped = 0;  // undecodable images
};

struct LoadedData {
  std::vector<Sample> train;
  std::vector<Sample> test;
  LoadReport report;
};

// Decodes and preprocesses every row to `input_shape` (defaults to the
// manifest image_shape). Undecodable files are skipped with a warning.
LoadedData load_samples(const DatasetManifest& manifest, const std::optional<Shape>& input_shape = std::nullopt);

}  // namespace faircl
