#pragma once

// Series directories: one tensor file per frame, mask and field plus a
// manifest.json tying them together.
//
// manifest.json:
//   {"reference_index": R,
//    "frames": [{"image": "frame_000.t1mc", "ti": 100.0, "mask": "mask_000.t1mc"}, ...],
//    "ground_truth": {"t1_map": "t1_map.t1mc", "fields": ["gt_field_000.t1mc", ...]},
//    "correction": {"fields": ["field_000.t1mc" or null, ...], "folding": [...],
//                   "errors": ["" or message, ...]},
//    "metadata": {...}}
// Only "reference_index" and "frames" are required.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "t1moco/tensor.hpp"

namespace t1moco::series_io {

struct SeriesDir {
  T1Series series;
  std::optional<Image2D> t1_map;
  std::vector<DisplacementField> gt_fields;
  // Total correction field per frame; empty entries for the reference and
  // failed frames. Empty vector when the directory holds no correction.
  std::vector<std::optional<DisplacementField>> correction_fields;
  std::vector<double> folding;
  std::vector<std::string> errors;
  std::string metadata_json = "{}";
};

// Creates the directory if needed. metadata_json must be a JSON object.
void write(const std::filesystem::path& dir, const SeriesDir& data, bool write_pgm = false);
SeriesDir read(const std::filesystem::path& dir);

}  // namespace t1moco::series_io
