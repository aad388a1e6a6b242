#include "t1moco/series_io.hpp"

#include <cstdio>

#include "json.hpp"
#include "t1moco/io.hpp"

namespace t1moco::series_io {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string numbered(const char* stem, std::size_t i, const char* ext = ".t1mc") {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu%s", stem, i, ext);
  return buf;
}

[[noreturn]] void bad_manifest(const fs::path& dir, const std::string& msg) {
  throw Error(ErrorCode::BadSeries, (dir / "manifest.json").string() + ": " + msg);
}

}  // namespace

void write(const fs::path& dir, const SeriesDir& data, bool write_pgm) {
  const T1Series& s = data.series;
  s.validate(1);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());

  ordered_json m;
  m["reference_index"] = s.reference_index;
  m["frames"] = ordered_json::array();
  for (std::size_t i = 0; i < s.size(); ++i) {
    ordered_json f;
    f["image"] = numbered("frame", i);
    f["ti"] = s.inversion_times[i];
    io::save_tensor(s.frames[i], dir / numbered("frame", i));
    if (write_pgm) io::export_pgm(s.frames[i], dir / numbered("frame", i, ".pgm"));
    if (s.has_masks()) {
      f["mask"] = numbered("mask", i);
      io::save_tensor(s.masks[i], dir / numbered("mask", i));
    }
    m["frames"].push_back(f);
  }
  if (data.t1_map || !data.gt_fields.empty()) {
    ordered_json gt = ordered_json::object();
    if (data.t1_map) {
      gt["t1_map"] = "t1_map.t1mc";
      io::save_tensor(*data.t1_map, dir / "t1_map.t1mc");
    }
    if (!data.gt_fields.empty()) {
      gt["fields"] = ordered_json::array();
      for (std::size_t i = 0; i < data.gt_fields.size(); ++i) {
        gt["fields"].push_back(numbered("gt_field", i));
        io::save_tensor(data.gt_fields[i], dir / numbered("gt_field", i));
      }
    }
    m["ground_truth"] = gt;
  }
  if (!data.correction_fields.empty()) {
    ordered_json c;
    c["fields"] = ordered_json::array();
    for (std::size_t i = 0; i < data.correction_fields.size(); ++i) {
      if (data.correction_fields[i]) {
        c["fields"].push_back(numbered("field", i));
        io::save_tensor(*data.correction_fields[i], dir / numbered("field", i));
      } else {
        c["fields"].push_back(nullptr);
      }
    }
    c["folding"] = data.folding;
    c["errors"] = data.errors;
    m["correction"] = c;
  }
  m["metadata"] = ordered_json::parse(data.metadata_json);
  io::write_text(dir / "manifest.json", m.dump(2) + "\n");
}

SeriesDir read(const fs::path& dir) {
  const auto bytes = io::read_file(dir / "manifest.json");
  json m;
  try {
    m = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    bad_manifest(dir, std::string("not valid JSON: ") + e.what());
  }
  SeriesDir out;
  try {
    if (!m.contains("frames") || !m["frames"].is_array()) bad_manifest(dir, "missing 'frames'");
    out.series.reference_index = m.at("reference_index").get<std::size_t>();
    for (const auto& f : m["frames"]) {
      out.series.frames.push_back(io::load_image(dir / f.at("image").get<std::string>()));
      out.series.inversion_times.push_back(f.at("ti").get<double>());
      if (f.contains("mask")) {
        out.series.masks.push_back(io::load_mask(dir / f["mask"].get<std::string>()));
      }
    }
    if (!out.series.masks.empty() && out.series.masks.size() != out.series.frames.size()) {
      bad_manifest(dir, "masks must be given for every frame or none");
    }
    if (m.contains("ground_truth")) {
      const auto& gt = m["ground_truth"];
      if (gt.contains("t1_map")) out.t1_map = io::load_image(dir / gt["t1_map"].get<std::string>());
      if (gt.contains("fields")) {
        for (const auto& f : gt["fields"]) {
          out.gt_fields.push_back(io::load_field(dir / f.get<std::string>()));
        }
      }
    }
    if (m.contains("correction")) {
      const auto& c = m["correction"];
      for (const auto& f : c.at("fields")) {
        if (f.is_null()) {
          out.correction_fields.emplace_back();
        } else {
          out.correction_fields.emplace_back(io::load_field(dir / f.get<std::string>()));
        }
      }
      if (c.contains("folding")) out.folding = c["folding"].get<std::vector<double>>();
      if (c.contains("errors")) out.errors = c["errors"].get<std::vector<std::string>>();
    }
    if (m.contains("metadata")) out.metadata_json = m["metadata"].dump();
  } catch (const json::exception& e) {
    bad_manifest(dir, e.what());
  }
  out.series.validate(1);
  return out;
}

}  // namespace t1moco::series_io
