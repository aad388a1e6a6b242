#pragma once

// Overlap and contour metrics for motion-correction reports.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "t1moco/io.hpp"
#include "t1moco/tensor.hpp"

namespace t1moco::eval {

// 2|A & B| / (|A| + |B|) for one class; 1 when the class is absent from both.
double dsc(const LabelMask& a, const LabelMask& b, int class_id);

// Exact Hausdorff distance in pixels between the boundary pixel sets of two
// binary maps. A boundary pixel has at least one 4-neighbour outside the map
// (the outside of the grid counts as outside). Throws EmptyMask.
double hausdorff(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b,
                 GridSize g);
double hausdorff(const LabelMask& a, const LabelMask& b, int class_id);

// Region enclosed by the ring class: pixels not in the class and not
// 4-connected to the grid border.
std::vector<std::uint8_t> endo_region(const LabelMask& m, int ring_class);
// Ring plus enclosed region.
std::vector<std::uint8_t> epi_region(const LabelMask& m, int ring_class);

double hd_endo(const LabelMask& a, const LabelMask& b, int ring_class);
double hd_epi(const LabelMask& a, const LabelMask& b, int ring_class);

// Median over class pixels of |estimate - truth| / truth. Throws EmptyMask.
double median_relative_error(const Image2D& estimate, const Image2D& truth,
                             const LabelMask& region, int class_id);

struct FrameRow {
  std::string method;
  std::size_t frame = 0;
  double dsc = 0.0;
  double hd_endo = 0.0;
  double hd_epi = 0.0;
  double folding = 0.0;
  double seconds = 0.0;
};

struct MethodSummary {
  std::string method;
  double dsc = 0.0;
  double hd_endo = 0.0;
  double hd_epi = 0.0;
  double folding = 0.0;
  double seconds = 0.0;  // total
};

struct EvalReport {
  std::vector<FrameRow> rows;
  std::vector<MethodSummary> summaries;  // one per method, in row order

  const MethodSummary& summary(std::string_view method) const;
  // Columns method,frame,dsc,hd_endo,hd_epi,folding,seconds; per-frame rows
  // followed by one "mean" row per method.
  io::CsvTable to_csv() const;
  // Same content as JSON, with `config_json` embedded verbatim when given.
  std::string to_json(std::string_view config_json = {}) const;
};

struct FrameStats {
  double folding = 0.0;
  double seconds = 0.0;
};

// Scores each non-reference frame's mask against the reference mask.
// `masks` holds one mask per frame.
void add_method(EvalReport& report, std::string method, const std::vector<LabelMask>& masks,
                std::size_t reference_index, const std::vector<FrameStats>& stats,
                int ring_class = 1);

// ORG rows from the ground-truth masks, then `method` rows from the masks
// after warping each by its total correction field (frames without a field
// are left as they are).
EvalReport evaluate_correction(const std::vector<LabelMask>& gt_masks, std::size_t reference_index,
                               const std::vector<std::optional<DisplacementField>>& fields,
                               const std::vector<FrameStats>& stats,
                               const std::string& method = "corrected", int ring_class = 1);

}  // namespace t1moco::eval
