#include "t1moco/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "t1moco/warp.hpp"

namespace t1moco::eval {

double dsc(const LabelMask& a, const LabelMask& b, int class_id) {
  require_same_grid(a.grid(), b.grid(), "dsc");
  const auto la = a.labels();
  const auto lb = b.labels();
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < la.size(); ++i) {
    const bool ia = la[i] == class_id;
    const bool ib = lb[i] == class_id;
    na += ia;
    nb += ib;
    both += ia && ib;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

namespace {

struct Point {
  int x, y;
};

std::vector<Point> boundary(const std::vector<std::uint8_t>& m, GridSize g) {
  std::vector<Point> out;
  auto inside = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < g.width && y < g.height &&
           m[static_cast<std::size_t>(y) * g.width + x] != 0;
  };
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      if (!inside(x, y)) continue;
      if (!inside(x - 1, y) || !inside(x + 1, y) || !inside(x, y - 1) || !inside(x, y + 1)) {
        out.push_back({x, y});
      }
    }
  }
  return out;
}

double directed(const std::vector<Point>& from, const std::vector<Point>& to) {
  long long worst = 0;
  for (const auto& p : from) {
    long long best = std::numeric_limits<long long>::max();
    for (const auto& q : to) {
      const long long dx = p.x - q.x;
      const long long dy = p.y - q.y;
      best = std::min(best, dx * dx + dy * dy);
      if (best == 0) break;
    }
    worst = std::max(worst, best);
  }
  return std::sqrt(static_cast<double>(worst));
}

std::vector<std::uint8_t> binary(const LabelMask& m, int class_id) {
  std::vector<std::uint8_t> out(m.size());
  const auto l = m.labels();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = l[i] == class_id ? 1 : 0;
  return out;
}

}  // namespace

double hausdorff(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b,
                 GridSize g) {
  if (a.size() != g.pixels() || b.size() != g.pixels()) {
    throw Error(ErrorCode::GridMismatch, "hausdorff maps do not match the grid");
  }
  const auto ba = boundary(a, g);
  const auto bb = boundary(b, g);
  if (ba.empty() || bb.empty()) throw Error(ErrorCode::EmptyMask, "hausdorff of an empty region");
  return std::max(directed(ba, bb), directed(bb, ba));
}

double hausdorff(const LabelMask& a, const LabelMask& b, int class_id) {
  require_same_grid(a.grid(), b.grid(), "hausdorff");
  return hausdorff(binary(a, class_id), binary(b, class_id), a.grid());
}

std::vector<std::uint8_t> endo_region(const LabelMask& m, int ring_class) {
  const int w = m.width();
  const int h = m.height();
  const auto l = m.labels();
  // Flood the non-ring pixels reachable from the border.
  std::vector<std::uint8_t> outside(m.size(), 0);
  std::vector<std::size_t> stack;
  auto seed = [&](int x, int y) {
    const std::size_t i = static_cast<std::size_t>(y) * w + x;
    if (l[i] != ring_class && !outside[i]) {
      outside[i] = 1;
      stack.push_back(i);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    if (x > 0) seed(x - 1, y);
    if (x + 1 < w) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < h) seed(x, y + 1);
  }
  std::vector<std::uint8_t> out(m.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = !outside[i] && l[i] != ring_class;
  return out;
}

std::vector<std::uint8_t> epi_region(const LabelMask& m, int ring_class) {
  auto out = endo_region(m, ring_class);
  const auto l = m.labels();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] || l[i] == ring_class;
  return out;
}

double hd_endo(const LabelMask& a, const LabelMask& b, int ring_class) {
  require_same_grid(a.grid(), b.grid(), "hd_endo");
  return hausdorff(endo_region(a, ring_class), endo_region(b, ring_class), a.grid());
}

double hd_epi(const LabelMask& a, const LabelMask& b, int ring_class) {
  require_same_grid(a.grid(), b.grid(), "hd_epi");
  return hausdorff(epi_region(a, ring_class), epi_region(b, ring_class), a.grid());
}

double median_relative_error(const Image2D& estimate, const Image2D& truth,
                             const LabelMask& region, int class_id) {
  require_same_grid(estimate.grid(), truth.grid(), "median_relative_error");
  require_same_grid(estimate.grid(), region.grid(), "median_relative_error");
  std::vector<double> err;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    if (region[i] != class_id) continue;
    err.push_back(std::abs(estimate[i] - truth[i]) / truth[i]);
  }
  if (err.empty()) throw Error(ErrorCode::EmptyMask, "no pixels of the requested class");
  const std::size_t mid = err.size() / 2;
  std::nth_element(err.begin(), err.begin() + mid, err.end());
  if (err.size() % 2 == 1) return err[mid];
  const double upper = err[mid];
  const double lower = *std::max_element(err.begin(), err.begin() + mid);
  return 0.5 * (lower + upper);
}

const MethodSummary& EvalReport::summary(std::string_view method) const {
  for (const auto& s : summaries) {
    if (s.method == method) return s;
  }
  throw Error(ErrorCode::InvalidArgument, "no rows for method '" + std::string(method) + "'");
}

io::CsvTable EvalReport::to_csv() const {
  io::CsvTable t;
  t.header = {"method", "frame", "dsc", "hd_endo", "hd_epi", "folding", "seconds"};
  for (const auto& r : rows) {
    t.rows.push_back({r.method, static_cast<long long>(r.frame), r.dsc, r.hd_endo, r.hd_epi,
                      r.folding, r.seconds});
  }
  for (const auto& s : summaries) {
    t.rows.push_back(
        {s.method, std::string("mean"), s.dsc, s.hd_endo, s.hd_epi, s.folding, s.seconds});
  }
  return t;
}

std::string EvalReport::to_json(std::string_view config_json) const {
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"method", r.method},
                         {"frame", r.frame},
                         {"dsc", r.dsc},
                         {"hd_endo", r.hd_endo},
                         {"hd_epi", r.hd_epi},
                         {"folding", r.folding},
                         {"seconds", r.seconds}});
  }
  j["summary"] = nlohmann::ordered_json::array();
  for (const auto& s : summaries) {
    j["summary"].push_back({{"method", s.method},
                            {"dsc", s.dsc},
                            {"hd_endo", s.hd_endo},
                            {"hd_epi", s.hd_epi},
                            {"folding_mean", s.folding},
                            {"seconds_total", s.seconds}});
  }
  if (!config_json.empty()) j["config"] = nlohmann::ordered_json::parse(config_json);
  return j.dump(2) + "\n";
}

void add_method(EvalReport& report, std::string method, const std::vector<LabelMask>& masks,
                std::size_t reference_index, const std::vector<FrameStats>& stats,
                int ring_class) {
  if (reference_index >= masks.size()) {
    throw Error(ErrorCode::InvalidArgument, "reference index outside the mask list");
  }
  if (!stats.empty() && stats.size() != masks.size()) {
    throw Error(ErrorCode::InvalidArgument, "frame statistics do not match the mask list");
  }
  const LabelMask& ref = masks[reference_index];
  MethodSummary s{method};
  std::size_t count = 0;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (i == reference_index) continue;
    FrameRow r{method, i};
    r.dsc = dsc(masks[i], ref, ring_class);
    r.hd_endo = hd_endo(masks[i], ref, ring_class);
    r.hd_epi = hd_epi(masks[i], ref, ring_class);
    if (!stats.empty()) {
      r.folding = stats[i].folding;
      r.seconds = stats[i].seconds;
    }
    s.dsc += r.dsc;
    s.hd_endo += r.hd_endo;
    s.hd_epi += r.hd_epi;
    s.folding += r.folding;
    s.seconds += r.seconds;
    ++count;
    report.rows.push_back(std::move(r));
  }
  if (count > 0) {
    const double n = static_cast<double>(count);
    s.dsc /= n;
    s.hd_endo /= n;
    s.hd_epi /= n;
    s.folding /= n;
  }
  report.summaries.push_back(std::move(s));
}

EvalReport evaluate_correction(const std::vector<LabelMask>& gt_masks, std::size_t reference_index,
                               const std::vector<std::optional<DisplacementField>>& fields,
                               const std::vector<FrameStats>& stats, const std::string& method,
                               int ring_class) {
  if (fields.size() != gt_masks.size()) {
    throw Error(ErrorCode::InvalidArgument, "one (optional) field per frame is required");
  }
  EvalReport report;
  add_method(report, "ORG", gt_masks, reference_index, {}, ring_class);
  std::vector<LabelMask> after;
  after.reserve(gt_masks.size());
  for (std::size_t i = 0; i < gt_masks.size(); ++i) {
    after.push_back(fields[i] ? warp::warp_labels(gt_masks[i], *fields[i]) : gt_masks[i]);
  }
  add_method(report, method, after, reference_index, stats, ring_class);
  return report;
}

}  // namespace t1moco::eval
