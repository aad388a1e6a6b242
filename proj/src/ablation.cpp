#include "t1moco/ablation.hpp"

#include <chrono>

#include "json.hpp"
#include "t1moco/evaluation.hpp"

namespace t1moco::ablation {

metrics::WlsWeights weights_for(const std::string& metric, const metrics::WlsWeights& base) {
  metrics::WlsWeights w{0.0, 0.0, 0.0, 0.0};
  if (metric == "wls") return base;
  if (metric == "ncc") {
    w.ncc = base.ncc;
  } else if (metric == "mi") {
    w.mi = base.mi;
  } else if (metric == "ngf") {
    w.ngf = base.ngf;
  } else if (metric == "mind") {
    w.mind = base.mind;
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown ablation metric '" + metric + "'");
  }
  w.validate();
  return w;
}

Grid parse_grid(const std::string& text) {
  using nlohmann::json;
  Grid g;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("grid is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "grid must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "metrics" && key != "lambda1") {
      throw Error(ErrorCode::InvalidConfig, "unknown grid key '" + key + "'");
    }
  }
  try {
    if (doc.contains("metrics")) g.metrics = doc["metrics"].get<std::vector<std::string>>();
    if (doc.contains("lambda1")) g.lambda1 = doc["lambda1"].get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("grid: ") + e.what());
  }
  for (const auto& m : g.metrics) weights_for(m, {});
  for (double l : g.lambda1) {
    if (!(l >= 0.0)) throw Error(ErrorCode::InvalidConfig, "grid lambda1 values must be >= 0");
  }
  return g;
}

std::vector<Row> run(const T1Series& series, const optimizer::SolveConfig& base, const Grid& grid,
                     int threads) {
  series.validate(2);
  if (!series.has_masks()) throw Error(ErrorCode::BadSeries, "ablation needs per-frame masks");
  std::vector<Row> rows;
  {
    eval::EvalReport r;
    eval::add_method(r, "ORG", series.masks, series.reference_index, {});
    const auto& s = r.summaries.front();
    rows.push_back({"ORG", 0.0, s.dsc, s.hd_endo, s.hd_epi, 0.0, 0.0, 0});
  }
  for (const auto& metric : grid.metrics) {
    for (double lambda1 : grid.lambda1) {
      optimizer::SolveConfig cfg = base;
      cfg.weights = weights_for(metric, base.weights);
      cfg.loss_weights.lambda1 = lambda1;
      cfg.use_masks = false;
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = optimizer::motion_correct_series(series, cfg, threads);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::vector<eval::FrameStats> stats(series.size());
      Row row{metric, lambda1};
      for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& f = result.frames[i];
        if (f.result) stats[i].folding = static_cast<double>(f.result->folding);
        if (i != series.reference_index && !f.result) ++row.failed_frames;
      }
      eval::EvalReport r;
      eval::add_method(r, metric, result.corrected.masks, series.reference_index, stats);
      const auto& s = r.summaries.front();
      row.dsc = s.dsc;
      row.hd_endo = s.hd_endo;
      row.hd_epi = s.hd_epi;
      row.folding = s.folding;
      row.seconds = secs;
      rows.push_back(row);
    }
  }
  return rows;
}

io::CsvTable to_csv(const std::vector<Row>& rows) {
  io::CsvTable t;
  t.header = {"metric", "lambda1", "dsc", "hd_endo", "hd_epi", "folding", "seconds",
              "failed_frames"};
  for (const auto& r : rows) {
    t.rows.push_back({r.metric, r.lambda1, r.dsc, r.hd_endo, r.hd_epi, r.folding, r.seconds,
                      static_cast<long long>(r.failed_frames)});
  }
  return t;
}

}  // namespace t1moco::ablation
