#pragma once

// Sweeps over similarity metric and anti-folding weight, scoring each run
// against ground-truth masks.

#include <string>
#include <vector>

#include "t1moco/io.hpp"
#include "t1moco/optimizer.hpp"

namespace t1moco::ablation {

// "ncc", "mi", "ngf", "mind" keep only that component at its WLs weight;
// "wls" keeps all four.
metrics::WlsWeights weights_for(const std::string& metric, const metrics::WlsWeights& base);

struct Row {
  std::string metric;
  double lambda1 = 0.0;
  double dsc = 0.0;
  double hd_endo = 0.0;
  double hd_epi = 0.0;
  double folding = 0.0;  // mean over corrected frames
  double seconds = 0.0;
  std::size_t failed_frames = 0;
};

struct Grid {
  std::vector<std::string> metrics{"ncc", "mi", "ngf", "mind", "wls"};
  std::vector<double> lambda1{0.0, 1000.0};
};

// Parses {"metrics": [...], "lambda1": [...]}; both keys optional.
Grid parse_grid(const std::string& json);

// One row per (metric, lambda1) plus a leading "ORG" row for the
// uncorrected series. The series must carry masks.
std::vector<Row> run(const T1Series& series, const optimizer::SolveConfig& base, const Grid& grid,
                     int threads = 0);

io::CsvTable to_csv(const std::vector<Row>& rows);

}  // namespace t1moco::ablation
