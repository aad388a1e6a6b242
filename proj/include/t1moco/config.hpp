#pragma once

// JSON run configuration shared by the command-line tools.
//
// {
//   "metric": {"ncc", "mi", "ngf", "mind", "mi_bins", "ngf_eps",
//              "mind_patch_radius", "mind_sigma", "mind_variance_floor"},
//   "loss":   {"lambda1", "lambda2", "lambda_r", "lambda_s", "dice_without_factor2"},
//   "solve":  {"levels", "iters_per_level", "affine_step", "field_step", "step_growth",
//              "seed", "convergence_tol", "run_affine", "run_deformable", "use_masks"},
//   "io":     {"write_pgm"}
// }
//
// Every key is optional; unknown keys are rejected with InvalidConfig.

#include <string>
#include <string_view>

#include "t1moco/optimizer.hpp"

namespace t1moco::config {

struct IoConfig {
  bool write_pgm = false;
  friend bool operator==(const IoConfig&, const IoConfig&) = default;
};

struct RunConfig {
  optimizer::SolveConfig solve;
  IoConfig io;
};

// Overlays the keys present in `json` onto `base`.
RunConfig parse(std::string_view json, const RunConfig& base = {});
RunConfig load(const std::string& path, const RunConfig& base = {});
// Fully resolved document, defaults included.
std::string to_json(const RunConfig& cfg);

}  // namespace t1moco::config
