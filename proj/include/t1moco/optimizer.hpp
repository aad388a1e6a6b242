#pragma once

// Direct registration: an affine stage maximizing WLs over the six affine
// parameters, then a deformable stage minimizing the composite loss over
// both displacement fields. Both stages run coarse to fine with adaptive
// moment descent and a backtracking step that only accepts decreases.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "t1moco/losses.hpp"
#include "t1moco/metrics.hpp"
#include "t1moco/tensor.hpp"
#include "t1moco/warp.hpp"

namespace t1moco::optimizer {

struct SolveConfig {
  int levels = 3;
  std::vector<int> iters_per_level{100, 100, 50};  // coarse to fine
  double affine_step = 0.1;  // pixels per iteration, per parameter
  double field_step = 0.5;   // pixels per iteration, per displacement component
  double step_growth = 1.0;  // deformable step multiplier after an accepted step
  metrics::WlsWeights weights;
  metrics::MetricParams metric_params;
  losses::LossWeights loss_weights;
  std::uint64_t seed = 0;
  double convergence_tol = 1e-5;
  bool run_affine = true;
  bool run_deformable = true;
  // Include the mask dice term when masks are supplied to a solve.
  bool use_masks = false;

  void validate() const;
};

struct TraceEntry {
  int level = 0;  // 0 is the coarsest
  int iteration = 0;
  double step = 0.0;
  losses::LossBreakdown loss;
};

struct AffineTraceEntry {
  int level = 0;
  int iteration = 0;
  double step = 0.0;
  double loss = 0.0;
};

struct RegistrationResult {
  AffineParams affine;
  DisplacementField field_xy;
  DisplacementField field_yx;
  Image2D moved;
  std::vector<AffineTraceEntry> affine_trace;  // accepted affine steps
  std::vector<TraceEntry> loss_trace;  // accepted deformable losses
  std::size_t folding = 0;
  bool low_variance = false;
  std::vector<std::string> warnings;

  // Single field equivalent to the affine warp followed by field_xy.
  DisplacementField total_field() const;
};

struct AffineSolve {
  AffineParams affine;
  std::vector<AffineTraceEntry> trace;
};

AffineSolve solve_affine(const Image2D& moving, const Image2D& fixed, const SolveConfig& cfg);

// `masks` pairs the mask of ax with the mask of fixed; used only when
// cfg.use_masks is set.
RegistrationResult solve_deformable(const Image2D& ax, const Image2D& fixed,
                                    std::optional<losses::MaskPair> masks,
                                    const SolveConfig& cfg);

// Both stages. The moving mask, when given, is carried through the affine
// warp for the deformable stage.
RegistrationResult register_pair(const Image2D& moving, const Image2D& fixed,
                                 const SolveConfig& cfg, const LabelMask* moving_mask = nullptr,
                                 const LabelMask* fixed_mask = nullptr);

struct FrameOutcome {
  std::optional<RegistrationResult> result;  // empty for the reference or a failed frame
  std::string error;
  double seconds = 0.0;
};

struct CorrectionResult {
  T1Series corrected;
  std::vector<FrameOutcome> frames;
};

// Registers each non-reference frame to the reference frame. Frames run
// concurrently on up to `threads` workers (0: T1MOCO_THREADS, else the
// hardware concurrency). Failed frames are passed through unchanged.
CorrectionResult motion_correct_series(const T1Series& series, const SolveConfig& cfg,
                                       int threads = 0);

namespace pyramid {

// Halves the grid (rounding up) after a 3x3 box filter.
Image2D downsample(const Image2D& img);
LabelMask downsample(const LabelMask& mask);
// Bilinear resampling onto a grid twice as fine, displacements doubled.
DisplacementField upsample(const DisplacementField& field, GridSize fine);
// Number of levels usable for a grid, capped at `requested`.
int usable_levels(GridSize g, int requested);

}  // namespace pyramid

}  // namespace t1moco::optimizer
