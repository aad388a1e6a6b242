#pragma once

// Per-pixel fit of S(TI) = A - B exp(-TI / T1*), reporting the corrected
// T1 = T1* (B / A - 1).

#include <span>

#include "t1moco/tensor.hpp"

namespace t1moco::t1fit {

struct PixelFit {
  double a = 0.0;
  double b = 0.0;
  double t1_star = 0.0;
  double t1 = 0.0;        // 0 when failed
  double residual = 0.0;  // RMS
  bool failed = false;
};

struct T1FitResult {
  Image2D t1_map;  // ms
  Image2D a_map;
  Image2D b_map;
  Image2D residual_map;
  LabelMask fail_mask;  // 1 where the fit failed
};

struct FitOptions {
  int grid_points = 50;
  double t1_star_min = 50.0;
  double t1_star_max = 5000.0;
  int gauss_newton_steps = 20;
};

PixelFit fit_pixel(std::span<const double> ti, std::span<const double> s,
                   const FitOptions& opts = {});

// Needs at least three frames with strictly increasing TIs (BadSeries).
T1FitResult fit_t1(const T1Series& series, const FitOptions& opts = {});

}  // namespace t1moco::t1fit
