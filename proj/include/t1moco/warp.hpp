#pragma once

// Displacement-field algebra. A field u maps output pixel p to the sample
// location p + u(p); sampling is bilinear with coordinates clamped to the
// grid rectangle (edge replication).
//
// Each differentiable operation has a *_backward companion computing the
// vector-Jacobian product; the loss module chains these by hand.

#include <array>
#include <cstddef>
#include <vector>

#include "t1moco/tensor.hpp"

namespace t1moco {

// 2x3 affine matrix acting on coordinates normalized to [-1, 1] per axis
// (corner pixels at -1 and +1), row-major: t11 t12 t13 / t21 t22 t23.
struct AffineParams {
  std::array<double, 6> theta{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

  static AffineParams identity() { return {}; }
  double operator()(int row, int col) const { return theta[row * 3 + col]; }
  double& operator()(int row, int col) { return theta[row * 3 + col]; }
  bool all_finite() const noexcept;
  // Determinant of the linear part; equals the pixel-space Jacobian
  // determinant of the realized transform.
  double linear_det() const noexcept { return theta[0] * theta[4] - theta[1] * theta[3]; }
  double max_abs_deviation_from_identity() const noexcept;

  friend bool operator==(const AffineParams&, const AffineParams&) = default;
};

namespace grid {

// Spatial derivatives in pixel units: central differences in the interior,
// one-sided at the borders. Exact for fields linear in x and y.
void diff_x(const double* in, int width, int height, double* out);
void diff_y(const double* in, int width, int height, double* out);
// out += D^T g
void diff_x_adjoint_add(const double* g, int width, int height, double* out);
void diff_y_adjoint_add(const double* g, int width, int height, double* out);

}  // namespace grid

namespace warp {

Image2D warp_image(const Image2D& img, const DisplacementField& field);

// Either output may be null. Results are accumulated (+=) into outputs that
// already have the right grid, otherwise assigned.
void warp_image_backward(const Image2D& img, const DisplacementField& field,
                         const Image2D& d_out, Image2D* d_img, DisplacementField* d_field);

// Resamples each component of `inner` at p + by(p).
DisplacementField warp_field(const DisplacementField& inner, const DisplacementField& by);
void warp_field_backward(const DisplacementField& inner, const DisplacementField& by,
                         const DisplacementField& d_out, DisplacementField* d_inner,
                         DisplacementField* d_by);

// One-step inverse: inv(p) = -u(p + u(p)). Exact for constant fields.
DisplacementField approx_inverse(const DisplacementField& field);
DisplacementField approx_inverse_backward(const DisplacementField& field,
                                          const DisplacementField& d_inverse);

// (f (+) g)(p) = g(p) + f(p + g(p)); warping by the result approximates
// warping by f, then by g.
DisplacementField compose(const DisplacementField& f, const DisplacementField& g);

// det(I + grad u) per pixel. Requires a grid of at least 3x3.
Image2D jacobian_det(const DisplacementField& field);
DisplacementField jacobian_det_backward(const DisplacementField& field, const Image2D& d_det);

// Pixels with det <= 0.
std::size_t folding_count(const DisplacementField& field);

// Displacement that realizes sampling at theta * (xn, yn, 1).
DisplacementField affine_to_field(const AffineParams& a, int width, int height);
// Gradient w.r.t. theta given the gradient w.r.t. the produced field.
std::array<double, 6> affine_to_field_backward(const DisplacementField& d_field);

// Soft warping of one-hot class maps followed by argmax (ties go to the
// lower class id).
LabelMask warp_labels(const LabelMask& mask, const DisplacementField& field);

// Channel k holds the indicator of class first_class + k.
std::vector<Image2D> one_hot(const LabelMask& mask, int first_class = 0);

}  // namespace warp
}  // namespace t1moco
