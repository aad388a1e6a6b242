#include <algorithm>
#include <cmath>

#include "t1moco/kernels.hpp"

namespace t1moco::kernels {
namespace {

void warp_bilinear(const double* src, int width, int height, const double* ux, const double* uy,
                   double* out) {
  const double xmax = width - 1;
  const double ymax = height - 1;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const double sx = std::min(std::max(x + ux[i], 0.0), xmax);
      const double sy = std::min(std::max(y + uy[i], 0.0), ymax);
      const double x0 = std::floor(sx);
      const double y0 = std::floor(sy);
      const double x1 = std::min(x0 + 1.0, xmax);
      const double y1 = std::min(y0 + 1.0, ymax);
      const double fx = sx - x0;
      const double fy = sy - y0;
      const double row0 = y0 * width;
      const double row1 = y1 * width;
      const double a = src[static_cast<std::size_t>(row0 + x0)];
      const double b = src[static_cast<std::size_t>(row0 + x1)];
      const double c = src[static_cast<std::size_t>(row1 + x0)];
      const double d = src[static_cast<std::size_t>(row1 + x1)];
      // Lerp form: exact for constant neighbourhoods.
      const double top = a + fx * (b - a);
      const double bottom = c + fx * (d - c);
      out[i] = top + fy * (bottom - top);
    }
  }
}

void sq_diff_accumulate(double* acc, const double* a, const double* b, double w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc[i] += w * (d * d);
  }
}

void weighted_diff(double* out, const double* g, const double* a, const double* b, double s,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (g[i] * s) * (a[i] - b[i]);
}

void add_inplace(double* y, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void sub_inplace(double* y, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] -= x[i];
}

void axpy(double* out, const double* x, const double* d, double alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + alpha * d[i];
}

void det2_identity(const double* a, const double* b, const double* c, const double* d,
                   double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (1.0 + a[i]) * (1.0 + d[i]) - b[i] * c[i];
}

void adam_direction(const double* g, double* m, double* v, double* dir, AdamCoefficients c,
                    std::size_t n) {
  const double one_b1 = 1.0 - c.beta1;
  const double one_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + one_b1 * g[i];
    v[i] = c.beta2 * v[i] + one_b2 * (g[i] * g[i]);
    dir[i] = (m[i] / c.bias1) / (std::sqrt(v[i] / c.bias2) + c.eps);
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i];
  return s;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      Isa::Scalar,   warp_bilinear, sq_diff_accumulate, weighted_diff, add_inplace, sub_inplace,
      axpy,          det2_identity, adam_direction,     dot,           sum,
  };
  return table;
}

}  // namespace t1moco::kernels
