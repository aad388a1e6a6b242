// AVX2 variants of the kernels in scalar.cpp. Arithmetic is issued in the
// same order as the scalar code (no FMA) so elementwise results match it
// exactly; tails fall through to scalar loops written the same way.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "t1moco/kernels.hpp"

namespace t1moco::kernels {
namespace {

constexpr std::size_t kLanes = 4;

void warp_bilinear(const double* src, int width, int height, const double* ux, const double* uy,
                   double* out) {
  const double xmax = width - 1;
  const double ymax = height - 1;
  const __m256d vxmax = _mm256_set1_pd(xmax);
  const __m256d vymax = _mm256_set1_pd(ymax);
  const __m256d vzero = _mm256_setzero_pd();
  const __m256d vone = _mm256_set1_pd(1.0);
  const __m256d vwidth = _mm256_set1_pd(static_cast<double>(width));
  const __m256d lane_offsets = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);

  for (int y = 0; y < height; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * width;
    const __m256d vy = _mm256_set1_pd(static_cast<double>(y));
    int x = 0;
    for (; x + static_cast<int>(kLanes) <= width; x += kLanes) {
      const std::size_t i = row + x;
      const __m256d vx = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(x)), lane_offsets);
      __m256d sx = _mm256_add_pd(vx, _mm256_loadu_pd(ux + i));
      __m256d sy = _mm256_add_pd(vy, _mm256_loadu_pd(uy + i));
      sx = _mm256_min_pd(_mm256_max_pd(sx, vzero), vxmax);
      sy = _mm256_min_pd(_mm256_max_pd(sy, vzero), vymax);
      const __m256d x0 = _mm256_floor_pd(sx);
      const __m256d y0 = _mm256_floor_pd(sy);
      const __m256d x1 = _mm256_min_pd(_mm256_add_pd(x0, vone), vxmax);
      const __m256d y1 = _mm256_min_pd(_mm256_add_pd(y0, vone), vymax);
      const __m256d fx = _mm256_sub_pd(sx, x0);
      const __m256d fy = _mm256_sub_pd(sy, y0);
      const __m256d row0 = _mm256_mul_pd(y0, vwidth);
      const __m256d row1 = _mm256_mul_pd(y1, vwidth);
      const __m128i ia = _mm256_cvtpd_epi32(_mm256_add_pd(row0, x0));
      const __m128i ib = _mm256_cvtpd_epi32(_mm256_add_pd(row0, x1));
      const __m128i ic = _mm256_cvtpd_epi32(_mm256_add_pd(row1, x0));
      const __m128i id = _mm256_cvtpd_epi32(_mm256_add_pd(row1, x1));
      const __m256d a = _mm256_i32gather_pd(src, ia, 8);
      const __m256d b = _mm256_i32gather_pd(src, ib, 8);
      const __m256d c = _mm256_i32gather_pd(src, ic, 8);
      const __m256d d = _mm256_i32gather_pd(src, id, 8);
      const __m256d top = _mm256_add_pd(a, _mm256_mul_pd(fx, _mm256_sub_pd(b, a)));
      const __m256d bottom = _mm256_add_pd(c, _mm256_mul_pd(fx, _mm256_sub_pd(d, c)));
      _mm256_storeu_pd(out + i, _mm256_add_pd(top, _mm256_mul_pd(fy, _mm256_sub_pd(bottom, top))));
    }
    for (; x < width; ++x) {
      const std::size_t i = row + x;
      const double sx = std::min(std::max(x + ux[i], 0.0), xmax);
      const double sy = std::min(std::max(y + uy[i], 0.0), ymax);
      const double x0 = std::floor(sx);
      const double y0 = std::floor(sy);
      const double x1 = std::min(x0 + 1.0, xmax);
      const double y1 = std::min(y0 + 1.0, ymax);
      const double fx = sx - x0;
      const double fy = sy - y0;
      const double r0 = y0 * width;
      const double r1 = y1 * width;
      const double a = src[static_cast<std::size_t>(r0 + x0)];
      const double b = src[static_cast<std::size_t>(r0 + x1)];
      const double c = src[static_cast<std::size_t>(r1 + x0)];
      const double d = src[static_cast<std::size_t>(r1 + x1)];
      const double top = a + fx * (b - a);
      const double bottom = c + fx * (d - c);
      out[i] = top + fy * (bottom - top);
    }
  }
}

void sq_diff_accumulate(double* acc, const double* a, const double* b, double w, std::size_t n) {
  const __m256d vw = _mm256_set1_pd(w);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d t = _mm256_mul_pd(vw, _mm256_mul_pd(d, d));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), t));
  }
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    acc[i] += w * (d * d);
  }
}

void weighted_diff(double* out, const double* g, const double* a, const double* b, double s,
                   std::size_t n) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d gs = _mm256_mul_pd(_mm256_loadu_pd(g + i), vs);
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(gs, d));
  }
  for (; i < n; ++i) out[i] = (g[i] * s) * (a[i] - b[i]);
}

void add_inplace(double* y, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) y[i] += x[i];
}

void sub_inplace(double* y, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(y + i, _mm256_sub_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) y[i] -= x[i];
}

void axpy(double* out, const double* x, const double* d, double alpha, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(d + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), t));
  }
  for (; i < n; ++i) out[i] = x[i] + alpha * d[i];
}

void det2_identity(const double* a, const double* b, const double* c, const double* d,
                   double* out, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d p = _mm256_mul_pd(_mm256_add_pd(one, _mm256_loadu_pd(a + i)),
                                    _mm256_add_pd(one, _mm256_loadu_pd(d + i)));
    const __m256d q = _mm256_mul_pd(_mm256_loadu_pd(b + i), _mm256_loadu_pd(c + i));
    _mm256_storeu_pd(out + i, _mm256_sub_pd(p, q));
  }
  for (; i < n; ++i) out[i] = (1.0 + a[i]) * (1.0 + d[i]) - b[i] * c[i];
}

void adam_direction(const double* g, double* m, double* v, double* dir, AdamCoefficients c,
                    std::size_t n) {
  const double one_b1 = 1.0 - c.beta1;
  const double one_b2 = 1.0 - c.beta2;
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d ob1 = _mm256_set1_pd(one_b1);
  const __m256d ob2 = _mm256_set1_pd(one_b2);
  const __m256d bc1 = _mm256_set1_pd(c.bias1);
  const __m256d bc2 = _mm256_set1_pd(c.bias2);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    const __m256d vm = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(ob1, vg));
    const __m256d vv = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(ob2, _mm256_mul_pd(vg, vg)));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    const __m256d den = _mm256_add_pd(_mm256_sqrt_pd(_mm256_div_pd(vv, bc2)), eps);
    _mm256_storeu_pd(dir + i, _mm256_div_pd(_mm256_div_pd(vm, bc1), den));
  }
  for (; i < n; ++i) {
    m[i] = c.beta1 * m[i] + one_b1 * g[i];
    v[i] = c.beta2 * v[i] + one_b2 * (g[i] * g[i]);
    dir[i] = (m[i] / c.bias1) / (std::sqrt(v[i] / c.bias2) + c.eps);
  }
}

double horizontal_sum(__m256d v) {
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double s = horizontal_sum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double s = horizontal_sum(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{
      Isa::Avx2,     warp_bilinear, sq_diff_accumulate, weighted_diff, add_inplace, sub_inplace,
      axpy,          det2_identity, adam_direction,     dot,           sum,
  };
  return table;
}

}  // namespace t1moco::kernels
