#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference version;
// SIMD variants are selected at runtime and must reproduce the scalar
// result bit-for-bit for elementwise kernels (reductions may differ in
// summation order only).
//
// Selection order: T1MOCO_SIMD environment variable ("scalar" or "avx2"),
// then the best instruction set the CPU reports.

#include <cstddef>
#include <span>
#include <string_view>

namespace t1moco::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

struct AdamCoefficients {
  double beta1;
  double beta2;
  double bias1;  // 1 - beta1^t
  double bias2;  // 1 - beta2^t
  double eps;
};

struct KernelTable {
  Isa isa;

  // out(x, y) = src sampled bilinearly at (x + ux, y + uy), coordinates
  // clamped to the grid rectangle.
  void (*warp_bilinear)(const double* src, int width, int height, const double* ux,
                        const double* uy, double* out);

  // acc[i] += w * (a[i] - b[i])^2
  void (*sq_diff_accumulate)(double* acc, const double* a, const double* b, double w,
                             std::size_t n);

  // out[i] = (g[i] * s) * (a[i] - b[i])
  void (*weighted_diff)(double* out, const double* g, const double* a, const double* b, double s,
                        std::size_t n);

  void (*add_inplace)(double* y, const double* x, std::size_t n);
  void (*sub_inplace)(double* y, const double* x, std::size_t n);

  // out[i] = x[i] + alpha * d[i]
  void (*axpy)(double* out, const double* x, const double* d, double alpha, std::size_t n);

  // out[i] = (1 + a[i]) * (1 + d[i]) - b[i] * c[i]
  void (*det2_identity)(const double* a, const double* b, const double* c, const double* d,
                        double* out, std::size_t n);

  // Updates first/second moments with g and writes the bias-corrected
  // step direction m_hat / (sqrt(v_hat) + eps).
  void (*adam_direction)(const double* g, double* m, double* v, double* dir,
                         AdamCoefficients c, std::size_t n);

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the variant is not compiled in or the CPU lacks support.
const KernelTable* avx2_table();

// The table used by the rest of the library.
const KernelTable& active();
Isa active_isa();
// Test hook; returns false if the requested ISA is unavailable.
bool force_isa(Isa isa);

}  // namespace t1moco::kernels
