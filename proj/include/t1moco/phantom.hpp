#pragma once

// Synthetic inversion-recovery series: a ring-shaped left-ventricular
// myocardium around a blood pool, a right-ventricular blood pool and
// uniform background tissue, each frame displaced by a known smooth motion.

#include <array>
#include <cstdint>
#include <vector>

#include "t1moco/tensor.hpp"

namespace t1moco::phantom {

enum Label : std::uint8_t { kBackground = 0, kMyocardium = 1, kBloodPool = 2 };
inline constexpr int kNumClasses = 3;

struct PhantomSpec {
  int width = 160;
  int height = 144;
  int frames = 11;
  std::vector<double> inversion_times{100, 250, 400, 600, 800, 1000, 1200, 1500, 1900, 2400, 3000};
  double t1_myo = 1100.0;
  double t1_blood = 1700.0;
  double t1_background = 300.0;
  std::array<double, 2> ring_center{84.0, 74.0};  // x, y
  std::array<double, 2> ring_radii{14.0, 21.0};   // inner, outer
  double rv_offset = 36.0;  // RV pool centre sits this far left of the ring centre
  double rv_radius = 13.0;
  double motion_amplitude = 3.0;  // px
  double noise_sigma = 0.01;      // fraction of the noiseless signal range
  std::uint64_t seed = 1;

  // Throws InvalidSpec.
  void validate() const;
  // Same anatomy on another grid: centre scaled per axis, lengths by the
  // smaller of the two scale factors. Motion amplitude is left alone.
  PhantomSpec resized(int new_width, int new_height) const;
  // Frame registered against by the corrector (the last one).
  std::size_t reference_index() const { return static_cast<std::size_t>(frames - 1); }
};

// Evenly spread default inversion times for a given frame count.
std::vector<double> default_inversion_times(int frames);

struct PhantomData {
  T1Series series;                       // includes per-frame masks
  Image2D t1_map;                        // ground truth in reference geometry
  std::vector<DisplacementField> fields;  // frame(p) = reference(p + u(p))
};

PhantomData generate(const PhantomSpec& spec);

// Signed signal A - B exp(-TI / T1*) with A = 1, B = 2 and T1* = T1.
double signal(double ti, double t1);

}  // namespace t1moco::phantom
