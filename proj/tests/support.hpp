#pragma once

// Shared fixtures: textured test images, smooth fields and a central
// finite-difference checker.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <string>
#include <random>
#include <vector>

#include "t1moco/tensor.hpp"

namespace t1moco::testing {

// Sum of a few sinusoids plus a blob; smooth, non-constant everywhere and
// with no two pixels sharing the extreme values.
inline Image2D textured(int w, int h, double phase = 0.0) {
  Image2D img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / w;
      const double fy = static_cast<double>(y) / h;
      const double r2 = (fx - 0.45) * (fx - 0.45) + (fy - 0.55) * (fy - 0.55);
      img(x, y) = 0.4 * std::sin(6.1 * fx + 2.3 * fy + phase) +
                  0.3 * std::cos(4.7 * fy - 1.9 * fx + 0.5 * phase) + 0.8 * std::exp(-r2 / 0.03) +
                  0.01 * fx * fy;
    }
  }
  return img;
}

inline Image2D random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image2D img(w, h);
  for (double& v : img.data()) v = u(rng);
  return img;
}

// Smooth bump field with max |u| close to `amplitude`.
inline DisplacementField bump_field(int w, int h, double amplitude, double phase = 0.0) {
  DisplacementField f(w, h);
  const double cx = 0.5 * (w - 1);
  const double cy = 0.5 * (h - 1);
  const double s = 0.25 * std::min(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2.0 * s * s));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      f.ux()[i] = amplitude * g * std::cos(phase);
      f.uy()[i] = amplitude * g * std::sin(phase);
    }
  }
  return f;
}

inline DisplacementField random_field(int w, int h, std::uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  DisplacementField f(w, h);
  for (double& v : f.ux()) v = u(rng);
  for (double& v : f.uy()) v = u(rng);
  return f;
}

// Two-step central difference check of one coordinate. Reports the relative
// error against the extrapolated estimate and flags a kink when the two step
// sizes disagree by more than they should; such coordinates are skipped.
struct FdResult {
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool kink = false;
};

inline FdResult fd_check(const std::function<double(double)>& f, double x0, double analytic,
                         double h) {
  const double d1 = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
  const double d2 = (f(x0 + h / 2) - f(x0 - h / 2)) / h;
  // Richardson extrapolation of the two estimates.
  const double d = (4.0 * d2 - d1) / 3.0;
  FdResult r{analytic, d, 0.0, false};
  const double scale = std::max({std::abs(analytic), std::abs(d), 1e-6});
  // For a smooth function d1 - d2 is O(h^2); a larger gap means a kink.
  r.kink = std::abs(d1 - d2) > 2e-3 * scale;
  r.rel_error = std::abs(analytic - d) / scale;
  return r;
}

// fd_check at h, h/10 and h/100; the first result without a kink wins. A
// coordinate flagged at every step sits on a genuine kink.
inline FdResult fd_check_refined(const std::function<double(double)>& f, double x0,
                                 double analytic, double h) {
  FdResult r;
  for (int k = 0; k < 3; ++k, h *= 0.1) {
    r = fd_check(f, x0, analytic, h);
    if (!r.kink) break;
  }
  return r;
}

inline std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Relative paths of the regular files below `root`.
inline std::set<std::string> tree(const std::filesystem::path& root) {
  std::set<std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.insert(std::filesystem::relative(e.path(), root).string());
  }
  return out;
}

// Names of files that differ between two directory trees (missing on one
// side counts), ignoring the names in `skip`.
inline std::vector<std::string> tree_diff(const std::filesystem::path& a,
                                          const std::filesystem::path& b,
                                          const std::set<std::string>& skip = {}) {
  std::vector<std::string> out;
  const auto ta = tree(a);
  const auto tb = tree(b);
  std::set<std::string> all = ta;
  all.insert(tb.begin(), tb.end());
  for (const auto& name : all) {
    if (skip.count(name)) continue;
    if (!ta.count(name) || !tb.count(name) || file_bytes(a / name) != file_bytes(b / name)) {
      out.push_back(name);
    }
  }
  return out;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("t1moco_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace t1moco::testing
