#include "t1moco/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "t1moco/warp.hpp"

namespace t1moco::phantom {

void PhantomSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidSpec, msg); };
  if (width < 16 || height < 16) fail("phantom grid must be at least 16x16");
  if (frames < 2) fail("phantom needs at least 2 frames");
  if (inversion_times.size() != static_cast<std::size_t>(frames)) {
    fail("inversion_times must list one value per frame");
  }
  for (std::size_t i = 0; i < inversion_times.size(); ++i) {
    if (!(inversion_times[i] > 0.0)) fail("inversion times must be positive");
    if (i > 0 && !(inversion_times[i] > inversion_times[i - 1])) {
      fail("inversion times must be strictly increasing");
    }
  }
  for (double t1 : {t1_myo, t1_blood, t1_background}) {
    if (!(t1 > 0.0) || !std::isfinite(t1)) fail("T1 values must be positive");
  }
  if (!(ring_radii[0] > 0.0 && ring_radii[0] < ring_radii[1])) {
    fail("ring radii must satisfy 0 < inner < outer");
  }
  if (!(rv_radius >= 0.0) || !(rv_offset >= 0.0)) fail("RV geometry must be non-negative");
  if (!(motion_amplitude >= 0.0) || !std::isfinite(motion_amplitude)) {
    fail("motion_amplitude must be >= 0");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail("noise_sigma must be >= 0");
}

PhantomSpec PhantomSpec::resized(int new_width, int new_height) const {
  PhantomSpec out = *this;
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  const double s = std::min(sx, sy);
  out.width = new_width;
  out.height = new_height;
  out.ring_center = {ring_center[0] * sx, ring_center[1] * sy};
  out.ring_radii = {ring_radii[0] * s, ring_radii[1] * s};
  out.rv_offset = rv_offset * s;
  out.rv_radius = rv_radius * s;
  return out;
}

std::vector<double> default_inversion_times(int frames) {
  if (frames == 11) return PhantomSpec{}.inversion_times;
  std::vector<double> out;
  if (frames < 1) return out;
  if (frames == 1) return {100.0};
  for (int i = 0; i < frames; ++i) {
    const double t = static_cast<double>(i) / (frames - 1);
    out.push_back(std::round(100.0 * std::pow(30.0, t)));
  }
  return out;
}

double signal(double ti, double t1) { return 1.0 - 2.0 * std::exp(-ti / t1); }

namespace {

struct Tissue {
  Label label;
  double t1;
};

Tissue tissue_at(const PhantomSpec& s, double x, double y) {
  const double r = std::hypot(x - s.ring_center[0], y - s.ring_center[1]);
  if (r < s.ring_radii[0]) return {kBloodPool, s.t1_blood};
  if (r < s.ring_radii[1]) return {kMyocardium, s.t1_myo};
  const double rv = std::hypot(x - (s.ring_center[0] - s.rv_offset), y - s.ring_center[1]);
  if (rv < s.rv_radius) return {kBackground, s.t1_blood};
  return {kBackground, s.t1_background};
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Rigid motion about the ring centre plus three Gaussian bumps. The rigid
// part moves no point within `roi` of the centre by more than the
// amplitude; the bumps add at most half of it.
DisplacementField frame_motion(const PhantomSpec& s, std::mt19937_64& rng) {
  const int w = s.width;
  const int h = s.height;
  DisplacementField u(w, h);
  const double amp = s.motion_amplitude;
  if (amp == 0.0) return u;

  const double roi = s.ring_radii[1] + s.rv_offset + s.rv_radius;
  const double shift = amp * uniform(rng, 0.6, 0.9);
  const double dir = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double tx = shift * std::cos(dir);
  const double ty = shift * std::sin(dir);
  const double angle = uniform(rng, -1.0, 1.0) * (amp - shift) / roi;
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  const double cx = s.ring_center[0];
  const double cy = s.ring_center[1];

  constexpr int kBumps = 3;
  constexpr double kSigma = 12.0;
  std::array<std::array<double, 4>, kBumps> bumps{};  // cx, cy, ax, ay
  for (auto& b : bumps) {
    const double r = uniform(rng, 0.0, s.ring_radii[1] + 10.0);
    const double t = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    b = {cx + r * std::cos(t), cy + r * std::sin(t), std::cos(a), std::sin(a)};
  }
  std::vector<double> bx(u.size()), by(u.size());
  double peak = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double vx = 0.0;
      double vy = 0.0;
      for (const auto& b : bumps) {
        const double d2 = (x - b[0]) * (x - b[0]) + (y - b[1]) * (y - b[1]);
        const double g = std::exp(-d2 / (2.0 * kSigma * kSigma));
        vx += g * b[2];
        vy += g * b[3];
      }
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      bx[i] = vx;
      by[i] = vy;
      peak = std::max(peak, std::hypot(vx, vy));
    }
  }
  const double bump_scale = peak > 0.0 ? 0.5 * amp * uniform(rng, 0.5, 1.0) / peak : 0.0;

  auto ux = u.ux();
  auto uy = u.uy();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double px = x - cx;
      const double py = y - cy;
      ux[i] = ca * px - sa * py - px + tx + bump_scale * bx[i];
      uy[i] = sa * px + ca * py - py + ty + bump_scale * by[i];
    }
  }
  return u;
}

}  // namespace

PhantomData generate(const PhantomSpec& spec) {
  spec.validate();
  const int w = spec.width;
  const int h = spec.height;
  const std::size_t ref = spec.reference_index();

  PhantomData out;
  out.series.inversion_times = spec.inversion_times;
  out.series.reference_index = ref;
  out.t1_map = Image2D(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.t1_map(x, y) = tissue_at(spec, x, y).t1;
  }

  std::vector<std::vector<double>> clean(spec.frames);
  for (int f = 0; f < spec.frames; ++f) {
    std::seed_seq seq{spec.seed, static_cast<std::uint64_t>(f), std::uint64_t{0x7431}};
    std::mt19937_64 rng(seq);
    DisplacementField u = static_cast<std::size_t>(f) == ref ? DisplacementField(w, h)
                                                              : frame_motion(spec, rng);
    if (warp::folding_count(u) != 0) {
      throw Error(ErrorCode::InvalidSpec, "motion amplitude too large: ground truth folds");
    }
    LabelMask mask(w, h, kNumClasses);
    auto& img = clean[f];
    img.resize(static_cast<std::size_t>(w) * h);
    const double ti = spec.inversion_times[f];
    const auto ux = u.ux();
    const auto uy = u.uy();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const Tissue t = tissue_at(spec, x + ux[i], y + uy[i]);
        mask(x, y) = t.label;
        img[i] = signal(ti, t.t1);
      }
    }
    out.series.masks.push_back(std::move(mask));
    out.fields.push_back(std::move(u));
  }

  double lo = clean[0][0];
  double hi = lo;
  for (const auto& img : clean) {
    const auto [mn, mx] = std::minmax_element(img.begin(), img.end());
    lo = std::min(lo, *mn);
    hi = std::max(hi, *mx);
  }
  const double sigma = spec.noise_sigma * (hi - lo);
  for (int f = 0; f < spec.frames; ++f) {
    auto& img = clean[f];
    if (sigma > 0.0) {
      std::seed_seq seq{spec.seed, static_cast<std::uint64_t>(f), std::uint64_t{0x6e6f}};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> noise(0.0, sigma);
      for (double& v : img) v += noise(rng);
    }
    out.series.frames.emplace_back(w, h, std::move(img));
  }
  return out;
}

}  // namespace t1moco::phantom
