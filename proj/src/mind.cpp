#include <algorithm>
#include <cmath>

#include "t1moco/kernels.hpp"
#include "t1moco/metrics.hpp"

namespace t1moco::metrics {
namespace {

// Replicate-padded copy of the normalized image.
struct Padded {
  int pad = 0;
  int width = 0;
  int height = 0;
  std::vector<double> values;

  const double* at(int x, int y) const {
    return values.data() + static_cast<std::size_t>(y + pad) * width + (x + pad);
  }
};

Padded replicate_pad(const std::vector<double>& v, GridSize g, int pad) {
  Padded p{pad, g.width + 2 * pad, g.height + 2 * pad, {}};
  p.values.resize(static_cast<std::size_t>(p.width) * p.height);
  for (int y = 0; y < p.height; ++y) {
    const int sy = std::clamp(y - pad, 0, g.height - 1);
    const double* src = v.data() + static_cast<std::size_t>(sy) * g.width;
    double* dst = p.values.data() + static_cast<std::size_t>(y) * p.width;
    for (int x = 0; x < p.width; ++x) dst[x] = src[std::clamp(x - pad, 0, g.width - 1)];
  }
  return p;
}

// Normalized 1-D Gaussian taps; the 2-D patch weight is their product.
std::vector<double> taps(const MetricParams& p) {
  const int r = p.mind_patch_radius;
  std::vector<double> w(2 * r + 1);
  double total = 0.0;
  for (int d = -r; d <= r; ++d) {
    w[d + r] = std::exp(-(d * d) / (2.0 * p.mind_sigma * p.mind_sigma));
    total += w[d + r];
  }
  for (double& x : w) x /= total;
  return w;
}

// Patch-sum layout: squared differences live on the grid extended by the
// patch radius R on every side; the horizontal pass keeps the extra rows.
struct Layout {
  int r = 0;
  int width = 0;   // grid width
  int height = 0;  // grid height
  int ew = 0;      // extended width, W + 2R
  int eh = 0;      // extended height, H + 2R
};

}  // namespace

MindDescriptor mind_descriptor(const std::vector<double>& v, GridSize g, const MetricParams& p) {
  const auto& k = kernels::active();
  const std::size_t n = g.pixels();
  const Layout l{p.mind_patch_radius, g.width, g.height, g.width + 2 * p.mind_patch_radius,
                 g.height + 2 * p.mind_patch_radius};
  const Padded pad = replicate_pad(v, g, l.r + 1);
  const auto w = taps(p);

  MindDescriptor d;
  d.width = g.width;
  d.height = g.height;
  std::vector<double> sq(static_cast<std::size_t>(l.ew) * l.eh), rows;
  rows.resize(static_cast<std::size_t>(g.width) * l.eh);
  for (std::size_t r = 0; r < 4; ++r) {
    const auto [sx, sy] = kMindShifts[r];
    std::fill(sq.begin(), sq.end(), 0.0);
    for (int y = 0; y < l.eh; ++y) {
      k.sq_diff_accumulate(sq.data() + static_cast<std::size_t>(y) * l.ew, pad.at(-l.r, y - l.r),
                           pad.at(-l.r + sx, y - l.r + sy), 1.0, static_cast<std::size_t>(l.ew));
    }
    std::fill(rows.begin(), rows.end(), 0.0);
    for (int y = 0; y < l.eh; ++y) {
      double* out = rows.data() + static_cast<std::size_t>(y) * g.width;
      const double* in = sq.data() + static_cast<std::size_t>(y) * l.ew;
      for (int t = 0; t <= 2 * l.r; ++t) k.axpy(out, out, in + t, w[t], g.width);
    }
    auto& dist = d.distance[r];
    dist.assign(n, 0.0);
    for (int y = 0; y < g.height; ++y) {
      double* out = dist.data() + static_cast<std::size_t>(y) * g.width;
      for (int t = 0; t <= 2 * l.r; ++t) {
        k.axpy(out, out, rows.data() + static_cast<std::size_t>(y + t) * g.width, w[t], g.width);
      }
    }
  }

  d.variance.resize(n);
  d.variance_floored.resize(n);
  d.argmin.resize(n);
  for (auto& c : d.channels) c.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    std::uint8_t am = 0;
    for (std::uint8_t r = 0; r < 4; ++r) {
      mean += d.distance[r][i];
      if (d.distance[r][i] < d.distance[am][i]) am = r;
    }
    mean *= 0.25;
    const bool floored = !(mean > p.mind_variance_floor);
    const double var = floored ? p.mind_variance_floor : mean;
    d.variance[i] = var;
    d.variance_floored[i] = floored;
    d.argmin[i] = am;
    const double dmin = d.distance[am][i];
    const double inv = 1.0 / var;
    for (std::size_t r = 0; r < 4; ++r) d.channels[r][i] = std::exp(-(d.distance[r][i] - dmin) * inv);
  }
  return d;
}

void mind_descriptor_backward(const std::vector<double>& v, const MindDescriptor& desc,
                              const MetricParams& p,
                              const std::array<std::vector<double>, 4>& d_channels,
                              std::vector<double>& d_image) {
  const auto& k = kernels::active();
  const GridSize g{desc.width, desc.height};
  const std::size_t n = g.pixels();
  const Layout l{p.mind_patch_radius, g.width, g.height, g.width + 2 * p.mind_patch_radius,
                 g.height + 2 * p.mind_patch_radius};

  // Back through the exponential, the min and the variance estimate.
  std::array<std::vector<double>, 4> d_dist;
  for (auto& dd : d_dist) dd.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double var = desc.variance[i];
    const double dmin = desc.distance[desc.argmin[i]][i];
    double to_min = 0.0;
    double to_var = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
      const double gm = d_channels[r][i] * desc.channels[r][i];
      if (gm == 0.0) continue;
      d_dist[r][i] -= gm / var;
      to_min += gm / var;
      to_var += gm * (desc.distance[r][i] - dmin) / (var * var);
    }
    d_dist[desc.argmin[i]][i] += to_min;
    if (!desc.variance_floored[i]) {
      for (std::size_t r = 0; r < 4; ++r) d_dist[r][i] += 0.25 * to_var;
    }
  }

  // Back through the two filter passes and the squared differences.
  const Padded pad = replicate_pad(v, g, l.r + 1);
  const auto w = taps(p);
  std::vector<double> d_pad(pad.values.size(), 0.0);
  std::vector<double> d_rows(static_cast<std::size_t>(g.width) * l.eh),
      d_sq(static_cast<std::size_t>(l.ew) * l.eh);
  auto d_at = [&](int x, int y) {
    return d_pad.data() + static_cast<std::size_t>(y + pad.pad) * pad.width + (x + pad.pad);
  };
  for (std::size_t r = 0; r < 4; ++r) {
    const auto [sx, sy] = kMindShifts[r];
    std::fill(d_rows.begin(), d_rows.end(), 0.0);
    for (int y = 0; y < g.height; ++y) {
      const double* gin = d_dist[r].data() + static_cast<std::size_t>(y) * g.width;
      for (int t = 0; t <= 2 * l.r; ++t) {
        double* out = d_rows.data() + static_cast<std::size_t>(y + t) * g.width;
        k.axpy(out, out, gin, w[t], g.width);
      }
    }
    std::fill(d_sq.begin(), d_sq.end(), 0.0);
    for (int y = 0; y < l.eh; ++y) {
      const double* gin = d_rows.data() + static_cast<std::size_t>(y) * g.width;
      double* row = d_sq.data() + static_cast<std::size_t>(y) * l.ew;
      for (int t = 0; t <= 2 * l.r; ++t) k.axpy(row + t, row + t, gin, w[t], g.width);
    }
    // Each squared difference feeds back into both of its pixels.
    for (int y = 0; y < l.eh; ++y) {
      double* row = d_sq.data() + static_cast<std::size_t>(y) * l.ew;
      k.weighted_diff(row, row, pad.at(-l.r, y - l.r), pad.at(-l.r + sx, y - l.r + sy), 2.0,
                      static_cast<std::size_t>(l.ew));
      k.add_inplace(d_at(-l.r, y - l.r), row, static_cast<std::size_t>(l.ew));
      k.sub_inplace(d_at(-l.r + sx, y - l.r + sy), row, static_cast<std::size_t>(l.ew));
    }
  }

  // Fold replicated border gradients back onto the source pixels.
  for (int y = 0; y < pad.height; ++y) {
    const int srcy = std::clamp(y - pad.pad, 0, g.height - 1);
    double* dst = d_image.data() + static_cast<std::size_t>(srcy) * g.width;
    const double* src = d_pad.data() + static_cast<std::size_t>(y) * pad.width;
    for (int x = 0; x < pad.width; ++x) dst[std::clamp(x - pad.pad, 0, g.width - 1)] += src[x];
  }
}

}  // namespace t1moco::metrics
