#include "t1moco/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "t1moco/kernels.hpp"
#include "t1moco/warp.hpp"

namespace t1moco::metrics {

void WlsWeights::validate() const {
  const std::array<double, 4> w{ncc, mi, ngf, mind};
  bool any = false;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "WLs weights must be finite and non-negative");
    }
    any = any || v > 0.0;
  }
  if (!any) throw Error(ErrorCode::InvalidArgument, "at least one WLs weight must be positive");
}

void MetricParams::validate() const {
  if (mi_bins < 2) throw Error(ErrorCode::InvalidArgument, "mi_bins must be >= 2");
  if (!(ngf_eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "ngf_eps must be > 0");
  if (mind_patch_radius < 0) throw Error(ErrorCode::InvalidArgument, "mind_patch_radius must be >= 0");
  if (!(mind_sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "mind_sigma must be > 0");
  if (!(mind_variance_floor > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "mind_variance_floor must be > 0");
  }
}

unsigned active_components(const WlsWeights& w) {
  unsigned c = 0;
  if (w.ncc > 0.0) c |= kNcc;
  if (w.mi > 0.0) c |= kMi;
  if (w.ngf > 0.0) c |= kNgf;
  if (w.mind > 0.0) c |= kMind;
  return c;
}

Normalized normalize(const Image2D& img) {
  Normalized n;
  const auto data = img.data();
  const auto [mn, mx] = std::minmax_element(data.begin(), data.end());
  n.argmin = static_cast<std::size_t>(mn - data.begin());
  n.argmax = static_cast<std::size_t>(mx - data.begin());
  n.lo = *mn;
  n.hi = *mx;
  n.values.resize(data.size());
  const double range = n.hi - n.lo;
  if (!(range > 0.0)) {
    n.constant = true;
    std::fill(n.values.begin(), n.values.end(), 0.0);
    return n;
  }
  for (std::size_t i = 0; i < data.size(); ++i) n.values[i] = (data[i] - n.lo) / range;
  return n;
}

void chain_normalization(const Normalized& n, const std::vector<double>& g,
                         std::span<double> grad_raw) {
  if (n.constant) {
    std::fill(grad_raw.begin(), grad_raw.end(), 0.0);
    return;
  }
  const double range = n.hi - n.lo;
  double d_lo = 0.0;
  double d_hi = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    grad_raw[i] = g[i] / range;
    d_lo += g[i] * (n.values[i] - 1.0);
    d_hi -= g[i] * n.values[i];
  }
  grad_raw[n.argmin] += d_lo / range;
  grad_raw[n.argmax] += d_hi / range;
}

namespace {

struct HatBins {
  std::vector<int> bin;      // lower bin index
  std::vector<double> frac;  // weight of bin + 1
};

HatBins hat_bins(const std::vector<double>& v, int bins) {
  HatBins h{std::vector<int>(v.size()), std::vector<double>(v.size())};
  const double scale = bins - 1;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double t = v[i] * scale;
    const int k = std::clamp(static_cast<int>(std::floor(t)), 0, bins - 2);
    h.bin[i] = k;
    h.frac[i] = t - k;
  }
  return h;
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  std::vector<double> centered;
};

Moments moments(const std::vector<double>& v) {
  const auto& k = kernels::active();
  const double n = static_cast<double>(v.size());
  Moments m;
  m.mean = k.sum(v.data(), v.size()) / n;
  m.centered.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m.centered[i] = v[i] - m.mean;
  m.var = k.dot(m.centered.data(), m.centered.data(), v.size()) / n;
  return m;
}

struct Gradient2 {
  std::vector<double> gx, gy;
};

Gradient2 image_gradient(const std::vector<double>& v, GridSize g) {
  Gradient2 out{std::vector<double>(v.size()), std::vector<double>(v.size())};
  grid::diff_x(v.data(), g.width, g.height, out.gx.data());
  grid::diff_y(v.data(), g.width, g.height, out.gy.data());
  return out;
}

MetricValue finish(double score, bool degenerate, const Normalized& moving,
                   const std::vector<double>* grad_normalized, GridSize g, const char* name) {
  MetricValue out;
  out.score = score;
  out.degenerate = degenerate;
  if (degenerate) out.warnings.push_back(std::string(name) + ": degenerate (constant) image");
  if (grad_normalized) {
    Image2D grad(g.width, g.height);
    chain_normalization(moving, *grad_normalized, grad.data());
    out.grad = std::move(grad);
  }
  return out;
}

}  // namespace

struct Reference::Impl {
  GridSize grid;
  MetricParams params;
  unsigned components = 0;
  Normalized fixed;
  Moments fixed_moments;
  HatBins fixed_bins;
  Gradient2 fixed_gradient;
  std::vector<double> fixed_gradient_norm;  // |grad|^2 + eps^2
  MindDescriptor fixed_mind;

  void check(const Image2D& moving) const {
    require_same_grid(grid, moving.grid(), "metric arguments");
  }

  MetricValue ncc(const Normalized& a, bool want_grad) const {
    const std::size_t n = a.values.size();
    if (a.constant || fixed.constant) {
      std::vector<double> zero(n, 0.0);
      return finish(0.0, true, a, want_grad ? &zero : nullptr, grid, "ncc");
    }
    const Moments ma = moments(a.values);
    const auto& k = kernels::active();
    const double cov = k.dot(ma.centered.data(), fixed_moments.centered.data(), n) / n;
    const double sa = std::sqrt(ma.var);
    const double sb = std::sqrt(fixed_moments.var);
    const double score = cov / (sa * sb);
    std::vector<double> g;
    if (want_grad) {
      g.resize(n);
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        g[i] = inv_n * (fixed_moments.centered[i] / (sa * sb) - score * ma.centered[i] / ma.var);
      }
    }
    return finish(score, false, a, want_grad ? &g : nullptr, grid, "ncc");
  }

  MetricValue mi(const Normalized& a, bool want_grad) const {
    const std::size_t n = a.values.size();
    const int bins = params.mi_bins;
    if (a.constant || fixed.constant) {
      std::vector<double> zero(n, 0.0);
      return finish(0.0, true, a, want_grad ? &zero : nullptr, grid, "mi");
    }
    const HatBins ha = hat_bins(a.values, bins);
    const std::size_t kb = static_cast<std::size_t>(bins);
    std::vector<double> joint(kb * kb, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ka = ha.bin[i];
      const std::size_t kf = fixed_bins.bin[i];
      const double fa = ha.frac[i], ff = fixed_bins.frac[i];
      const double wa0 = 1.0 - fa, wf0 = 1.0 - ff;
      joint[ka * kb + kf] += wa0 * wf0 * inv_n;
      joint[ka * kb + kf + 1] += wa0 * ff * inv_n;
      joint[(ka + 1) * kb + kf] += fa * wf0 * inv_n;
      joint[(ka + 1) * kb + kf + 1] += fa * ff * inv_n;
    }
    std::vector<double> pa(kb, 0.0), pf(kb, 0.0);
    for (std::size_t r = 0; r < kb; ++r) {
      for (std::size_t c = 0; c < kb; ++c) {
        pa[r] += joint[r * kb + c];
        pf[c] += joint[r * kb + c];
      }
    }
    // log(P / (p q)), zero where P vanishes.
    std::vector<double> ratio(kb * kb, 0.0);
    double score = 0.0;
    for (std::size_t r = 0; r < kb; ++r) {
      for (std::size_t c = 0; c < kb; ++c) {
        const double p = joint[r * kb + c];
        if (p <= 0.0) continue;
        ratio[r * kb + c] = std::log(p / (pa[r] * pf[c]));
        score += p * ratio[r * kb + c];
      }
    }
    std::vector<double> g;
    if (want_grad) {
      g.resize(n);
      const double slope = (bins - 1) * inv_n;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ka = ha.bin[i];
        const std::size_t kf = fixed_bins.bin[i];
        const double ff = fixed_bins.frac[i];
        const double lower = (1.0 - ff) * ratio[ka * kb + kf] + ff * ratio[ka * kb + kf + 1];
        const double upper =
            (1.0 - ff) * ratio[(ka + 1) * kb + kf] + ff * ratio[(ka + 1) * kb + kf + 1];
        g[i] = slope * (upper - lower);
      }
    }
    return finish(score, false, a, want_grad ? &g : nullptr, grid, "mi");
  }

  MetricValue ngf(const Normalized& a, bool want_grad) const {
    const std::size_t n = a.values.size();
    const double eps2 = params.ngf_eps * params.ngf_eps;
    const Gradient2 ga = image_gradient(a.values, grid);
    double total = 0.0;
    std::vector<double> dgx, dgy;
    if (want_grad) {
      dgx.assign(n, 0.0);
      dgy.assign(n, 0.0);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double bx = fixed_gradient.gx[i], by = fixed_gradient.gy[i];
      const double ax = ga.gx[i], ay = ga.gy[i];
      const double s = ax * bx + ay * by;
      const double na = ax * ax + ay * ay + eps2;
      const double nb = fixed_gradient_norm[i];
      total += (s * s) / (na * nb);
      if (want_grad) {
        const double c1 = 2.0 * s / (na * nb);
        const double c2 = 2.0 * s * s / (na * na * nb);
        dgx[i] = inv_n * (c1 * bx - c2 * ax);
        dgy[i] = inv_n * (c1 * by - c2 * ay);
      }
    }
    std::vector<double> g;
    if (want_grad) {
      g.assign(n, 0.0);
      grid::diff_x_adjoint_add(dgx.data(), grid.width, grid.height, g.data());
      grid::diff_y_adjoint_add(dgy.data(), grid.width, grid.height, g.data());
    }
    return finish(total * inv_n, false, a, want_grad ? &g : nullptr, grid, "ngf");
  }

  MetricValue mind(const Normalized& a, bool want_grad) const {
    const std::size_t n = a.values.size();
    const MindDescriptor da = mind_descriptor(a.values, grid, params);
    const double scale = 1.0 / (4.0 * static_cast<double>(n));
    double total = 0.0;
    std::array<std::vector<double>, 4> d_channels;
    for (std::size_t r = 0; r < 4; ++r) {
      const auto& ca = da.channels[r];
      const auto& cb = fixed_mind.channels[r];
      if (want_grad) d_channels[r].assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double diff = ca[i] - cb[i];
        total += std::abs(diff);
        if (want_grad) d_channels[r][i] = diff > 0.0 ? -scale : (diff < 0.0 ? scale : 0.0);
      }
    }
    std::vector<double> g;
    if (want_grad) {
      g.assign(n, 0.0);
      mind_descriptor_backward(a.values, da, params, d_channels, g);
    }
    return finish(-total * scale, false, a, want_grad ? &g : nullptr, grid, "mind");
  }
};

Reference::Reference(const Image2D& fixed, const MetricParams& params, unsigned components)
    : impl_(std::make_unique<Impl>()) {
  params.validate();
  if (!fixed.all_finite()) throw Error(ErrorCode::NonFiniteData, "reference image not finite");
  impl_->grid = fixed.grid();
  impl_->params = params;
  impl_->components = components;
  impl_->fixed = normalize(fixed);
  if (components & kNcc) impl_->fixed_moments = moments(impl_->fixed.values);
  if (components & kMi) impl_->fixed_bins = hat_bins(impl_->fixed.values, params.mi_bins);
  if (components & kNgf) {
    impl_->fixed_gradient = image_gradient(impl_->fixed.values, impl_->grid);
    const double eps2 = params.ngf_eps * params.ngf_eps;
    const auto& gr = impl_->fixed_gradient;
    impl_->fixed_gradient_norm.resize(gr.gx.size());
    for (std::size_t i = 0; i < gr.gx.size(); ++i) {
      impl_->fixed_gradient_norm[i] = gr.gx[i] * gr.gx[i] + gr.gy[i] * gr.gy[i] + eps2;
    }
  }
  if (components & kMind) impl_->fixed_mind = mind_descriptor(impl_->fixed.values, impl_->grid, params);
}

Reference::~Reference() = default;
Reference::Reference(Reference&&) noexcept = default;
Reference& Reference::operator=(Reference&&) noexcept = default;

GridSize Reference::grid() const noexcept { return impl_->grid; }
const MetricParams& Reference::params() const noexcept { return impl_->params; }
unsigned Reference::components() const noexcept { return impl_->components; }

namespace {

void require_component(unsigned have, unsigned want, const char* name) {
  if (!(have & want)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string("reference was prepared without the ") + name + " component");
  }
}

}  // namespace

MetricValue Reference::ncc(const Image2D& moving, bool want_grad) const {
  require_component(impl_->components, kNcc, "ncc");
  impl_->check(moving);
  return impl_->ncc(normalize(moving), want_grad);
}

MetricValue Reference::mi(const Image2D& moving, bool want_grad) const {
  require_component(impl_->components, kMi, "mi");
  impl_->check(moving);
  return impl_->mi(normalize(moving), want_grad);
}

MetricValue Reference::ngf(const Image2D& moving, bool want_grad) const {
  require_component(impl_->components, kNgf, "ngf");
  impl_->check(moving);
  return impl_->ngf(normalize(moving), want_grad);
}

MetricValue Reference::mind(const Image2D& moving, bool want_grad) const {
  require_component(impl_->components, kMind, "mind");
  impl_->check(moving);
  return impl_->mind(normalize(moving), want_grad);
}

MetricValue Reference::wls(const Image2D& moving, const WlsWeights& w, bool want_grad) const {
  w.validate();
  impl_->check(moving);
  const unsigned needed = active_components(w);
  require_component(impl_->components, needed, "requested");
  if ((impl_->components & needed) != needed) {
    throw Error(ErrorCode::InvalidArgument, "reference lacks a weighted component");
  }
  const Normalized a = normalize(moving);
  MetricValue out;
  if (want_grad) out.grad = Image2D(moving.width(), moving.height());
  auto add = [&](double weight, MetricValue v) {
    out.score += weight * v.score;
    if (v.degenerate) out.degenerate = true;
    for (auto& msg : v.warnings) out.warnings.push_back(std::move(msg));
    if (want_grad) {
      auto dst = out.grad->data();
      const auto src = v.grad->data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weight * src[i];
    }
  };
  if (w.ncc > 0.0) add(w.ncc, impl_->ncc(a, want_grad));
  if (w.mi > 0.0) add(w.mi, impl_->mi(a, want_grad));
  if (w.ngf > 0.0) add(w.ngf, impl_->ngf(a, want_grad));
  if (w.mind > 0.0) add(w.mind, impl_->mind(a, want_grad));
  return out;
}

MetricValue ncc(const Image2D& i, const Image2D& j, bool want_grad) {
  require_same_grid(i.grid(), j.grid(), "ncc");
  return Reference(j, MetricParams{}, kNcc).ncc(i, want_grad);
}

MetricValue mi(const Image2D& i, const Image2D& j, int bins, bool want_grad) {
  require_same_grid(i.grid(), j.grid(), "mi");
  MetricParams p;
  p.mi_bins = bins;
  return Reference(j, p, kMi).mi(i, want_grad);
}

MetricValue ngf(const Image2D& i, const Image2D& j, double eps, bool want_grad) {
  require_same_grid(i.grid(), j.grid(), "ngf");
  MetricParams p;
  p.ngf_eps = eps;
  return Reference(j, p, kNgf).ngf(i, want_grad);
}

MetricValue mind(const Image2D& i, const Image2D& j, int patch_radius, double sigma,
                 bool want_grad) {
  require_same_grid(i.grid(), j.grid(), "mind");
  MetricParams p;
  p.mind_patch_radius = patch_radius;
  p.mind_sigma = sigma;
  return Reference(j, p, kMind).mind(i, want_grad);
}

MetricValue wls(const Image2D& i, const Image2D& j, const WlsWeights& w, const MetricParams& params,
                bool want_grad) {
  require_same_grid(i.grid(), j.grid(), "wls");
  w.validate();
  return Reference(j, params, active_components(w)).wls(i, w, want_grad);
}

}  // namespace t1moco::metrics
