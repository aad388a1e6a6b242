#include "t1moco/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "t1moco/kernels.hpp"

namespace t1moco::optimizer {

void SolveConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (levels < 1) fail("solve.levels must be >= 1");
  if (iters_per_level.size() != static_cast<std::size_t>(levels)) {
    fail("solve.iters_per_level must have one entry per level");
  }
  for (int it : iters_per_level) {
    if (it <= 0) fail("solve.iters_per_level entries must be > 0");
  }
  if (!(affine_step > 0.0) || !std::isfinite(affine_step)) fail("solve.affine_step must be > 0");
  if (!(field_step > 0.0) || !std::isfinite(field_step)) fail("solve.field_step must be > 0");
  if (!(step_growth >= 1.0) || !std::isfinite(step_growth)) {
    fail("solve.step_growth must be >= 1");
  }
  if (!(convergence_tol >= 0.0)) fail("solve.convergence_tol must be >= 0");
  weights.validate();
  metric_params.validate();
  loss_weights.validate();
}

DisplacementField RegistrationResult::total_field() const {
  const DisplacementField a = warp::affine_to_field(affine, field_xy.width(), field_xy.height());
  return warp::compose(a, field_xy);
}

namespace pyramid {

Image2D downsample(const Image2D& img) {
  const int w = img.width();
  const int h = img.height();
  const int cw = (w + 1) / 2;
  const int ch = (h + 1) / 2;
  Image2D out(cw, ch);
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      double s = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int sy = std::clamp(2 * y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) s += img(std::clamp(2 * x + dx, 0, w - 1), sy);
      }
      out(x, y) = s / 9.0;
    }
  }
  return out;
}

LabelMask downsample(const LabelMask& mask) {
  const int cw = (mask.width() + 1) / 2;
  const int ch = (mask.height() + 1) / 2;
  LabelMask out(cw, ch, mask.num_classes());
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) out(x, y) = mask(2 * x, 2 * y);
  }
  return out;
}

DisplacementField upsample(const DisplacementField& field, GridSize fine) {
  // Coarse pixel i sits at fine coordinate 2i, so fine pixel x samples the
  // coarse planes at x / 2.
  const int cw = field.width();
  const int ch = field.height();
  const auto ux = field.ux();
  const auto uy = field.uy();
  DisplacementField out(fine.width, fine.height);
  auto ox = out.ux();
  auto oy = out.uy();
  for (int y = 0; y < fine.height; ++y) {
    const double sy = std::min(0.5 * y, ch - 1.0);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, ch - 1);
    const double fy = sy - y0;
    for (int x = 0; x < fine.width; ++x) {
      const double sx = std::min(0.5 * x, cw - 1.0);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, cw - 1);
      const double fx = sx - x0;
      const std::size_t a = static_cast<std::size_t>(y0) * cw + x0;
      const std::size_t b = static_cast<std::size_t>(y0) * cw + x1;
      const std::size_t c = static_cast<std::size_t>(y1) * cw + x0;
      const std::size_t d = static_cast<std::size_t>(y1) * cw + x1;
      const double wa = (1 - fx) * (1 - fy), wb = fx * (1 - fy), wc = (1 - fx) * fy, wd = fx * fy;
      const std::size_t i = static_cast<std::size_t>(y) * fine.width + x;
      ox[i] = 2.0 * (wa * ux[a] + wb * ux[b] + wc * ux[c] + wd * ux[d]);
      oy[i] = 2.0 * (wa * uy[a] + wb * uy[b] + wc * uy[c] + wd * uy[d]);
    }
  }
  return out;
}

int usable_levels(GridSize g, int requested) {
  int levels = 1;
  int w = g.width;
  int h = g.height;
  while (levels < requested) {
    w = (w + 1) / 2;
    h = (h + 1) / 2;
    if (std::min(w, h) < 8) break;
    ++levels;
  }
  return levels;
}

}  // namespace pyramid

namespace {

struct AdamOptions {
  double step = 0.1;
  int iters = 100;
  double tol = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int max_backtracks = 10;
  int max_nonfinite = 5;
  int patience = 3;
  double growth = 1.0;
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Minimizes eval(x, grad) -> value (NaN when not finite). on_accept(iter,
// step, value) runs after each accepted step, while the evaluator's most
// recent state still describes the accepted point. After an accepted step
// the step grows by `growth`, capped at the initial step.
template <class Eval, class OnAccept>
void run_adam(std::vector<double>& x, Eval&& eval, OnAccept&& on_accept, const AdamOptions& o) {
  const auto& k = kernels::active();
  const std::size_t n = x.size();
  std::vector<double> grad(n), trial_grad(n), m(n, 0.0), v(n, 0.0), dir(n), trial(n);
  double value = eval(x, grad);
  if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteLoss, "initial loss not finite");
  on_accept(0, 0.0, value);
  double step = o.step;
  int quiet = 0;
  double b1t = 1.0;
  double b2t = 1.0;
  for (int it = 1; it <= o.iters; ++it) {
    b1t *= o.beta1;
    b2t *= o.beta2;
    k.adam_direction(grad.data(), m.data(), v.data(), dir.data(),
                     {o.beta1, o.beta2, 1.0 - b1t, 1.0 - b2t, o.eps}, n);
    bool accepted = false;
    int nonfinite = 0;
    double trial_value = kNaN;
    for (int attempt = 0; attempt <= o.max_backtracks; ++attempt) {
      k.axpy(trial.data(), x.data(), dir.data(), -step, n);
      trial_value = eval(trial, trial_grad);
      if (!std::isfinite(trial_value)) {
        if (++nonfinite >= o.max_nonfinite) {
          throw Error(ErrorCode::NonFiniteLoss, "loss diverged after repeated step halving");
        }
        step *= 0.5;
        continue;
      }
      if (trial_value <= value) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return;
    const double change = std::abs(value - trial_value) / std::max(std::abs(value), 1e-12);
    x.swap(trial);
    grad.swap(trial_grad);
    value = trial_value;
    on_accept(it, step, value);
    step = std::min(o.step, step * o.growth);
    quiet = change < o.tol ? quiet + 1 : 0;
    if (quiet >= o.patience) return;
  }
}

// Per-row scale turning normalized affine coordinates into pixels.
std::array<double, 6> affine_scales(GridSize g) {
  const double sx = std::max(1.0, 0.5 * (g.width - 1));
  const double sy = std::max(1.0, 0.5 * (g.height - 1));
  return {sx, sx, sx, sy, sy, sy};
}

std::vector<Image2D> build_pyramid(const Image2D& img, int levels) {
  std::vector<Image2D> out{img};
  for (int l = 1; l < levels; ++l) out.push_back(pyramid::downsample(out.back()));
  return out;
}

std::vector<LabelMask> build_pyramid(const LabelMask& m, int levels) {
  std::vector<LabelMask> out{m};
  for (int l = 1; l < levels; ++l) out.push_back(pyramid::downsample(out.back()));
  return out;
}

// Iteration counts for the levels actually used (the finest ones).
std::vector<int> level_iters(const SolveConfig& cfg, int levels) {
  return {cfg.iters_per_level.end() - levels, cfg.iters_per_level.end()};
}

double relative_variance(const Image2D& img, double range) {
  if (!(range > 0.0)) return 0.0;
  const auto d = img.data();
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double x : d) var += (x - mean) * (x - mean);
  var /= static_cast<double>(d.size());
  return var / (range * range);
}

constexpr double kLowVariance = 1e-4;

void flatten(const DisplacementField& a, const DisplacementField& b, std::vector<double>& x) {
  const std::size_t n = a.size();
  x.resize(4 * n);
  std::copy(a.ux().begin(), a.ux().end(), x.begin());
  std::copy(a.uy().begin(), a.uy().end(), x.begin() + n);
  std::copy(b.ux().begin(), b.ux().end(), x.begin() + 2 * n);
  std::copy(b.uy().begin(), b.uy().end(), x.begin() + 3 * n);
}

void unflatten(const std::vector<double>& x, DisplacementField& a, DisplacementField& b) {
  const std::size_t n = a.size();
  std::copy(x.begin(), x.begin() + n, a.ux().begin());
  std::copy(x.begin() + n, x.begin() + 2 * n, a.uy().begin());
  std::copy(x.begin() + 2 * n, x.begin() + 3 * n, b.ux().begin());
  std::copy(x.begin() + 3 * n, x.end(), b.uy().begin());
}

}  // namespace

AffineSolve solve_affine(const Image2D& moving, const Image2D& fixed, const SolveConfig& cfg) {
  cfg.validate();
  require_same_grid(moving.grid(), fixed.grid(), "affine registration");
  if (!moving.all_finite() || !fixed.all_finite()) {
    throw Error(ErrorCode::NonFiniteData, "registration input not finite");
  }
  const int levels = pyramid::usable_levels(fixed.grid(), cfg.levels);
  const auto iters = level_iters(cfg, levels);
  const auto moving_pyr = build_pyramid(moving, levels);
  const auto fixed_pyr = build_pyramid(fixed, levels);
  const unsigned comps = metrics::active_components(cfg.weights);

  AffineSolve out;
  for (int l = 0; l < levels; ++l) {
    const int idx = levels - 1 - l;
    const Image2D& mv = moving_pyr[idx];
    const metrics::Reference ref(fixed_pyr[idx], cfg.metric_params, comps);
    const auto scale = affine_scales(mv.grid());
    const AffineParams start = out.affine;
    auto to_theta = [&](const std::vector<double>& q) {
      AffineParams a = start;
      for (int i = 0; i < 6; ++i) a.theta[i] += q[i] / scale[i];
      return a;
    };
    std::vector<double> q(6, 0.0);
    auto eval = [&](const std::vector<double>& p, std::vector<double>& grad) {
      const AffineParams a = to_theta(p);
      if (!a.all_finite()) return kNaN;
      const auto obj = losses::affine_objective(mv, ref, a, cfg.weights, true);
      for (int i = 0; i < 6; ++i) grad[i] = obj.grad[i] / scale[i];
      return std::isfinite(obj.value) ? obj.value : kNaN;
    };
    auto on_accept = [&](int it, double step, double value) {
      out.trace.push_back({l, it, step, value});
    };
    AdamOptions opts;
    opts.step = cfg.affine_step;
    opts.iters = iters[l];
    opts.tol = cfg.convergence_tol;
    run_adam(q, eval, on_accept, opts);
    out.affine = to_theta(q);
  }
  return out;
}

RegistrationResult solve_deformable(const Image2D& ax, const Image2D& fixed,
                                    std::optional<losses::MaskPair> masks,
                                    const SolveConfig& cfg) {
  cfg.validate();
  require_same_grid(ax.grid(), fixed.grid(), "deformable registration");
  if (!ax.all_finite() || !fixed.all_finite()) {
    throw Error(ErrorCode::NonFiniteData, "registration input not finite");
  }
  const bool with_masks = cfg.use_masks && masks && masks->sx && masks->sy;
  const int levels = pyramid::usable_levels(fixed.grid(), cfg.levels);
  const auto iters = level_iters(cfg, levels);
  const auto ax_pyr = build_pyramid(ax, levels);
  const auto fixed_pyr = build_pyramid(fixed, levels);
  std::vector<LabelMask> sx_pyr, sy_pyr;
  if (with_masks) {
    sx_pyr = build_pyramid(*masks->sx, levels);
    sy_pyr = build_pyramid(*masks->sy, levels);
  }
  const unsigned comps = metrics::active_components(cfg.weights);

  RegistrationResult out;
  DisplacementField phi_xy, phi_yx;
  for (int l = 0; l < levels; ++l) {
    const int idx = levels - 1 - l;
    const Image2D& a = ax_pyr[idx];
    const Image2D& y = fixed_pyr[idx];
    if (l == 0) {
      phi_xy = DisplacementField(a.width(), a.height());
      phi_yx = DisplacementField(a.width(), a.height());
    } else {
      phi_xy = pyramid::upsample(phi_xy, a.grid());
      phi_yx = pyramid::upsample(phi_yx, a.grid());
    }
    const metrics::Reference ref_a(a, cfg.metric_params, comps);
    const metrics::Reference ref_y(y, cfg.metric_params, comps);
    const losses::PairContext ctx{&a, &y, &ref_a, &ref_y, cfg.weights};
    std::optional<losses::MaskPair> level_masks;
    if (with_masks) level_masks = losses::MaskPair{&sx_pyr[idx], &sy_pyr[idx]};

    DisplacementField fx = phi_xy, fy = phi_yx;
    losses::FieldGradients grads;
    losses::LossBreakdown last;
    auto eval = [&](const std::vector<double>& p, std::vector<double>& grad) {
      unflatten(p, fx, fy);
      grads = {};
      try {
        last = losses::total_reg_loss(ctx, fx, fy, level_masks, cfg.loss_weights, &grads);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NonFiniteLoss) return kNaN;
        throw;
      }
      flatten(grads.d_xy, grads.d_yx, grad);
      return last.total;
    };
    auto on_accept = [&](int it, double step, double) {
      out.loss_trace.push_back({l, it, step, last});
    };
    std::vector<double> x;
    flatten(phi_xy, phi_yx, x);
    AdamOptions opts;
    opts.step = cfg.field_step;
    opts.growth = cfg.step_growth;
    opts.iters = iters[l];
    opts.tol = cfg.convergence_tol;
    run_adam(x, eval, on_accept, opts);
    unflatten(x, phi_xy, phi_yx);
  }
  out.field_xy = std::move(phi_xy);
  out.field_yx = std::move(phi_yx);
  out.moved = warp::warp_image(ax, out.field_xy);
  out.folding = warp::folding_count(out.field_xy);
  return out;
}

RegistrationResult register_pair(const Image2D& moving, const Image2D& fixed,
                                 const SolveConfig& cfg, const LabelMask* moving_mask,
                                 const LabelMask* fixed_mask) {
  cfg.validate();
  require_same_grid(moving.grid(), fixed.grid(), "registration");
  AffineSolve affine;
  if (cfg.run_affine) affine = solve_affine(moving, fixed, cfg);
  const DisplacementField afield =
      warp::affine_to_field(affine.affine, moving.width(), moving.height());
  const Image2D ax = warp::warp_image(moving, afield);

  RegistrationResult out;
  if (cfg.run_deformable) {
    std::optional<LabelMask> ax_mask;
    std::optional<losses::MaskPair> masks;
    if (moving_mask && fixed_mask) {
      ax_mask = warp::warp_labels(*moving_mask, afield);
      masks = losses::MaskPair{&*ax_mask, fixed_mask};
    }
    out = solve_deformable(ax, fixed, masks, cfg);
  } else {
    out.field_xy = DisplacementField(moving.width(), moving.height());
    out.field_yx = DisplacementField(moving.width(), moving.height());
    out.moved = ax;
  }
  out.affine = affine.affine;
  out.affine_trace = std::move(affine.trace);
  const double range = std::max(moving.max(), fixed.max()) - std::min(moving.min(), fixed.min());
  if (relative_variance(moving, range) < kLowVariance) {
    out.low_variance = true;
    out.warnings.push_back("moving image variance below 1e-4 of the intensity range squared");
  }
  return out;
}

namespace {

int resolve_threads(int requested, std::size_t jobs) {
  int n = requested;
  if (n <= 0) {
    if (const char* env = std::getenv("T1MOCO_THREADS")) n = std::atoi(env);
  }
  if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::clamp(n, 1, static_cast<int>(std::max<std::size_t>(jobs, 1)));
}

}  // namespace

CorrectionResult motion_correct_series(const T1Series& series, const SolveConfig& cfg,
                                       int threads) {
  series.validate(2);
  cfg.validate();
  const std::size_t nf = series.size();
  const std::size_t ref = series.reference_index;
  double lo = series.frames[0].min();
  double hi = series.frames[0].max();
  for (const auto& f : series.frames) {
    lo = std::min(lo, f.min());
    hi = std::max(hi, f.max());
  }

  CorrectionResult out;
  out.corrected = series;
  out.frames.resize(nf);
  std::vector<std::size_t> jobs;
  for (std::size_t i = 0; i < nf; ++i) {
    if (i != ref) jobs.push_back(i);
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1)) {
      const std::size_t i = jobs[j];
      FrameOutcome& slot = out.frames[i];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const LabelMask* mm = series.has_masks() ? &series.masks[i] : nullptr;
        const LabelMask* fm = series.has_masks() ? &series.masks[ref] : nullptr;
        RegistrationResult r = register_pair(series.frames[i], series.frames[ref], cfg, mm, fm);
        r.low_variance = relative_variance(series.frames[i], hi - lo) < kLowVariance;
        if (!r.low_variance) r.warnings.clear();
        out.corrected.frames[i] = r.moved;
        if (series.has_masks()) {
          out.corrected.masks[i] = warp::warp_labels(series.masks[i], r.total_field());
        }
        slot.result = std::move(r);
      } catch (const std::exception& e) {
        slot.error = e.what();
      }
      slot.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const int n = resolve_threads(threads, jobs.size());
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

}  // namespace t1moco::optimizer
