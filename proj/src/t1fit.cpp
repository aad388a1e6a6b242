#include "t1moco/t1fit.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace t1moco::t1fit {
namespace {

struct Linear {
  double a = 0.0;
  double b = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

// Least squares for (A, B) with T1* fixed.
Linear solve_linear(std::span<const double> ti, std::span<const double> s, double t1_star) {
  const double n = static_cast<double>(ti.size());
  double se = 0.0, see = 0.0, ss = 0.0, sse_ = 0.0;
  for (std::size_t i = 0; i < ti.size(); ++i) {
    const double e = std::exp(-ti[i] / t1_star);
    se += e;
    see += e * e;
    ss += s[i];
    sse_ += s[i] * e;
  }
  // s ~ A - B e:  [n  -se; -se  see] [A; B] = [ss; -sse_]
  const double det = n * see - se * se;
  Linear out;
  if (!(std::abs(det) > 1e-300)) return out;
  out.a = (ss * see - se * sse_) / det;
  out.b = (ss * se - n * sse_) / det;
  out.sse = 0.0;
  for (std::size_t i = 0; i < ti.size(); ++i) {
    const double r = s[i] - (out.a - out.b * std::exp(-ti[i] / t1_star));
    out.sse += r * r;
  }
  return out;
}

double sum_sq(std::span<const double> ti, std::span<const double> s, double a, double b,
              double t) {
  double out = 0.0;
  for (std::size_t i = 0; i < ti.size(); ++i) {
    const double r = s[i] - (a - b * std::exp(-ti[i] / t));
    out += r * r;
  }
  return out;
}

// Solves the 3x3 system m x = r by Cramer's rule; false when singular.
bool solve3(const double m[3][3], const double r[3], double x[3]) {
  const auto det3 = [](const double q[3][3]) {
    return q[0][0] * (q[1][1] * q[2][2] - q[1][2] * q[2][1]) -
           q[0][1] * (q[1][0] * q[2][2] - q[1][2] * q[2][0]) +
           q[0][2] * (q[1][0] * q[2][1] - q[1][1] * q[2][0]);
  };
  const double d = det3(m);
  if (!(std::abs(d) > 1e-300) || !std::isfinite(d)) return false;
  for (int c = 0; c < 3; ++c) {
    double q[3][3];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) q[i][j] = j == c ? r[i] : m[i][j];
    }
    x[c] = det3(q) / d;
  }
  return true;
}

}  // namespace

PixelFit fit_pixel(std::span<const double> ti, std::span<const double> s, const FitOptions& opts) {
  PixelFit out;
  Linear best;
  double t = opts.t1_star_min;
  const double ratio = opts.grid_points > 1 ? std::pow(opts.t1_star_max / opts.t1_star_min,
                                                       1.0 / (opts.grid_points - 1))
                                            : 1.0;
  for (int g = 0; g < opts.grid_points; ++g) {
    const double cand = opts.t1_star_min * std::pow(ratio, g);
    const Linear l = solve_linear(ti, s, cand);
    if (l.sse < best.sse) {
      best = l;
      t = cand;
    }
  }
  double a = best.a;
  double b = best.b;
  double sse = best.sse;

  for (int it = 0; it < opts.gauss_newton_steps && std::isfinite(sse); ++it) {
    double jtj[3][3] = {};
    double jtr[3] = {};
    for (std::size_t i = 0; i < ti.size(); ++i) {
      const double e = std::exp(-ti[i] / t);
      const double r = s[i] - (a - b * e);
      const double j[3] = {1.0, -e, -b * e * ti[i] / (t * t)};
      for (int p = 0; p < 3; ++p) {
        jtr[p] += j[p] * r;
        for (int q = 0; q < 3; ++q) jtj[p][q] += j[p] * j[q];
      }
    }
    double delta[3];
    if (!solve3(jtj, jtr, delta)) break;
    // Shrink until the residual does not grow and T1* stays positive.
    double scale = 1.0;
    bool improved = false;
    for (int k = 0; k < 8; ++k, scale *= 0.5) {
      const double tn = t + scale * delta[2];
      if (!(tn > 0.0)) continue;
      const double an = a + scale * delta[0];
      const double bn = b + scale * delta[1];
      const double sn = sum_sq(ti, s, an, bn, tn);
      if (sn <= sse) {
        a = an;
        b = bn;
        t = tn;
        improved = sn < sse;
        sse = sn;
        break;
      }
    }
    if (!improved) break;
  }

  out.a = a;
  out.b = b;
  out.t1_star = t;
  out.residual = std::sqrt(sse / static_cast<double>(ti.size()));
  const bool ok = std::isfinite(out.residual) && a > 0.0 && b / a > 1.0 + 1e-3;
  out.failed = !ok;
  out.t1 = ok ? t * (b / a - 1.0) : 0.0;
  if (!std::isfinite(out.t1) || out.t1 <= 0.0) {
    out.failed = true;
    out.t1 = 0.0;
  }
  return out;
}

T1FitResult fit_t1(const T1Series& series, const FitOptions& opts) {
  series.validate(3);
  const GridSize g = series.grid();
  T1FitResult out;
  out.t1_map = Image2D(g.width, g.height);
  out.a_map = Image2D(g.width, g.height);
  out.b_map = Image2D(g.width, g.height);
  out.residual_map = Image2D(g.width, g.height);
  out.fail_mask = LabelMask(g.width, g.height, 2);
  std::vector<double> s(series.size());
  auto fail = out.fail_mask.labels();
  for (std::size_t p = 0; p < g.pixels(); ++p) {
    for (std::size_t f = 0; f < series.size(); ++f) s[f] = series.frames[f][p];
    const PixelFit fit = fit_pixel(series.inversion_times, s, opts);
    out.t1_map[p] = fit.t1;
    out.a_map[p] = fit.a;
    out.b_map[p] = fit.b;
    out.residual_map[p] = std::isfinite(fit.residual) ? fit.residual : 0.0;
    fail[p] = fit.failed ? 1 : 0;
  }
  return out;
}

}  // namespace t1moco::t1fit
