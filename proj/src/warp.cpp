#include "t1moco/warp.hpp"

#include <algorithm>
#include <cmath>

#include "t1moco/kernels.hpp"

namespace t1moco {

bool AffineParams::all_finite() const noexcept {
  return std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); });
}

double AffineParams::max_abs_deviation_from_identity() const noexcept {
  const auto id = identity().theta;
  double m = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) m = std::max(m, std::abs(theta[i] - id[i]));
  return m;
}

namespace grid {

void diff_x(const double* in, int width, int height, double* out) {
  for (int y = 0; y < height; ++y) {
    const double* r = in + static_cast<std::size_t>(y) * width;
    double* o = out + static_cast<std::size_t>(y) * width;
    if (width == 1) {
      o[0] = 0.0;
      continue;
    }
    o[0] = r[1] - r[0];
    for (int x = 1; x < width - 1; ++x) o[x] = 0.5 * (r[x + 1] - r[x - 1]);
    o[width - 1] = r[width - 1] - r[width - 2];
  }
}

void diff_y(const double* in, int width, int height, double* out) {
  const std::size_t w = static_cast<std::size_t>(width);
  if (height == 1) {
    std::fill(out, out + w, 0.0);
    return;
  }
  for (std::size_t x = 0; x < w; ++x) out[x] = in[w + x] - in[x];
  for (int y = 1; y < height - 1; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (std::size_t x = 0; x < w; ++x) out[row + x] = 0.5 * (in[row + w + x] - in[row - w + x]);
  }
  const std::size_t last = static_cast<std::size_t>(height - 1) * w;
  for (std::size_t x = 0; x < w; ++x) out[last + x] = in[last + x] - in[last - w + x];
}

void diff_x_adjoint_add(const double* g, int width, int height, double* out) {
  if (width == 1) return;
  for (int y = 0; y < height; ++y) {
    const double* gr = g + static_cast<std::size_t>(y) * width;
    double* o = out + static_cast<std::size_t>(y) * width;
    o[1] += gr[0];
    o[0] -= gr[0];
    for (int x = 1; x < width - 1; ++x) {
      o[x + 1] += 0.5 * gr[x];
      o[x - 1] -= 0.5 * gr[x];
    }
    o[width - 1] += gr[width - 1];
    o[width - 2] -= gr[width - 1];
  }
}

void diff_y_adjoint_add(const double* g, int width, int height, double* out) {
  if (height == 1) return;
  const std::size_t w = static_cast<std::size_t>(width);
  for (std::size_t x = 0; x < w; ++x) {
    out[w + x] += g[x];
    out[x] -= g[x];
  }
  for (int y = 1; y < height - 1; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (std::size_t x = 0; x < w; ++x) {
      out[row + w + x] += 0.5 * g[row + x];
      out[row - w + x] -= 0.5 * g[row + x];
    }
  }
  const std::size_t last = static_cast<std::size_t>(height - 1) * w;
  for (std::size_t x = 0; x < w; ++x) {
    out[last + x] += g[last + x];
    out[last - w + x] -= g[last + x];
  }
}

}  // namespace grid

namespace warp {
namespace {

struct Sample {
  std::size_t i00, i10, i01, i11;
  double fx, fy;
  bool x_free, y_free;  // false when the coordinate was clamped
};

Sample locate(int x, int y, double ux, double uy, int width, int height) {
  const double xmax = width - 1;
  const double ymax = height - 1;
  const double rx = x + ux;
  const double ry = y + uy;
  const double sx = std::min(std::max(rx, 0.0), xmax);
  const double sy = std::min(std::max(ry, 0.0), ymax);
  const double x0 = std::floor(sx);
  const double y0 = std::floor(sy);
  const double x1 = std::min(x0 + 1.0, xmax);
  const double y1 = std::min(y0 + 1.0, ymax);
  const auto w = static_cast<std::size_t>(width);
  const auto ix0 = static_cast<std::size_t>(x0), ix1 = static_cast<std::size_t>(x1);
  const auto iy0 = static_cast<std::size_t>(y0), iy1 = static_cast<std::size_t>(y1);
  return {iy0 * w + ix0, iy0 * w + ix1, iy1 * w + ix0, iy1 * w + ix1, sx - x0, sy - y0,
          rx >= 0.0 && rx <= xmax, ry >= 0.0 && ry <= ymax};
}

void sample_plane(const double* src, GridSize g, const DisplacementField& field, double* out) {
  kernels::active().warp_bilinear(src, g.width, g.height, field.ux().data(), field.uy().data(), out);
}

// Backward pass of sample_plane for one plane.
void sample_plane_backward(const double* src, GridSize g, const DisplacementField& field,
                           const double* d_out, double* d_src, double* d_ux, double* d_uy) {
  const auto ux = field.ux();
  const auto uy = field.uy();
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * g.width + x;
      const double go = d_out[i];
      if (go == 0.0) continue;
      const Sample s = locate(x, y, ux[i], uy[i], g.width, g.height);
      const double gx = 1.0 - s.fx;
      const double gy = 1.0 - s.fy;
      if (d_src) {
        d_src[s.i00] += go * gx * gy;
        d_src[s.i10] += go * s.fx * gy;
        d_src[s.i01] += go * gx * s.fy;
        d_src[s.i11] += go * s.fx * s.fy;
      }
      if (d_ux || d_uy) {
        const double a = src[s.i00], b = src[s.i10], c = src[s.i01], d = src[s.i11];
        if (d_ux && s.x_free) d_ux[i] += go * (gy * (b - a) + s.fy * (d - c));
        if (d_uy && s.y_free) d_uy[i] += go * (gx * (c - a) + s.fx * (d - b));
      }
    }
  }
}

void prepare(Image2D* img, GridSize g) {
  if (img && img->grid() != g) *img = Image2D(g.width, g.height);
}

void prepare(DisplacementField* f, GridSize g) {
  if (f && f->grid() != g) *f = DisplacementField(g.width, g.height);
}

void require_min_grid(GridSize g, int min_side, const char* what) {
  if (g.width < min_side || g.height < min_side) {
    throw Error(ErrorCode::GridTooSmall, std::string(what) + " needs at least " +
                                             std::to_string(min_side) + "x" +
                                             std::to_string(min_side) + ", got " + to_string(g));
  }
}

struct Gradients {
  std::vector<double> a, b, c, d;  // dx ux, dy ux, dx uy, dy uy
};

Gradients field_gradients(const DisplacementField& field) {
  const GridSize g = field.grid();
  Gradients out{std::vector<double>(g.pixels()), std::vector<double>(g.pixels()),
                std::vector<double>(g.pixels()), std::vector<double>(g.pixels())};
  grid::diff_x(field.ux().data(), g.width, g.height, out.a.data());
  grid::diff_y(field.ux().data(), g.width, g.height, out.b.data());
  grid::diff_x(field.uy().data(), g.width, g.height, out.c.data());
  grid::diff_y(field.uy().data(), g.width, g.height, out.d.data());
  return out;
}

}  // namespace

Image2D warp_image(const Image2D& img, const DisplacementField& field) {
  require_same_grid(img.grid(), field.grid(), "warp_image");
  Image2D out(img.width(), img.height());
  sample_plane(img.data().data(), img.grid(), field, out.data().data());
  return out;
}

void warp_image_backward(const Image2D& img, const DisplacementField& field, const Image2D& d_out,
                         Image2D* d_img, DisplacementField* d_field) {
  require_same_grid(img.grid(), field.grid(), "warp_image_backward");
  require_same_grid(img.grid(), d_out.grid(), "warp_image_backward");
  prepare(d_img, img.grid());
  prepare(d_field, img.grid());
  sample_plane_backward(img.data().data(), img.grid(), field, d_out.data().data(),
                        d_img ? d_img->data().data() : nullptr,
                        d_field ? d_field->ux().data() : nullptr,
                        d_field ? d_field->uy().data() : nullptr);
}

DisplacementField warp_field(const DisplacementField& inner, const DisplacementField& by) {
  require_same_grid(inner.grid(), by.grid(), "warp_field");
  DisplacementField out(inner.width(), inner.height());
  sample_plane(inner.ux().data(), inner.grid(), by, out.ux().data());
  sample_plane(inner.uy().data(), inner.grid(), by, out.uy().data());
  return out;
}

void warp_field_backward(const DisplacementField& inner, const DisplacementField& by,
                         const DisplacementField& d_out, DisplacementField* d_inner,
                         DisplacementField* d_by) {
  require_same_grid(inner.grid(), by.grid(), "warp_field_backward");
  require_same_grid(inner.grid(), d_out.grid(), "warp_field_backward");
  prepare(d_inner, inner.grid());
  prepare(d_by, inner.grid());
  double* bx = d_by ? d_by->ux().data() : nullptr;
  double* bxy = d_by ? d_by->uy().data() : nullptr;
  sample_plane_backward(inner.ux().data(), inner.grid(), by, d_out.ux().data(),
                        d_inner ? d_inner->ux().data() : nullptr, bx, bxy);
  sample_plane_backward(inner.uy().data(), inner.grid(), by, d_out.uy().data(),
                        d_inner ? d_inner->uy().data() : nullptr, bx, bxy);
}

DisplacementField approx_inverse(const DisplacementField& field) {
  return warp_field(field, field) * -1.0;
}

DisplacementField approx_inverse_backward(const DisplacementField& field,
                                          const DisplacementField& d_inverse) {
  const DisplacementField neg = d_inverse * -1.0;
  DisplacementField d_field(field.width(), field.height());
  warp_field_backward(field, field, neg, &d_field, &d_field);
  return d_field;
}

DisplacementField compose(const DisplacementField& f, const DisplacementField& g) {
  require_same_grid(f.grid(), g.grid(), "compose");
  return warp_field(f, g) + g;
}

Image2D jacobian_det(const DisplacementField& field) {
  require_min_grid(field.grid(), 3, "jacobian_det");
  const Gradients gr = field_gradients(field);
  Image2D det(field.width(), field.height());
  kernels::active().det2_identity(gr.a.data(), gr.b.data(), gr.c.data(), gr.d.data(),
                                  det.data().data(), det.size());
  return det;
}

DisplacementField jacobian_det_backward(const DisplacementField& field, const Image2D& d_det) {
  require_min_grid(field.grid(), 3, "jacobian_det_backward");
  require_same_grid(field.grid(), d_det.grid(), "jacobian_det_backward");
  const GridSize g = field.grid();
  const Gradients gr = field_gradients(field);
  const std::size_t n = g.pixels();
  std::vector<double> ga(n), gb(n), gc(n), gd(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double go = d_det[i];
    ga[i] = go * (1.0 + gr.d[i]);
    gd[i] = go * (1.0 + gr.a[i]);
    gb[i] = -go * gr.c[i];
    gc[i] = -go * gr.b[i];
  }
  DisplacementField out(g.width, g.height);
  grid::diff_x_adjoint_add(ga.data(), g.width, g.height, out.ux().data());
  grid::diff_y_adjoint_add(gb.data(), g.width, g.height, out.ux().data());
  grid::diff_x_adjoint_add(gc.data(), g.width, g.height, out.uy().data());
  grid::diff_y_adjoint_add(gd.data(), g.width, g.height, out.uy().data());
  return out;
}

std::size_t folding_count(const DisplacementField& field) {
  const Image2D det = jacobian_det(field);
  return static_cast<std::size_t>(
      std::count_if(det.data().begin(), det.data().end(), [](double v) { return v <= 0.0; }));
}

DisplacementField affine_to_field(const AffineParams& a, int width, int height) {
  if (!a.all_finite()) throw Error(ErrorCode::InvalidArgument, "affine parameters not finite");
  if (width < 2 || height < 2) {
    throw Error(ErrorCode::GridTooSmall, "affine_to_field needs at least 2x2");
  }
  DisplacementField out(width, height);
  const double hx = 0.5 * (width - 1);
  const double hy = 0.5 * (height - 1);
  auto ux = out.ux();
  auto uy = out.uy();
  for (int y = 0; y < height; ++y) {
    const double yn = y / hy - 1.0;
    for (int x = 0; x < width; ++x) {
      const double xn = x / hx - 1.0;
      // Offset from (xn, yn) in normalized units; identity gives exact zeros.
      const double dxn = (a.theta[0] - 1.0) * xn + a.theta[1] * yn + a.theta[2];
      const double dyn = a.theta[3] * xn + (a.theta[4] - 1.0) * yn + a.theta[5];
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      ux[i] = dxn * hx;
      uy[i] = dyn * hy;
    }
  }
  return out;
}

std::array<double, 6> affine_to_field_backward(const DisplacementField& d_field) {
  const int width = d_field.width();
  const int height = d_field.height();
  const double hx = 0.5 * (width - 1);
  const double hy = 0.5 * (height - 1);
  const auto gx = d_field.ux();
  const auto gy = d_field.uy();
  std::array<double, 6> g{};
  for (int y = 0; y < height; ++y) {
    const double yn = y / hy - 1.0;
    for (int x = 0; x < width; ++x) {
      const double xn = x / hx - 1.0;
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      g[0] += gx[i] * hx * xn;
      g[1] += gx[i] * hx * yn;
      g[2] += gx[i] * hx;
      g[3] += gy[i] * hy * xn;
      g[4] += gy[i] * hy * yn;
      g[5] += gy[i] * hy;
    }
  }
  return g;
}

std::vector<Image2D> one_hot(const LabelMask& mask, int first_class) {
  std::vector<Image2D> maps;
  for (int k = first_class; k < mask.num_classes(); ++k) maps.push_back(mask.indicator(k));
  return maps;
}

LabelMask warp_labels(const LabelMask& mask, const DisplacementField& field) {
  require_same_grid(mask.grid(), field.grid(), "warp_labels");
  std::vector<Image2D> warped;
  for (const auto& m : one_hot(mask)) warped.push_back(warp_image(m, field));
  LabelMask out(mask.width(), mask.height(), mask.num_classes());
  auto labels = out.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int best = 0;
    for (int k = 1; k < static_cast<int>(warped.size()); ++k) {
      if (warped[k][i] > warped[best][i]) best = k;
    }
    labels[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

}  // namespace warp
}  // namespace t1moco
