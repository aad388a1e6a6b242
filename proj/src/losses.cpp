#include "t1moco/losses.hpp"

#include <algorithm>
#include <cmath>

#include "t1moco/kernels.hpp"

namespace t1moco::losses {

void LossWeights::validate() const {
  for (double v : {lambda1, lambda2, lambda_r, lambda_s}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "loss weights must be finite and non-negative");
    }
  }
}

namespace {

std::size_t term_index(std::string_view name) {
  const auto& names = LossBreakdown::kTermNames;
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw Error(ErrorCode::InvalidArgument, "unknown loss term '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - names.begin());
}

void ensure(DisplacementField& f, GridSize g) {
  if (f.grid() != g) f = DisplacementField(g.width, g.height);
}

void accumulate(DisplacementField& dst, const DisplacementField& src, double scale = 1.0) {
  const auto& k = kernels::active();
  auto dx = dst.ux();
  auto dy = dst.uy();
  const auto sx = src.ux();
  const auto sy = src.uy();
  if (scale == 1.0) {
    k.add_inplace(dx.data(), sx.data(), dx.size());
    k.add_inplace(dy.data(), sy.data(), dy.size());
  } else {
    k.axpy(dx.data(), dx.data(), sx.data(), scale, dx.size());
    k.axpy(dy.data(), dy.data(), sy.data(), scale, dy.size());
  }
}

void require_min_grid(GridSize g, const char* what) {
  if (g.width < 3 || g.height < 3) {
    throw Error(ErrorCode::GridTooSmall,
                std::string(what) + " needs a grid of at least 3x3, got " + to_string(g));
  }
}

// Negated WLs of `moving` against a prepared reference, with d/d moving.
double neg_wls(const metrics::Reference& ref, const Image2D& moving, const metrics::WlsWeights& w,
               Image2D* grad) {
  auto v = ref.wls(moving, w, grad != nullptr);
  if (!std::isfinite(v.score)) throw Error(ErrorCode::NonFiniteLoss, "similarity not finite");
  if (grad) {
    *grad = std::move(*v.grad);
    for (double& g : grad->data()) g = -g;
  }
  return -v.score;
}

// One direction of the bidirectional term: warps `source` by phi, compares
// the result with `fixed_ref` and the round trip with `source_ref`.
void sim_direction(const Image2D& source, const metrics::Reference& fixed_ref,
                   const metrics::Reference& source_ref, const DisplacementField& phi,
                   const metrics::WlsWeights& w, double& direct, double& round_trip,
                   DisplacementField* d_phi) {
  const Image2D moved = warp::warp_image(source, phi);
  const DisplacementField inv = warp::approx_inverse(phi);
  const Image2D back = warp::warp_image(moved, inv);
  if (!d_phi) {
    direct = neg_wls(fixed_ref, moved, w, nullptr);
    round_trip = neg_wls(source_ref, back, w, nullptr);
    return;
  }
  Image2D d_moved;
  Image2D d_back;
  direct = neg_wls(fixed_ref, moved, w, &d_moved);
  round_trip = neg_wls(source_ref, back, w, &d_back);
  DisplacementField d_inv(phi.width(), phi.height());
  warp::warp_image_backward(moved, inv, d_back, &d_moved, &d_inv);
  accumulate(*d_phi, warp::approx_inverse_backward(phi, d_inv));
  warp::warp_image_backward(source, phi, d_moved, nullptr, d_phi);
}

std::vector<Image2D> foreground_one_hot(const LabelMask& m) {
  return warp::one_hot(m, 1);
}

double dice_direction(const LabelMask& src, const LabelMask& dst, const DisplacementField& phi,
                      bool without_factor2, DisplacementField* d_phi) {
  const auto src_hot = foreground_one_hot(src);
  const auto dst_hot = foreground_one_hot(dst);
  std::vector<Image2D> warped;
  warped.reserve(src_hot.size());
  for (const auto& c : src_hot) warped.push_back(warp::warp_image(c, phi));
  if (!d_phi) return soft_dice(warped, dst_hot, without_factor2, nullptr);
  std::vector<Image2D> grad;
  const double value = soft_dice(warped, dst_hot, without_factor2, &grad);
  for (std::size_t k = 0; k < src_hot.size(); ++k) {
    warp::warp_image_backward(src_hot[k], phi, grad[k], nullptr, d_phi);
  }
  return value;
}

}  // namespace

double LossBreakdown::term(std::string_view name) const { return terms[term_index(name)]; }
double& LossBreakdown::term(std::string_view name) { return terms[term_index(name)]; }

double LossBreakdown::weighted_sum(const LossWeights& lw) const {
  return terms[0] + terms[1] + terms[2] + terms[3] + terms[4] + lw.lambda1 * terms[5] +
         lw.lambda2 * terms[6];
}

metrics::MetricValue affine_loss(const Image2D& ax, const Image2D& y, const metrics::WlsWeights& w,
                                 const metrics::MetricParams& params, bool want_grad) {
  auto v = metrics::wls(ax, y, w, params, want_grad);
  v.score = -v.score;
  if (v.grad) {
    for (double& g : v.grad->data()) g = -g;
  }
  return v;
}

AffineObjective affine_objective(const Image2D& moving, const metrics::Reference& fixed,
                                 const AffineParams& theta, const metrics::WlsWeights& w,
                                 bool want_grad) {
  require_same_grid(moving.grid(), fixed.grid(), "affine objective");
  AffineObjective out;
  const DisplacementField field = warp::affine_to_field(theta, moving.width(), moving.height());
  out.moved = warp::warp_image(moving, field);
  if (!want_grad) {
    out.value = neg_wls(fixed, out.moved, w, nullptr);
    return out;
  }
  Image2D d_moved;
  out.value = neg_wls(fixed, out.moved, w, &d_moved);
  DisplacementField d_field;
  warp::warp_image_backward(moving, field, d_moved, nullptr, &d_field);
  out.grad = warp::affine_to_field_backward(d_field);
  return out;
}

void bidirectional_sim_loss(const PairContext& ctx, const DisplacementField& phi_xy,
                            const DisplacementField& phi_yx, LossBreakdown& out,
                            FieldGradients* grads) {
  const GridSize g = ctx.ax->grid();
  require_same_grid(g, ctx.y->grid(), "bidirectional similarity images");
  require_same_grid(g, phi_xy.grid(), "forward field");
  require_same_grid(g, phi_yx.grid(), "backward field");
  DisplacementField* d_xy = nullptr;
  DisplacementField* d_yx = nullptr;
  if (grads) {
    ensure(grads->d_xy, g);
    ensure(grads->d_yx, g);
    d_xy = &grads->d_xy;
    d_yx = &grads->d_yx;
  }
  sim_direction(*ctx.ax, *ctx.ref_y, *ctx.ref_ax, phi_xy, ctx.weights, out.term("sim_fwd"),
                out.term("sim_inv_fwd"), d_xy);
  sim_direction(*ctx.y, *ctx.ref_ax, *ctx.ref_y, phi_yx, ctx.weights, out.term("sim_bwd"),
                out.term("sim_inv_bwd"), d_yx);
}

LossBreakdown bidirectional_sim_loss(const Image2D& ax, const Image2D& y,
                                     const DisplacementField& phi_xy,
                                     const DisplacementField& phi_yx,
                                     const metrics::WlsWeights& w,
                                     const metrics::MetricParams& params) {
  require_same_grid(ax.grid(), y.grid(), "bidirectional similarity images");
  w.validate();
  const unsigned comps = metrics::active_components(w);
  const metrics::Reference ref_ax(ax, params, comps);
  const metrics::Reference ref_y(y, params, comps);
  LossBreakdown out;
  bidirectional_sim_loss({&ax, &y, &ref_ax, &ref_y, w}, phi_xy, phi_yx, out, nullptr);
  out.total = out.terms[0] + out.terms[1] + out.terms[2] + out.terms[3];
  return out;
}

double soft_dice(const std::vector<Image2D>& a, const std::vector<Image2D>& b,
                 bool without_factor2, std::vector<Image2D>* grad_a) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorCode::InvalidArgument, "soft dice needs equal, non-zero channel counts");
  }
  const auto& k = kernels::active();
  const double numerator = without_factor2 ? 1.0 : 2.0;
  const double inv_k = 1.0 / static_cast<double>(a.size());
  double mean_ratio = 0.0;
  if (grad_a) grad_a->clear();
  for (std::size_t c = 0; c < a.size(); ++c) {
    require_same_grid(a[c].grid(), b[c].grid(), "soft dice channels");
    require_same_grid(a[c].grid(), a[0].grid(), "soft dice channels");
    const std::size_t n = a[c].size();
    const double inter = k.dot(a[c].data().data(), b[c].data().data(), n);
    const double sa = k.sum(a[c].data().data(), n);
    const double sb = k.sum(b[c].data().data(), n);
    const double denom = sa + sb;
    Image2D g(a[c].width(), a[c].height());
    if (denom > 0.0) {
      mean_ratio += numerator * inter / denom * inv_k;
      if (grad_a) {
        const double s = -numerator * inv_k / (denom * denom);
        auto gd = g.data();
        const auto bd = b[c].data();
        for (std::size_t i = 0; i < n; ++i) gd[i] = s * (bd[i] * denom - inter);
      }
    } else {
      mean_ratio += inv_k;
    }
    if (grad_a) grad_a->push_back(std::move(g));
  }
  return 1.0 - mean_ratio;
}

double weak_supervision_loss(const LabelMask& sx, const LabelMask& sy,
                             const DisplacementField& phi_xy, const DisplacementField& phi_yx,
                             bool without_factor2, FieldGradients* grads) {
  require_same_grid(sx.grid(), sy.grid(), "weak supervision masks");
  require_same_grid(sx.grid(), phi_xy.grid(), "forward field");
  require_same_grid(sx.grid(), phi_yx.grid(), "backward field");
  if (sx.num_classes() != sy.num_classes()) {
    throw Error(ErrorCode::InvalidArgument, "weak supervision masks disagree on class count");
  }
  if (sx.num_classes() < 2) {
    throw Error(ErrorCode::InvalidArgument, "weak supervision needs a foreground class");
  }
  if (grads) {
    ensure(grads->d_xy, sx.grid());
    ensure(grads->d_yx, sx.grid());
  }
  return dice_direction(sx, sy, phi_xy, without_factor2, grads ? &grads->d_xy : nullptr) +
         dice_direction(sy, sx, phi_yx, without_factor2, grads ? &grads->d_yx : nullptr);
}

double anti_folding_loss(const DisplacementField& phi, DisplacementField* grad) {
  require_min_grid(phi.grid(), "anti-folding loss");
  const Image2D det = warp::jacobian_det(phi);
  const double inv_n = 1.0 / static_cast<double>(det.size());
  double total = 0.0;
  Image2D d_det(det.width(), det.height());
  bool any = false;
  for (std::size_t i = 0; i < det.size(); ++i) {
    if (det[i] < 0.0) {
      total -= det[i];
      d_det[i] = -inv_n;
      any = true;
    }
  }
  if (grad) {
    ensure(*grad, phi.grid());
    if (any) accumulate(*grad, warp::jacobian_det_backward(phi, d_det));
  }
  return total * inv_n;
}

double anti_folding_loss(const DisplacementField& phi_xy, const DisplacementField& phi_yx,
                         FieldGradients* grads) {
  return anti_folding_loss(phi_xy, grads ? &grads->d_xy : nullptr) +
         anti_folding_loss(phi_yx, grads ? &grads->d_yx : nullptr);
}

double smoothness_loss(const DisplacementField& phi, DisplacementField* grad) {
  require_min_grid(phi.grid(), "smoothness loss");
  const int w = phi.width();
  const int h = phi.height();
  const std::size_t n = phi.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto& k = kernels::active();
  std::vector<double> dx(n), dy(n);
  double total = 0.0;
  if (grad) ensure(*grad, phi.grid());
  for (int comp = 0; comp < 2; ++comp) {
    const double* u = comp == 0 ? phi.ux().data() : phi.uy().data();
    grid::diff_x(u, w, h, dx.data());
    grid::diff_y(u, w, h, dy.data());
    total += k.dot(dx.data(), dx.data(), n) + k.dot(dy.data(), dy.data(), n);
    if (grad) {
      double* g = comp == 0 ? grad->ux().data() : grad->uy().data();
      for (std::size_t i = 0; i < n; ++i) {
        dx[i] *= 2.0 * inv_n;
        dy[i] *= 2.0 * inv_n;
      }
      grid::diff_x_adjoint_add(dx.data(), w, h, g);
      grid::diff_y_adjoint_add(dy.data(), w, h, g);
    }
  }
  return total * inv_n;
}

double smoothness_loss(const DisplacementField& phi_xy, const DisplacementField& phi_yx,
                       FieldGradients* grads) {
  return smoothness_loss(phi_xy, grads ? &grads->d_xy : nullptr) +
         smoothness_loss(phi_yx, grads ? &grads->d_yx : nullptr);
}

LossBreakdown total_reg_loss(const PairContext& ctx, const DisplacementField& phi_xy,
                             const DisplacementField& phi_yx, std::optional<MaskPair> masks,
                             const LossWeights& lw, FieldGradients* grads) {
  lw.validate();
  LossBreakdown out;
  bidirectional_sim_loss(ctx, phi_xy, phi_yx, out, grads);
  if (masks) {
    out.term("dice_weak") = weak_supervision_loss(*masks->sx, *masks->sy, phi_xy, phi_yx,
                                                  lw.dice_without_factor2, grads);
  }
  // The regularizer gradients are scaled by their lambda before merging.
  FieldGradients reg;
  FieldGradients* reg_ptr = grads ? &reg : nullptr;
  out.term("jdet") = anti_folding_loss(phi_xy, phi_yx, reg_ptr);
  if (grads && lw.lambda1 != 0.0) {
    accumulate(grads->d_xy, reg.d_xy, lw.lambda1);
    accumulate(grads->d_yx, reg.d_yx, lw.lambda1);
  }
  reg = {};
  out.term("smooth") = smoothness_loss(phi_xy, phi_yx, reg_ptr);
  if (grads && lw.lambda2 != 0.0) {
    accumulate(grads->d_xy, reg.d_xy, lw.lambda2);
    accumulate(grads->d_yx, reg.d_yx, lw.lambda2);
  }
  out.total = out.weighted_sum(lw);
  if (!std::isfinite(out.total)) throw Error(ErrorCode::NonFiniteLoss, "registration loss not finite");
  return out;
}

LossBreakdown total_reg_loss(const Image2D& ax, const Image2D& y, const DisplacementField& phi_xy,
                             const DisplacementField& phi_yx, std::optional<MaskPair> masks,
                             const metrics::WlsWeights& w, const LossWeights& lw,
                             const metrics::MetricParams& params) {
  require_same_grid(ax.grid(), y.grid(), "registration images");
  w.validate();
  const unsigned comps = metrics::active_components(w);
  const metrics::Reference ref_ax(ax, params, comps);
  const metrics::Reference ref_y(y, params, comps);
  return total_reg_loss({&ax, &y, &ref_ax, &ref_y, w}, phi_xy, phi_yx, masks, lw, nullptr);
}

double semi_supervised_seg_loss(const std::vector<Image2D>& pred_x,
                                const std::vector<Image2D>& pred_y, const LabelMask* xl,
                                const LabelMask* yl, const DisplacementField& phi_xy,
                                const DisplacementField& phi_yx, const LossWeights& lw) {
  lw.validate();
  if (!xl && !yl) throw Error(ErrorCode::NoLabels, "segmentation loss needs at least one label map");
  const bool literal = lw.dice_without_factor2;
  const auto warped_labels = [](const LabelMask& m, const DisplacementField& phi) {
    std::vector<Image2D> out;
    for (const auto& c : foreground_one_hot(m)) out.push_back(warp::warp_image(c, phi));
    return out;
  };
  // Branches 2 and 3 share one expression.
  if (yl) {
    return lw.lambda_r * soft_dice(warped_labels(*yl, phi_yx), pred_x, literal) +
           lw.lambda_s * soft_dice(pred_y, foreground_one_hot(*yl), literal);
  }
  return lw.lambda_r * soft_dice(warped_labels(*xl, phi_xy), pred_y, literal) +
         lw.lambda_s * soft_dice(pred_x, foreground_one_hot(*xl), literal);
}

}  // namespace t1moco::losses
