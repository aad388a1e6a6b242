#pragma once

// Registration objectives. Every function returns a value to be minimized;
// similarity terms are negated WLs scores. Gradients are returned w.r.t.
// the displacement fields (and, for the affine objective, w.r.t. theta).

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "t1moco/metrics.hpp"
#include "t1moco/tensor.hpp"
#include "t1moco/warp.hpp"

namespace t1moco::losses {

struct LossWeights {
  double lambda1 = 1000.0;  // anti-folding
  double lambda2 = 8.0;     // smoothness
  double lambda_r = 1.0;    // segmentation loss, registration-derived part
  double lambda_s = 1.0;    // segmentation loss, supervised part
  // Use the dice ratio without the factor 2 in the numerator.
  bool dice_without_factor2 = false;

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
  static constexpr std::array<std::string_view, 7> kTermNames{
      "sim_fwd", "sim_bwd", "sim_inv_fwd", "sim_inv_bwd", "dice_weak", "jdet", "smooth"};

  double total = 0.0;
  std::array<double, 7> terms{};

  double term(std::string_view name) const;
  double& term(std::string_view name);
  // Weighted sum: similarity and dice terms with weight 1, jdet with
  // lambda1, smooth with lambda2.
  double weighted_sum(const LossWeights& lw) const;
};

// -WLs(AX, Y). The gradient is w.r.t. AX.
metrics::MetricValue affine_loss(const Image2D& ax, const Image2D& y,
                                 const metrics::WlsWeights& w,
                                 const metrics::MetricParams& params = {}, bool want_grad = true);

struct AffineObjective {
  double value = 0.0;
  std::array<double, 6> grad{};
  Image2D moved;
};

// Loss of warping `moving` by theta and comparing to the prepared fixed image.
AffineObjective affine_objective(const Image2D& moving, const metrics::Reference& fixed,
                                 const AffineParams& theta, const metrics::WlsWeights& w,
                                 bool want_grad = true);

struct FieldGradients {
  DisplacementField d_xy;
  DisplacementField d_yx;
};

// Prepared AX and Y for repeated loss evaluation with changing fields.
struct PairContext {
  const Image2D* ax = nullptr;
  const Image2D* y = nullptr;
  const metrics::Reference* ref_ax = nullptr;
  const metrics::Reference* ref_y = nullptr;
  metrics::WlsWeights weights;
};

// Fills the four similarity terms of `out`; accumulates into `grads` when
// given.
void bidirectional_sim_loss(const PairContext& ctx, const DisplacementField& phi_xy,
                            const DisplacementField& phi_yx, LossBreakdown& out,
                            FieldGradients* grads);
LossBreakdown bidirectional_sim_loss(const Image2D& ax, const Image2D& y,
                                     const DisplacementField& phi_xy,
                                     const DisplacementField& phi_yx,
                                     const metrics::WlsWeights& w,
                                     const metrics::MetricParams& params = {});

// 1 - mean over channels of the dice ratio. A channel empty in both stacks
// has ratio 1. grad_a, when given, receives d/d a.
double soft_dice(const std::vector<Image2D>& a, const std::vector<Image2D>& b,
                 bool without_factor2 = false, std::vector<Image2D>* grad_a = nullptr);

// Foreground classes only (1 .. num_classes - 1). Throws InvalidArgument
// when the masks disagree on the class count.
double weak_supervision_loss(const LabelMask& sx, const LabelMask& sy,
                             const DisplacementField& phi_xy, const DisplacementField& phi_yx,
                             bool without_factor2 = false, FieldGradients* grads = nullptr);

double anti_folding_loss(const DisplacementField& phi_xy, const DisplacementField& phi_yx,
                         FieldGradients* grads = nullptr);
double anti_folding_loss(const DisplacementField& phi, DisplacementField* grad = nullptr);

double smoothness_loss(const DisplacementField& phi, DisplacementField* grad = nullptr);
double smoothness_loss(const DisplacementField& phi_xy, const DisplacementField& phi_yx,
                       FieldGradients* grads = nullptr);

struct MaskPair {
  const LabelMask* sx = nullptr;
  const LabelMask* sy = nullptr;
};

LossBreakdown total_reg_loss(const PairContext& ctx, const DisplacementField& phi_xy,
                             const DisplacementField& phi_yx, std::optional<MaskPair> masks,
                             const LossWeights& lw, FieldGradients* grads = nullptr);
LossBreakdown total_reg_loss(const Image2D& ax, const Image2D& y, const DisplacementField& phi_xy,
                             const DisplacementField& phi_yx, std::optional<MaskPair> masks,
                             const metrics::WlsWeights& w, const LossWeights& lw,
                             const metrics::MetricParams& params = {});

// Segmentation-network objective evaluated on given score maps. pred_x and
// pred_y hold one channel per foreground class. The both-labeled case uses
// the same expression as the Y-labeled case.
double semi_supervised_seg_loss(const std::vector<Image2D>& pred_x,
                                const std::vector<Image2D>& pred_y, const LabelMask* xl,
                                const LabelMask* yl, const DisplacementField& phi_xy,
                                const DisplacementField& phi_yx, const LossWeights& lw);

}  // namespace t1moco::losses
