#pragma once

// Image similarity metrics, all oriented so that larger means more similar,
// and their weighted combination WLs. Every metric first min-max normalizes
// both images to [0, 1]; gradients are taken w.r.t. the raw first image and
// include the normalization.
//
// All four components are symmetric in their arguments, so the gradient
// w.r.t. the second argument is obtained by swapping.

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "t1moco/tensor.hpp"

namespace t1moco::metrics {

struct WlsWeights {
  double ncc = 1.1;
  double mi = 4.0;
  double ngf = 3.3;
  double mind = 8.3;

  static WlsWeights only_ncc(double w = 1.0) { return {w, 0.0, 0.0, 0.0}; }
  // Throws InvalidArgument unless all weights are >= 0 and one is > 0.
  void validate() const;
  WlsWeights operator+(const WlsWeights& o) const {
    return {ncc + o.ncc, mi + o.mi, ngf + o.ngf, mind + o.mind};
  }
  friend bool operator==(const WlsWeights&, const WlsWeights&) = default;
};

struct MetricParams {
  int mi_bins = 32;
  double ngf_eps = 1e-2;  // absolute, on normalized intensities
  int mind_patch_radius = 1;
  double mind_sigma = 0.5;
  double mind_variance_floor = 1e-6;  // relative to the (unit) normalized range squared

  void validate() const;
};

struct MetricValue {
  double score = 0.0;
  std::optional<Image2D> grad;  // w.r.t. the first (moving) image
  bool degenerate = false;
  std::vector<std::string> warnings;
};

enum Component : unsigned {
  kNcc = 1u << 0,
  kMi = 1u << 1,
  kNgf = 1u << 2,
  kMind = 1u << 3,
  kAll = kNcc | kMi | kNgf | kMind,
};

unsigned active_components(const WlsWeights& w);

// Min-max normalization with the bookkeeping needed for its gradient.
struct Normalized {
  std::vector<double> values;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t argmin = 0;
  std::size_t argmax = 0;
  bool constant = false;
};

Normalized normalize(const Image2D& img);
// Maps a gradient w.r.t. normalized values back to raw intensities.
void chain_normalization(const Normalized& n, const std::vector<double>& grad_normalized,
                         std::span<double> grad_raw);

// Per-pixel MIND descriptor channels for the shifts (+1,0), (-1,0), (0,+1),
// (0,-1).
struct MindDescriptor {
  int width = 0;
  int height = 0;
  std::array<std::vector<double>, 4> channels;
  // Intermediates kept for the backward pass.
  std::array<std::vector<double>, 4> distance;
  std::vector<double> variance;
  std::vector<bool> variance_floored;
  std::vector<std::uint8_t> argmin;
};

inline constexpr std::array<std::array<int, 2>, 4> kMindShifts{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};

MindDescriptor mind_descriptor(const std::vector<double>& normalized, GridSize g,
                               const MetricParams& p);
// Accumulates into d_image (size = pixels).
void mind_descriptor_backward(const std::vector<double>& normalized, const MindDescriptor& desc,
                              const MetricParams& p,
                              const std::array<std::vector<double>, 4>& d_channels,
                              std::vector<double>& d_image);

// A fixed image with its metric features precomputed, for repeated
// evaluation against changing moving images.
class Reference {
 public:
  Reference(const Image2D& fixed, const MetricParams& params, unsigned components = kAll);
  ~Reference();
  Reference(Reference&&) noexcept;
  Reference& operator=(Reference&&) noexcept;

  GridSize grid() const noexcept;
  const MetricParams& params() const noexcept;
  unsigned components() const noexcept;

  MetricValue ncc(const Image2D& moving, bool want_grad = true) const;
  MetricValue mi(const Image2D& moving, bool want_grad = true) const;
  MetricValue ngf(const Image2D& moving, bool want_grad = true) const;
  MetricValue mind(const Image2D& moving, bool want_grad = true) const;
  MetricValue wls(const Image2D& moving, const WlsWeights& w, bool want_grad = true) const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

MetricValue ncc(const Image2D& i, const Image2D& j, bool want_grad = true);
MetricValue mi(const Image2D& i, const Image2D& j, int bins = 32, bool want_grad = true);
MetricValue ngf(const Image2D& i, const Image2D& j, double eps = 1e-2, bool want_grad = true);
MetricValue mind(const Image2D& i, const Image2D& j, int patch_radius = 1, double sigma = 0.5,
                 bool want_grad = true);
MetricValue wls(const Image2D& i, const Image2D& j, const WlsWeights& w,
                const MetricParams& params = {}, bool want_grad = true);

}  // namespace t1moco::metrics
