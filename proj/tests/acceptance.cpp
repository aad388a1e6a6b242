// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "support.hpp"
#include "t1moco/ablation.hpp"
#include "t1moco/cli.hpp"
#include "t1moco/evaluation.hpp"
#include "t1moco/io.hpp"
#include "t1moco/losses.hpp"
#include "t1moco/metrics.hpp"
#include "t1moco/optimizer.hpp"
#include "t1moco/phantom.hpp"
#include "t1moco/runtime.hpp"
#include "t1moco/t1fit.hpp"
#include "t1moco/warp.hpp"

using namespace t1moco;
using t1moco::testing::bump_field;
using t1moco::testing::fd_check_refined;
using t1moco::testing::random_field;
using t1moco::testing::random_image;
using t1moco::testing::textured;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// 1: analytic gradients against central differences.

struct GradTally {
  int used = 0;
  int failed = 0;
  int skipped = 0;  // kink inside the stencil
  double worst = 0.0;

  void add(const t1moco::testing::FdResult& r) {
    if (r.kink) {
      ++skipped;
      return;
    }
    ++used;
    worst = std::max(worst, r.rel_error);
    if (!(r.rel_error < 1e-3)) ++failed;
  }
  bool ok() const { return used >= 20 && failed == 0; }
};

Image2D rough(int w, int h, double phase, std::uint64_t seed, double amp) {
  Image2D img = textured(w, h, phase);
  const auto noise = random_image(w, h, seed, -amp, amp);
  for (std::size_t p = 0; p < img.size(); ++p) img[p] += noise[p];
  return img;
}

LabelMask disc(int w, int h, double cx, double cy, double r_in, double r_out) {
  LabelMask m(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = std::hypot(x - cx, y - cy);
      m(x, y) = r < r_in ? 2 : (r < r_out ? 1 : 0);
    }
  }
  return m;
}

using MetricFn = std::function<metrics::MetricValue(const Image2D&, const Image2D&, bool)>;

GradTally check_metric(const MetricFn& fn, const Image2D& i, const Image2D& j, std::uint64_t seed) {
  GradTally t;
  const auto v = fn(i, j, true);
  const double h = 1e-3 * (i.max() - i.min());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, i.size() - 1);
  for (int k = 0; k < 200 && t.used < 20; ++k) {
    const std::size_t p = pick(rng);
    auto f = [&](double x) {
      Image2D probe = i;
      probe[p] = x;
      return fn(probe, j, false).score;
    };
    t.add(fd_check_refined(f, i[p], (*v.grad)[p], h));
  }
  return t;
}

GradTally check_field(const std::function<double(const DisplacementField&)>& value,
                      const DisplacementField& at, const DisplacementField& grad,
                      std::uint64_t seed) {
  GradTally t;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, at.size() - 1);
  for (int k = 0; k < 200 && t.used < 20; ++k) {
    const std::size_t i = pick(rng);
    const int c = static_cast<int>(rng() % 2);
    auto f = [&](double v) {
      auto probe = at;
      (c ? probe.uy() : probe.ux())[i] = v;
      return value(probe);
    };
    const double x0 = (c ? at.uy() : at.ux())[i];
    t.add(fd_check_refined(f, x0, (c ? grad.uy() : grad.ux())[i], 1e-3));
  }
  return t;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, GradTally>> tallies;

  const auto mi = rough(24, 20, 0.2, 101, 0.15);
  Image2D mj = rough(24, 20, 1.1, 102, 0.15);
  for (double& v : mj.data()) v = 2.0 * v + 0.5;
  const metrics::MetricParams params;
  tallies.emplace_back("ncc", check_metric([](const Image2D& a, const Image2D& b,
                                               bool g) { return metrics::ncc(a, b, g); },
                                            mi, mj, 1));
  tallies.emplace_back("mi", check_metric([&](const Image2D& a, const Image2D& b, bool g) {
    return metrics::mi(a, b, params.mi_bins, g);
  }, mi, mj, 2));
  tallies.emplace_back("ngf", check_metric([&](const Image2D& a, const Image2D& b, bool g) {
    return metrics::ngf(a, b, params.ngf_eps, g);
  }, mi, mj, 3));
  tallies.emplace_back("mind", check_metric([&](const Image2D& a, const Image2D& b, bool g) {
    return metrics::mind(a, b, params.mind_patch_radius, params.mind_sigma, g);
  }, mi, mj, 4));
  tallies.emplace_back("wls", check_metric([&](const Image2D& a, const Image2D& b, bool g) {
    return metrics::wls(a, b, metrics::WlsWeights{}, params, g);
  }, mi, mj, 5));

  constexpr int w = 22, h = 19;
  const auto ax = rough(w, h, 0.0, 111, 0.1);
  const auto y = rough(w, h, 0.5, 112, 0.1);
  const metrics::Reference ref_ax(ax, params), ref_y(y, params);

  // Affine stage: the six parameters at several random transforms.
  {
    GradTally t;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> lin(-0.05, 0.05), shift(-0.08, 0.08);
    for (int draw = 0; draw < 8 && t.used < 20; ++draw) {
      AffineParams theta;
      theta.theta = {1.0 + lin(rng), lin(rng), shift(rng), lin(rng), 1.0 + lin(rng), shift(rng)};
      const auto obj = losses::affine_objective(ax, ref_y, theta, metrics::WlsWeights{});
      for (int k = 0; k < 6; ++k) {
        auto f = [&](double v) {
          AffineParams p = theta;
          p.theta[k] = v;
          return losses::affine_objective(ax, ref_y, p, metrics::WlsWeights{}, false).value;
        };
        t.add(fd_check_refined(f, theta.theta[k], obj.grad[k], 1e-5));
      }
    }
    tallies.emplace_back("affine", t);
  }

  const auto f = bump_field(w, h, 1.2, 0.4) + random_field(w, h, 113, 0.3);
  const auto g = bump_field(w, h, 0.9, 2.5) + random_field(w, h, 114, 0.3);
  const losses::PairContext ctx{&ax, &y, &ref_ax, &ref_y, {}};
  {
    losses::FieldGradients grads{DisplacementField(w, h), DisplacementField(w, h)};
    losses::LossBreakdown out;
    losses::bidirectional_sim_loss(ctx, f, g, out, &grads);
    auto sim = [&](const DisplacementField& a, const DisplacementField& b) {
      losses::LossBreakdown o;
      losses::bidirectional_sim_loss(ctx, a, b, o, nullptr);
      return o.term("sim_fwd") + o.term("sim_bwd") + o.term("sim_inv_fwd") +
             o.term("sim_inv_bwd");
    };
    tallies.emplace_back("bidirectional",
                         check_field([&](const auto& p) { return sim(p, g); }, f, grads.d_xy, 7));
  }
  const auto sx = disc(w, h, 10.0, 9.0, 3.0, 6.5);
  const auto sy = disc(w, h, 11.0, 9.5, 3.0, 6.5);
  {
    losses::FieldGradients grads;
    losses::weak_supervision_loss(sx, sy, f, g, false, &grads);
    tallies.emplace_back(
        "weak_dice",
        check_field([&](const auto& p) { return losses::weak_supervision_loss(sx, sy, f, p); }, g,
                    grads.d_yx, 8));
  }
  {
    const auto folded = random_field(w, h, 115, 1.2);
    DisplacementField grad;
    losses::anti_folding_loss(folded, &grad);
    tallies.emplace_back(
        "anti_folding",
        check_field([](const auto& p) { return losses::anti_folding_loss(p); }, folded, grad, 9));
  }
  {
    DisplacementField grad;
    losses::smoothness_loss(f, &grad);
    tallies.emplace_back(
        "smoothness",
        check_field([](const auto& p) { return losses::smoothness_loss(p); }, f, grad, 10));
  }
  {
    const auto rf = f + random_field(w, h, 116, 0.6);
    const losses::MaskPair masks{&sx, &sy};
    const losses::LossWeights lw;
    losses::FieldGradients grads;
    losses::total_reg_loss(ctx, rf, g, masks, lw, &grads);
    tallies.emplace_back(
        "total",
        check_field(
            [&](const auto& p) { return losses::total_reg_loss(ctx, p, g, masks, lw).total; }, rf,
            grads.d_xy, 11));
  }

  const double secs = seconds_since(t0);
  Outcome o{secs < 60.0, ""};
  for (const auto& [name, t] : tallies) {
    o.pass = o.pass && t.ok();
    o.detail += name + " " + std::to_string(t.used - t.failed) + "/" + std::to_string(t.used) +
                " max " + fmt(t.worst, 2) +
                (t.skipped ? " (" + std::to_string(t.skipped) + " kinks skipped)" : "") + "; ";
  }
  o.detail += fmt(secs, 3) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 2: Jacobian determinant of linear and zero fields.

Outcome criterion2() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> coef(-0.4, 0.4);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double a = coef(rng), b = coef(rng);
    const int w = 16 + k, h = 12 + 2 * k;
    DisplacementField u(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        u.ux()[static_cast<std::size_t>(y) * w + x] = a * x;
        u.uy()[static_cast<std::size_t>(y) * w + x] = b * y;
      }
    }
    const auto det = warp::jacobian_det(u);
    for (int y = 1; y + 1 < h; ++y) {
      for (int x = 1; x + 1 < w; ++x) {
        worst = std::max(worst, std::abs(det(x, y) - (1.0 + a) * (1.0 + b)));
      }
    }
  }
  const DisplacementField zero(40, 33);
  const auto det0 = warp::jacobian_det(zero);
  const bool ones = std::all_of(det0.values().begin(), det0.values().end(),
                                [](double v) { return v == 1.0; });
  const std::size_t folds = warp::folding_count(zero);
  return {worst <= 1e-6 && ones && folds == 0,
          "max |det - (1+a)(1+b)| " + fmt(worst, 3) + " over 20 fields; zero field det==1 " +
              (ones ? "yes" : "no") + ", folding " + std::to_string(folds)};
}

// ---------------------------------------------------------------------------
// 3: approximate inverse.

double max_abs(const DisplacementField& f) {
  double m = 0.0;
  for (double v : f.ux()) m = std::max(m, std::abs(v));
  for (double v : f.uy()) m = std::max(m, std::abs(v));
  return m;
}

Outcome criterion3() {
  bool monotone = true;
  double at_one = 0.0;
  std::string detail;
  for (double phase : {0.0, 0.7, 2.2}) {
    double prev = -1.0;
    for (double d : {0.5, 1.0, 2.0}) {
      const auto f = bump_field(64, 64, d, phase);
      const double res = max_abs(warp::compose(f, warp::approx_inverse(f)));
      monotone = monotone && res > prev;
      if (d == 1.0) at_one = std::max(at_one, res);
      prev = res;
      if (phase == 0.7) detail += "d=" + fmt(d, 2) + ": " + fmt(res, 3) + " ";
    }
  }
  double constant_residual = 0.0;
  for (auto [cx, cy] : {std::pair{1.25, -0.5}, {-3.0, 2.75}, {0.1, 0.0}}) {
    const auto c = DisplacementField::constant(64, 64, cx, cy);
    const double r = max_abs(warp::compose(c, warp::approx_inverse(c)));
    constant_residual = std::max(constant_residual, r);
  }
  return {monotone && at_one <= 0.15 && constant_residual == 0.0,
          detail + "px; monotone " + (monotone ? "yes" : "no") + ", worst at d=1 " +
              fmt(at_one, 3) + ", constant residual " + fmt(constant_residual, 3)};
}

// ---------------------------------------------------------------------------
// 4 and 5: phantom suite.

constexpr int kSuiteSeries = 10;
constexpr int kSuiteFrames = 5;

phantom::PhantomSpec suite_spec(std::uint64_t seed) {
  phantom::PhantomSpec s;
  s.frames = kSuiteFrames;
  s.inversion_times = phantom::default_inversion_times(kSuiteFrames);
  s.seed = seed;
  return s;
}

struct Suite {
  std::vector<T1Series> series;
  // Per series, rows for ORG, ncc, mi, ngf, mind, wls at lambda1 = 1000.
  std::vector<std::vector<ablation::Row>> metric_rows;
  std::vector<ablation::Row> aggressive;  // wls, lambda1 = 0
  double seconds_default = 0.0;           // wls at lambda1 = 1000
  double seconds_aggressive = 0.0;
};

Suite& suite() {
  static Suite s;
  return s;
}

void run_suite(bool need_aggressive, bool need_metrics) {
  auto& s = suite();
  if (s.series.empty()) {
    for (int k = 1; k <= kSuiteSeries; ++k) {
      s.series.push_back(phantom::generate(suite_spec(k)).series);
    }
  }
  const optimizer::SolveConfig base;
  if (s.metric_rows.empty() && (need_metrics || need_aggressive)) {
    ablation::Grid grid;
    grid.metrics = need_metrics ? std::vector<std::string>{"ncc", "mi", "ngf", "mind", "wls"}
                                : std::vector<std::string>{"wls"};
    grid.lambda1 = {1000.0};
    for (const auto& series : s.series) {
      s.metric_rows.push_back(ablation::run(series, base, grid));
      s.seconds_default += s.metric_rows.back().back().seconds;
    }
  }
  if (need_aggressive && s.aggressive.empty()) {
    optimizer::SolveConfig aggressive = base;
    aggressive.field_step = 4.0;
    aggressive.step_growth = 2.0;
    ablation::Grid grid;
    grid.metrics = {"wls"};
    grid.lambda1 = {0.0};
    for (const auto& series : s.series) {
      s.aggressive.push_back(ablation::run(series, aggressive, grid).back());
      s.seconds_aggressive += s.aggressive.back().seconds;
    }
  }
}

const ablation::Row& row(const std::vector<ablation::Row>& rows, const std::string& metric) {
  for (const auto& r : rows) {
    if (r.metric == metric) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "missing ablation row " + metric);
}

Outcome criterion4(bool with_metrics) {
  run_suite(true, with_metrics);
  const auto& s = suite();
  double fold_default = 0.0, fold_aggressive = 0.0;
  int series_folding = 0;
  for (int k = 0; k < kSuiteSeries; ++k) {
    fold_default += row(s.metric_rows[k], "wls").folding;
    fold_aggressive += s.aggressive[k].folding;
    if (s.aggressive[k].folding > 0.0) ++series_folding;
  }
  fold_default /= kSuiteSeries;
  fold_aggressive /= kSuiteSeries;
  const double secs = s.seconds_default + s.seconds_aggressive;
  const bool ok = fold_default == 0.0 && series_folding >= 8 &&
                  fold_aggressive >= 10.0 * fold_default && fold_aggressive > 0.0 && secs < 600.0;
  return {ok, "mean folding lambda1=1000: " + fmt(fold_default) +
                  "; lambda1=0 (field_step 4, growth 2): " + fmt(fold_aggressive) +
                  ", folding on " +
                  std::to_string(series_folding) + "/10 series; " + fmt(secs, 4) + " s"};
}

Outcome criterion5() {
  run_suite(false, true);
  const auto& s = suite();
  std::map<std::string, double> mean;
  for (const auto& rows : s.metric_rows) {
    for (const auto& r : rows) mean[r.metric] += r.dsc / kSuiteSeries;
  }
  bool ok = true;
  std::string detail = "mean DSC:";
  for (const auto& [metric, dsc] : mean) detail += " " + metric + " " + fmt(dsc);
  for (const char* m : {"ncc", "mi", "ngf", "mind"}) {
    ok = ok && mean["wls"] >= mean[m] + 0.01;
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 6 and 7: mixed-motion phantom with 11 frames.

struct Mixed {
  phantom::PhantomData data;
  optimizer::CorrectionResult result;
  eval::EvalReport report;
  double seconds = 0.0;
  bool ran = false;
};

Mixed& mixed() {
  static Mixed m;
  if (m.ran) return m;
  phantom::PhantomSpec spec;
  spec.seed = 3;
  spec.motion_amplitude = 3.0;
  m.data = phantom::generate(spec);
  const auto t0 = Clock::now();
  m.result = optimizer::motion_correct_series(m.data.series, optimizer::SolveConfig{});
  m.seconds = seconds_since(t0);
  std::vector<std::optional<DisplacementField>> fields;
  for (const auto& f : m.result.frames) {
    fields.push_back(f.result ? std::optional(f.result->total_field()) : std::nullopt);
  }
  m.report = eval::evaluate_correction(m.data.series.masks, m.data.series.reference_index, fields,
                                       {});
  m.ran = true;
  return m;
}

Outcome criterion6() {
  const auto& m = mixed();
  const auto& before = m.report.summary("ORG");
  const auto& after = m.report.summary("corrected");
  const std::size_t ref = m.data.series.reference_index;
  const auto& a = m.data.series.frames[ref].values();
  const auto& b = m.result.corrected.frames[ref].values();
  const bool identical =
      a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  const bool ok = before.dsc < 0.80 && after.dsc >= 0.90 && after.hd_endo < before.hd_endo &&
                  after.hd_epi < before.hd_epi && identical;
  return {ok, "DSC " + fmt(before.dsc) + " -> " + fmt(after.dsc) + ", HD_endo " +
                  fmt(before.hd_endo) + " -> " + fmt(after.hd_endo) + ", HD_epi " +
                  fmt(before.hd_epi) + " -> " + fmt(after.hd_epi) + ", reference frame " +
                  (identical ? "bit-identical" : "changed") + "; " + fmt(m.seconds, 3) + " s"};
}

Outcome criterion7() {
  phantom::PhantomSpec clean;
  clean.motion_amplitude = 0.0;
  clean.noise_sigma = 0.0;
  const auto noiseless = phantom::generate(clean);
  const auto fit = t1fit::fit_t1(noiseless.series);
  double worst = 0.0;
  for (std::size_t p = 0; p < fit.t1_map.size(); ++p) {
    worst = std::max(worst, std::abs(fit.t1_map[p] - noiseless.t1_map[p]) / noiseless.t1_map[p]);
  }

  const auto& m = mixed();
  const auto& region = m.data.series.masks[m.data.series.reference_index];
  const double before = eval::median_relative_error(t1fit::fit_t1(m.data.series).t1_map,
                                                    m.data.t1_map, region, phantom::kMyocardium);
  const double after = eval::median_relative_error(t1fit::fit_t1(m.result.corrected).t1_map,
                                                   m.data.t1_map, region, phantom::kMyocardium);
  return {worst <= 1e-3 && after < 0.03 && after < before,
          "noiseless max relative error " + fmt(worst, 3) +
              "; sigma 1% myocardial median error " + fmt(100 * before, 3) + "% -> " +
              fmt(100 * after, 3) + "%"};
}

// ---------------------------------------------------------------------------
// 8: Dice loss identities.

Outcome criterion8() {
  Image2D left(4, 4), right(4, 4), three(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      left(x, y) = x < 2;
      right(x, y) = x >= 2;
      three(x, y) = x < 3;
    }
  }
  const double same = losses::soft_dice({left}, {left});
  const double disjoint = losses::soft_dice({left}, {right});
  const double half = losses::soft_dice({left}, {three});
  return {same == 0.0 && disjoint == 1.0 && std::abs(half - 0.2) < 1e-12,
          "identical " + fmt(same) + ", disjoint " + fmt(disjoint) + ", half-overlap " +
              fmt(half, 12)};
}

// ---------------------------------------------------------------------------
// 9: deterministic correct runs.

Outcome criterion9() {
  const auto dir = t1moco::testing::scratch_dir("acceptance_determinism");
  auto call = [](std::vector<std::string> args) {
    args.insert(args.begin(), "t1moco");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  };
  const std::string ph = (dir / "phantom").string();
  const std::string a = (dir / "a").string();
  const std::string b = (dir / "b").string();
  io::write_text(dir / "config.json", R"({"solve": {"seed": 1234}})");
  const std::string cfg = (dir / "config.json").string();
  int codes = call({"phantom", "--out", ph, "--frames", "4", "--seed", "9"});
  codes += call({"correct", "--series", ph, "--out", a, "--config", cfg});
  codes += call({"correct", "--series", ph, "--out", b, "--config", cfg});
  const auto diff = t1moco::testing::tree_diff(a, b, {"timing.json"});
  const std::size_t files = t1moco::testing::tree(a).size();
  fs::remove_all(dir);
  std::string detail = std::to_string(files) + " files compared, " +
                       std::to_string(diff.size()) + " differ";
  if (codes != 0) detail += ", a command failed";
  return {codes == 0 && diff.empty() && files > 1, detail};
}

// ---------------------------------------------------------------------------
// 10: save/load identity.

float random_float(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 3);
  switch (kind(rng)) {
    case 0: return std::uniform_real_distribution<float>(-1.0f, 1.0f)(rng);
    case 1: return std::uniform_real_distribution<float>(-1e6f, 1e6f)(rng);
    case 2: return std::uniform_real_distribution<float>(-1e-30f, 1e-30f)(rng);
    default: return static_cast<float>(std::uniform_int_distribution<int>(-3, 3)(rng));
  }
}

Outcome criterion10() {
  const auto dir = t1moco::testing::scratch_dir("acceptance_io");
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> dim(1, 48);
  int ok[3] = {0, 0, 0};
  for (int k = 0; k < 100; ++k) {
    const int w = dim(rng), h = dim(rng);
    Image2D img(w, h);
    for (double& v : img.data()) v = random_float(rng);
    DisplacementField field(w, h);
    for (double& v : field.ux()) v = random_float(rng);
    for (double& v : field.uy()) v = random_float(rng);
    const int top = std::uniform_int_distribution<int>(0, 255)(rng);
    LabelMask mask(w, h, top + 1);
    std::uniform_int_distribution<int> label(0, top);
    for (auto& l : mask.labels()) l = static_cast<std::uint8_t>(label(rng));
    mask.labels()[std::uniform_int_distribution<std::size_t>(0, mask.size() - 1)(rng)] =
        static_cast<std::uint8_t>(top);

    const io::Tensor tensors[3] = {img, field, mask};
    for (int t = 0; t < 3; ++t) {
      const auto path = dir / ("t" + std::to_string(t) + ".t1mc");
      io::save_tensor(tensors[t], path);
      const auto bytes = io::read_file(path);
      const auto back = io::load_tensor(path);
      io::save_tensor(back, dir / "again.t1mc");
      if (back == tensors[t] && bytes == io::encode(tensors[t]) &&
          io::read_file(dir / "again.t1mc") == bytes) {
        ++ok[t];
      }
    }
  }
  fs::remove_all(dir);
  return {ok[0] == 100 && ok[1] == 100 && ok[2] == 100,
          "identical round trips: images " + std::to_string(ok[0]) + "/100, fields " +
              std::to_string(ok[1]) + "/100, masks " + std::to_string(ok[2]) + "/100"};
}

}  // namespace

int main(int argc, char** argv) {
  runtime::configure_allocator();
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto want = [&](int n) { return wanted.empty() || wanted.count(n) > 0; };

  int failures = 0;
  auto report = [&](int n, const std::function<Outcome()>& fn) {
    if (!want(n)) return;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << std::endl;
  };
  const auto t0 = Clock::now();
  report(1, criterion1);
  report(2, criterion2);
  report(3, criterion3);
  report(4, [&] { return criterion4(want(5)); });
  report(5, criterion5);
  report(6, criterion6);
  report(7, criterion7);
  report(8, criterion8);
  report(9, criterion9);
  report(10, criterion10);
  std::cout << "total " << fmt(seconds_since(t0), 4) << " s, " << failures << " failed"
            << std::endl;
  return failures == 0 ? 0 : 1;
}
