#include "t1moco/cli.hpp"

#include <chrono>
#include <filesystem>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "t1moco/ablation.hpp"
#include "t1moco/config.hpp"
#include "t1moco/evaluation.hpp"
#include "t1moco/io.hpp"
#include "t1moco/optimizer.hpp"
#include "t1moco/phantom.hpp"
#include "t1moco/series_io.hpp"
#include "t1moco/t1fit.hpp"

namespace t1moco::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::IoFailure:
    case ErrorCode::BadMagic:
    case ErrorCode::VersionMismatch:
    case ErrorCode::TruncatedPayload:
    case ErrorCode::KindMismatch:
      return kIoFailure;
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidSpec:
      return kInvalidInput;
    default:
      return kFailure;
  }
}

void report_error(std::ostream& err, std::string_view code, const std::string& message) {
  ordered_json j;
  j["error"] = {{"code", code}, {"message", message}};
  err << j.dump() << "\n";
}

std::string read_text(const fs::path& p) {
  const auto bytes = io::read_file(p);
  return std::string(bytes.begin(), bytes.end());
}

std::pair<int, int> parse_size(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument("missing 'x'");
    std::size_t used = 0;
    const int h = std::stoi(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("height");
    const std::string ws = s.substr(x + 1);
    const int w = std::stoi(ws, &used);
    if (used != ws.size()) throw std::invalid_argument("width");
    return {h, w};
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "--size expects HxW, got '" + s + "'");
  }
}

struct SolveFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda1;
  std::optional<double> field_step;
  std::optional<int> threads;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run configuration");
    app->add_option("--seed", seed, "overrides solve.seed");
    app->add_option("--lambda1", lambda1, "overrides loss.lambda1")->check(CLI::NonNegativeNumber);
    app->add_option("--field-step", field_step, "overrides solve.field_step")
        ->check(CLI::PositiveNumber);
    app->add_option("--threads", threads, "frame-level worker count")
        ->check(CLI::NonNegativeNumber);
  }

  config::RunConfig resolve() const {
    config::RunConfig cfg = config_path.empty() ? config::RunConfig{} : config::load(config_path);
    if (seed) cfg.solve.seed = *seed;
    if (lambda1) cfg.solve.loss_weights.lambda1 = *lambda1;
    if (field_step) cfg.solve.field_step = *field_step;
    cfg.solve.validate();
    return cfg;
  }
};

void write_config(const fs::path& dir, const std::string& json) {
  fs::create_directories(dir);
  io::write_text(dir / "config.json", json);
}

// --- phantom -------------------------------------------------------------

struct PhantomFlags {
  std::string out;
  std::string size = "144x160";
  int frames = 11;
  double motion = 3.0;
  double noise = 0.01;
  std::uint64_t seed = 1;
  bool pgm = false;
};

int cmd_phantom(const PhantomFlags& f, std::ostream& out) {
  const auto [h, w] = parse_size(f.size);
  phantom::PhantomSpec spec = phantom::PhantomSpec{}.resized(w, h);
  spec.frames = f.frames;
  spec.inversion_times = phantom::default_inversion_times(f.frames);
  spec.motion_amplitude = f.motion;
  spec.noise_sigma = f.noise;
  spec.seed = f.seed;
  const auto data = phantom::generate(spec);

  ordered_json meta;
  meta["generator"] = "phantom";
  meta["spec"] = {{"width", spec.width},
                  {"height", spec.height},
                  {"frames", spec.frames},
                  {"inversion_times", spec.inversion_times},
                  {"t1_myo", spec.t1_myo},
                  {"t1_blood", spec.t1_blood},
                  {"t1_background", spec.t1_background},
                  {"ring_center", spec.ring_center},
                  {"ring_radii", spec.ring_radii},
                  {"rv_offset", spec.rv_offset},
                  {"rv_radius", spec.rv_radius},
                  {"motion_amplitude", spec.motion_amplitude},
                  {"noise_sigma", spec.noise_sigma},
                  {"seed", spec.seed}};
  series_io::SeriesDir dir;
  dir.series = data.series;
  dir.t1_map = data.t1_map;
  dir.gt_fields = data.fields;
  dir.metadata_json = meta.dump();
  series_io::write(f.out, dir, f.pgm);
  io::write_text(fs::path(f.out) / "config.json", meta["spec"].dump(2) + "\n");
  out << "wrote " << spec.frames << " frames (" << spec.height << "x" << spec.width << ") to "
      << f.out << "\n";
  return kOk;
}

// --- register ------------------------------------------------------------

struct RegisterFlags {
  std::string moving, fixed, out, moving_mask, fixed_mask;
  SolveFlags solve;
};

int cmd_register(const RegisterFlags& f, std::ostream& out) {
  const auto cfg = f.solve.resolve();
  const Image2D moving = io::load_image(f.moving);
  const Image2D fixed = io::load_image(f.fixed);
  std::optional<LabelMask> mm, fm;
  if (!f.moving_mask.empty()) mm = io::load_mask(f.moving_mask);
  if (!f.fixed_mask.empty()) fm = io::load_mask(f.fixed_mask);
  const auto r = optimizer::register_pair(moving, fixed, cfg.solve, mm ? &*mm : nullptr,
                                          fm ? &*fm : nullptr);
  const fs::path dir(f.out);
  write_config(dir, config::to_json(cfg));
  io::save_tensor(r.field_xy, dir / "field_xy.t1mc");
  io::save_tensor(r.field_yx, dir / "field_yx.t1mc");
  io::save_tensor(r.total_field(), dir / "total_field.t1mc");
  io::save_tensor(r.moved, dir / "moved.t1mc");
  if (cfg.io.write_pgm) io::export_pgm(r.moved, dir / "moved.pgm");

  io::CsvTable trace;
  trace.header = {"level", "iteration", "step", "total"};
  for (auto name : losses::LossBreakdown::kTermNames) trace.header.emplace_back(name);
  for (const auto& e : r.loss_trace) {
    std::vector<io::CsvCell> row{static_cast<long long>(e.level),
                                 static_cast<long long>(e.iteration), e.step, e.loss.total};
    for (double t : e.loss.terms) row.emplace_back(t);
    trace.rows.push_back(std::move(row));
  }
  io::export_csv(trace, dir / "loss_trace.csv");

  ordered_json res;
  res["affine"] = r.affine.theta;
  res["affine_trace"] = ordered_json::array();
  for (const auto& e : r.affine_trace) {
    res["affine_trace"].push_back(
        {{"level", e.level}, {"iteration", e.iteration}, {"step", e.step}, {"loss", e.loss}});
  }
  res["folding"] = r.folding;
  res["low_variance"] = r.low_variance;
  res["warnings"] = r.warnings;
  if (mm && fm) {
    const LabelMask warped = warp::warp_labels(*mm, r.total_field());
    res["dsc_before"] = eval::dsc(*mm, *fm, 1);
    res["dsc_after"] = eval::dsc(warped, *fm, 1);
  }
  io::write_text(dir / "result.json", res.dump(2) + "\n");
  out << "registered: folding " << r.folding << ", " << r.loss_trace.size()
      << " accepted deformable steps\n";
  return kOk;
}

// --- correct -------------------------------------------------------------

struct CorrectFlags {
  std::string series, out;
  SolveFlags solve;
};

int cmd_correct(const CorrectFlags& f, std::ostream& out, std::ostream& err) {
  const auto cfg = f.solve.resolve();
  const auto input = series_io::read(f.series);
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = optimizer::motion_correct_series(input.series, cfg.solve,
                                                       f.solve.threads.value_or(0));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  series_io::SeriesDir dir;
  dir.series = result.corrected;
  std::size_t failed = 0;
  ordered_json timing;
  timing["total_seconds"] = secs;
  timing["frame_seconds"] = ordered_json::array();
  for (std::size_t i = 0; i < result.frames.size(); ++i) {
    const auto& fr = result.frames[i];
    if (fr.result) {
      dir.correction_fields.emplace_back(fr.result->total_field());
      dir.folding.push_back(static_cast<double>(fr.result->folding));
    } else {
      dir.correction_fields.emplace_back();
      dir.folding.push_back(0.0);
    }
    dir.errors.push_back(fr.error);
    if (!fr.error.empty()) ++failed;
    timing["frame_seconds"].push_back(fr.seconds);
  }
  ordered_json meta;
  meta["generator"] = "correct";
  meta["source"] = fs::path(f.series).filename().string();
  meta["config"] = ordered_json::parse(config::to_json(cfg));
  dir.metadata_json = meta.dump();
  series_io::write(f.out, dir, cfg.io.write_pgm);
  write_config(f.out, config::to_json(cfg));
  io::write_text(fs::path(f.out) / "timing.json", timing.dump(2) + "\n");
  out << "corrected " << result.frames.size() - 1 - failed << " of "
      << result.frames.size() - 1 << " frames in " << secs << " s\n";
  if (failed > 0) {
    report_error(err, "FrameFailure", std::to_string(failed) + " frame(s) failed");
    return kFailure;
  }
  return kOk;
}

// --- fit -----------------------------------------------------------------

struct FitFlags {
  std::string series, out;
};

int cmd_fit(const FitFlags& f, std::ostream& out) {
  const auto input = series_io::read(f.series);
  const t1fit::FitOptions opts;
  const auto fit = t1fit::fit_t1(input.series, opts);
  const fs::path dir(f.out);
  ordered_json cfg = {{"grid_points", opts.grid_points},
                      {"t1_star_min", opts.t1_star_min},
                      {"t1_star_max", opts.t1_star_max},
                      {"gauss_newton_steps", opts.gauss_newton_steps}};
  write_config(dir, cfg.dump(2) + "\n");
  io::save_tensor(fit.t1_map, dir / "t1_map.t1mc");
  io::save_tensor(fit.a_map, dir / "a_map.t1mc");
  io::save_tensor(fit.b_map, dir / "b_map.t1mc");
  io::save_tensor(fit.residual_map, dir / "residual_map.t1mc");
  io::save_tensor(fit.fail_mask, dir / "fail_mask.t1mc");
  const std::size_t failed = fit.fail_mask.count(1);
  ordered_json summary = {{"pixels", fit.t1_map.size()}, {"failed_pixels", failed}};
  io::write_text(dir / "summary.json", summary.dump(2) + "\n");
  out << "fitted " << fit.t1_map.size() << " pixels, " << failed << " failed\n";
  return kOk;
}

// --- eval ----------------------------------------------------------------

struct EvalFlags {
  std::string before, after, gt, out;
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  const auto before = series_io::read(f.before);
  const auto after = series_io::read(f.after);
  const auto gt = series_io::read(f.gt);
  if (!gt.series.has_masks()) throw Error(ErrorCode::BadSeries, "--gt directory has no masks");
  const std::size_t nf = gt.series.size();
  if (before.series.size() != nf || after.series.size() != nf) {
    throw Error(ErrorCode::BadSeries, "before/after/gt frame counts differ");
  }
  auto fields = after.correction_fields;
  if (fields.empty()) fields.resize(nf);
  std::vector<eval::FrameStats> stats(nf);
  for (std::size_t i = 0; i < nf && i < after.folding.size(); ++i) {
    stats[i].folding = after.folding[i];
  }
  const fs::path timing_path = fs::path(f.after) / "timing.json";
  if (fs::exists(timing_path)) {
    const auto t = nlohmann::json::parse(read_text(timing_path));
    const auto secs = t.value("frame_seconds", std::vector<double>{});
    for (std::size_t i = 0; i < nf && i < secs.size(); ++i) stats[i].seconds = secs[i];
  }
  const auto report = eval::evaluate_correction(gt.series.masks, gt.series.reference_index, fields,
                                                stats, "corrected");
  io::export_csv(report.to_csv(), f.out);

  auto doc = ordered_json::parse(report.to_json(after.metadata_json));
  if (gt.t1_map && before.series.size() >= 3) {
    const LabelMask& ref_mask = gt.series.masks[gt.series.reference_index];
    const auto fit_before = t1fit::fit_t1(before.series);
    const auto fit_after = t1fit::fit_t1(after.series);
    doc["t1_median_error"] = {
        {"before", eval::median_relative_error(fit_before.t1_map, *gt.t1_map, ref_mask, 1)},
        {"after", eval::median_relative_error(fit_after.t1_map, *gt.t1_map, ref_mask, 1)}};
  }
  fs::path json_path(f.out);
  json_path.replace_extension(".json");
  io::write_text(json_path, doc.dump(2) + "\n");
  const auto& org = report.summary("ORG");
  const auto& cor = report.summary("corrected");
  out << "DSC " << org.dsc << " -> " << cor.dsc << ", HD_endo " << org.hd_endo << " -> "
      << cor.hd_endo << ", HD_epi " << org.hd_epi << " -> " << cor.hd_epi << "\n";
  return kOk;
}

// --- ablate --------------------------------------------------------------

struct AblateFlags {
  std::string series, grid, out;
  SolveFlags solve;
};

int cmd_ablate(const AblateFlags& f, std::ostream& out) {
  const auto cfg = f.solve.resolve();
  const auto grid = f.grid.empty() ? ablation::Grid{} : ablation::parse_grid(read_text(f.grid));
  const auto input = series_io::read(f.series);
  const auto rows = ablation::run(input.series, cfg.solve, grid, f.solve.threads.value_or(0));
  const auto table = ablation::to_csv(rows);
  if (f.out.empty()) {
    out << io::to_csv(table);
  } else {
    write_config(f.out, config::to_json(cfg));
    io::export_csv(table, fs::path(f.out) / "ablation.csv");
    out << "wrote " << rows.size() << " rows to " << (fs::path(f.out) / "ablation.csv").string()
        << "\n";
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Motion correction for inversion-recovery T1 mapping series", "t1moco"};
  app.require_subcommand(1);

  PhantomFlags ph;
  auto* p = app.add_subcommand("phantom", "generate a synthetic series with ground truth");
  p->add_option("--out", ph.out, "output directory")->required();
  p->add_option("--size", ph.size, "grid as HxW");
  p->add_option("--frames", ph.frames, "number of frames")->check(CLI::Range(2, 1000));
  p->add_option("--motion", ph.motion, "motion amplitude in pixels")
      ->check(CLI::NonNegativeNumber);
  p->add_option("--noise", ph.noise, "noise sigma as a fraction of the signal range")
      ->check(CLI::NonNegativeNumber);
  p->add_option("--seed", ph.seed, "random seed");
  p->add_flag("--pgm", ph.pgm, "also write PGM previews");

  RegisterFlags rg;
  auto* r = app.add_subcommand("register", "register one image to another");
  r->add_option("--moving", rg.moving, "moving image (.t1mc)")->required();
  r->add_option("--fixed", rg.fixed, "fixed image (.t1mc)")->required();
  r->add_option("--out", rg.out, "output directory")->required();
  r->add_option("--moving-mask", rg.moving_mask, "mask of the moving image");
  r->add_option("--fixed-mask", rg.fixed_mask, "mask of the fixed image");
  rg.solve.add(r);

  CorrectFlags cr;
  auto* c = app.add_subcommand("correct", "motion-correct a series directory");
  c->add_option("--series", cr.series, "input series directory")->required();
  c->add_option("--out", cr.out, "output directory")->required();
  cr.solve.add(c);

  FitFlags ft;
  auto* fi = app.add_subcommand("fit", "fit T1 maps to a series directory");
  fi->add_option("--series", ft.series, "input series directory")->required();
  fi->add_option("--out", ft.out, "output directory")->required();

  EvalFlags ev;
  auto* e = app.add_subcommand("eval", "score a correction against ground-truth masks");
  e->add_option("--before", ev.before, "uncorrected series directory")->required();
  e->add_option("--after", ev.after, "corrected series directory")->required();
  e->add_option("--gt", ev.gt, "directory holding ground-truth masks")->required();
  e->add_option("--out", ev.out, "report CSV path (a .json mirror is written alongside)")
      ->required();

  AblateFlags ab;
  auto* a = app.add_subcommand("ablate", "sweep similarity metric and anti-folding weight");
  a->add_option("--series", ab.series, "series directory with masks")->required();
  a->add_option("--grid", ab.grid, "JSON sweep specification");
  a->add_option("--out", ab.out, "output directory (default: CSV on stdout)");
  ab.solve.add(a);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    report_error(err, "InvalidFlags", ex.what());
    return kInvalidInput;
  }

  try {
    if (p->parsed()) return cmd_phantom(ph, out);
    if (r->parsed()) return cmd_register(rg, out);
    if (c->parsed()) return cmd_correct(cr, out, err);
    if (fi->parsed()) return cmd_fit(ft, out);
    if (e->parsed()) return cmd_eval(ev, out);
    if (a->parsed()) return cmd_ablate(ab, out);
  } catch (const Error& ex) {
    report_error(err, to_string(ex.code()), ex.what());
    return exit_code_for(ex.code());
  } catch (const fs::filesystem_error& ex) {
    report_error(err, "IoFailure", ex.what());
    return kIoFailure;
  } catch (const std::exception& ex) {
    report_error(err, "Internal", ex.what());
    return kFailure;
  }
  return kInvalidInput;
}

}  // namespace t1moco::cli
