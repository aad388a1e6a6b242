#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "t1moco/cli.hpp"
#include "t1moco/config.hpp"
#include "t1moco/io.hpp"
#include "t1moco/series_io.hpp"

using namespace t1moco;
using t1moco::testing::scratch_dir;
using t1moco::testing::tree_diff;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "t1moco");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

ErrorCode parse_error(std::string_view json) {
  try {
    config::parse(json);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoFailure;
}

const char* kFastConfig = R"({
  "solve": {"levels": 2, "iters_per_level": [25, 15], "seed": 7}
})";

}  // namespace

TEST_CASE("config overlays only the keys present") {
  const auto cfg = config::parse(R"({"loss": {"lambda1": 5}, "solve": {"levels": 2,
      "iters_per_level": [3, 4], "step_growth": 1.5}, "io": {"write_pgm": true}})");
  CHECK(cfg.solve.loss_weights.lambda1 == 5.0);
  CHECK(cfg.solve.loss_weights.lambda2 == losses::LossWeights{}.lambda2);
  CHECK(cfg.solve.levels == 2);
  CHECK(cfg.solve.iters_per_level == std::vector<int>{3, 4});
  CHECK(cfg.solve.step_growth == 1.5);
  CHECK(cfg.solve.field_step == optimizer::SolveConfig{}.field_step);
  CHECK(cfg.io.write_pgm);

  const auto on_top = config::parse(R"({"metric": {"mi": 0}})", cfg);
  CHECK(on_top.solve.loss_weights.lambda1 == 5.0);
  CHECK(on_top.solve.weights.mi == 0.0);
}

TEST_CASE("config rejects unknown keys and bad types") {
  CHECK(parse_error(R"({"solver": {}})") == ErrorCode::InvalidConfig);
  CHECK(parse_error(R"({"solve": {"level": 2}})") == ErrorCode::InvalidConfig);
  CHECK(parse_error(R"({"solve": {"levels": 2.5}})") == ErrorCode::InvalidConfig);
  CHECK(parse_error(R"({"solve": {"iters_per_level": 3}})") == ErrorCode::InvalidConfig);
  CHECK(parse_error(R"({"io": {"write_pgm": 1}})") == ErrorCode::InvalidConfig);
  CHECK(parse_error("[1, 2]") == ErrorCode::InvalidConfig);
  CHECK(parse_error("{not json") == ErrorCode::InvalidConfig);
}

TEST_CASE("config to_json round trip") {
  config::RunConfig cfg;
  cfg.solve.seed = 42;
  cfg.solve.weights.ngf = 0.5;
  cfg.solve.step_growth = 2.0;
  cfg.io.write_pgm = true;
  const auto text = config::to_json(cfg);
  const auto back = config::parse(text);
  CHECK(config::to_json(back) == text);
  CHECK(back.solve.seed == 42);
  CHECK(back.solve.weights.ngf == 0.5);
  CHECK(back.io == cfg.io);
}

TEST_CASE("cli exit codes and error reports") {
  CHECK(cli_run({}).code == cli::kInvalidInput);
  CHECK(cli_run({"--help"}).code == cli::kOk);

  auto r = cli_run({"phantom"});
  CHECK(r.code == cli::kInvalidInput);
  auto err = nlohmann::json::parse(r.err);
  CHECK(err["error"]["code"] == "InvalidFlags");

  const auto dir = scratch_dir("cli_codes");
  r = cli_run({"phantom", "--out", (dir / "p").string(), "--size", "12by40"});
  CHECK(r.code == cli::kInvalidInput);
  err = nlohmann::json::parse(r.err);
  CHECK(err["error"].contains("message"));

  r = cli_run({"fit", "--series", (dir / "missing").string(), "--out", (dir / "f").string()});
  CHECK(r.code == cli::kIoFailure);
  CHECK(nlohmann::json::parse(r.err)["error"]["code"].is_string());

  io::write_text(dir / "bad.json", R"({"solve": {"levels": 0}})");
  REQUIRE(cli_run({"phantom", "--out", (dir / "p").string(), "--size", "40x48", "--frames", "3"})
              .code == cli::kOk);
  r = cli_run({"correct", "--series", (dir / "p").string(), "--out", (dir / "c").string(),
               "--config", (dir / "bad.json").string()});
  CHECK(r.code == cli::kInvalidInput);

  // A phantom series has only a two-frame minimum for correction but fit
  // needs three.
  REQUIRE(cli_run({"phantom", "--out", (dir / "two").string(), "--size", "40x48", "--frames",
                   "2"})
              .code == cli::kOk);
  r = cli_run({"fit", "--series", (dir / "two").string(), "--out", (dir / "f2").string()});
  CHECK(r.code == cli::kFailure);
  fs::remove_all(dir);
}

TEST_CASE("phantom, correct, fit and eval pipeline") {
  const auto dir = scratch_dir("cli_pipeline");
  io::write_text(dir / "cfg.json", kFastConfig);
  const auto ph = (dir / "ph").string();
  REQUIRE(cli_run({"phantom", "--out", ph, "--size", "72x80", "--frames", "4", "--seed", "3",
                   "--pgm"})
              .code == cli::kOk);
  CHECK(fs::exists(fs::path(ph) / "manifest.json"));
  CHECK(fs::exists(fs::path(ph) / "config.json"));
  const auto input = series_io::read(ph);
  CHECK(input.series.size() == 4);
  CHECK(input.series.grid() == GridSize{80, 72});
  CHECK(input.gt_fields.size() == 4);
  REQUIRE(input.t1_map);

  const auto c1 = (dir / "c1").string();
  const auto c2 = (dir / "c2").string();
  auto r = cli_run({"correct", "--series", ph, "--out", c1, "--config", (dir / "cfg.json").string(),
                    "--threads", "2"});
  REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
  r = cli_run({"correct", "--series", ph, "--out", c2, "--config", (dir / "cfg.json").string(),
               "--threads", "1"});
  REQUIRE(r.code == cli::kOk);
  CHECK(tree_diff(c1, c2, {"timing.json"}).empty());
  CHECK(fs::exists(fs::path(c1) / "timing.json"));

  const auto corrected = series_io::read(c1);
  const std::size_t ref = corrected.series.reference_index;
  CHECK(corrected.series.frames[ref] == input.series.frames[ref]);
  REQUIRE(corrected.correction_fields.size() == 4);
  CHECK_FALSE(corrected.correction_fields[ref].has_value());
  const auto written =
      nlohmann::json::parse(t1moco::testing::file_bytes(fs::path(c1) / "config.json"));
  CHECK(written["solve"]["seed"] == 7);

  const auto fit = (dir / "fit").string();
  r = cli_run({"fit", "--series", c1, "--out", fit});
  REQUIRE(r.code == cli::kOk);
  const auto t1 = io::load_image(fs::path(fit) / "t1_map.t1mc");
  CHECK(t1.grid() == GridSize{80, 72});
  CHECK(fs::exists(fs::path(fit) / "summary.json"));

  const auto report = (dir / "report.csv").string();
  r = cli_run({"eval", "--before", ph, "--after", c1, "--gt", ph, "--out", report});
  REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
  const auto doc = nlohmann::json::parse(t1moco::testing::file_bytes(dir / "report.json"));
  const auto& summary = doc["summary"];
  REQUIRE(summary.size() == 2);
  CHECK(summary[0]["method"] == "ORG");
  CHECK(summary[1]["dsc"].get<double>() > summary[0]["dsc"].get<double>());
  CHECK(doc.contains("t1_median_error"));
  CHECK(doc["config"]["generator"] == "correct");
  fs::remove_all(dir);
}

TEST_CASE("ablate writes one row per configuration") {
  const auto dir = scratch_dir("cli_ablate");
  io::write_text(dir / "cfg.json", R"({"solve": {"levels": 1, "iters_per_level": [5]}})");
  io::write_text(dir / "grid.json", R"({"metrics": ["ncc", "wls"], "lambda1": [0, 1000]})");
  io::write_text(dir / "bad_grid.json", R"({"metrics": ["ssd"]})");
  const auto ph = (dir / "ph").string();
  REQUIRE(cli_run({"phantom", "--out", ph, "--size", "40x48", "--frames", "3"}).code == cli::kOk);
  auto r = cli_run({"ablate", "--series", ph, "--grid", (dir / "grid.json").string(), "--config",
                    (dir / "cfg.json").string()});
  REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
  CHECK(r.out.rfind("metric,", 0) == 0);
  // Header, ORG and the four grid points.
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 6);
  r = cli_run({"ablate", "--series", ph, "--grid", (dir / "bad_grid.json").string()});
  CHECK(r.code == cli::kInvalidInput);
  fs::remove_all(dir);
}
