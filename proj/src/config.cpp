#include "t1moco/config.hpp"

#include <set>

#include "json.hpp"
#include "t1moco/io.hpp"

namespace t1moco::config {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

void reject_unknown(const json& obj, const std::string& where,
                    const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) fail("unknown key '" + where + "." + key + "'");
  }
}

template <class T>
void read(const json& obj, const std::string& where, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) fail(where + "." + key + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) fail(where + "." + key + " must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) fail(where + "." + key + " must be a number");
    }
    out = it->get<T>();
  } catch (const json::exception& e) {
    fail(where + "." + key + ": " + e.what());
  }
}

}  // namespace

RunConfig parse(std::string_view text, const RunConfig& base) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(doc, "config", {"metric", "loss", "solve", "io"});
  RunConfig cfg = base;
  auto& s = cfg.solve;
  if (doc.contains("metric")) {
    const auto& m = doc["metric"];
    reject_unknown(m, "metric",
                   {"ncc", "mi", "ngf", "mind", "mi_bins", "ngf_eps", "mind_patch_radius",
                    "mind_sigma", "mind_variance_floor"});
    read(m, "metric", "ncc", s.weights.ncc);
    read(m, "metric", "mi", s.weights.mi);
    read(m, "metric", "ngf", s.weights.ngf);
    read(m, "metric", "mind", s.weights.mind);
    read(m, "metric", "mi_bins", s.metric_params.mi_bins);
    read(m, "metric", "ngf_eps", s.metric_params.ngf_eps);
    read(m, "metric", "mind_patch_radius", s.metric_params.mind_patch_radius);
    read(m, "metric", "mind_sigma", s.metric_params.mind_sigma);
    read(m, "metric", "mind_variance_floor", s.metric_params.mind_variance_floor);
  }
  if (doc.contains("loss")) {
    const auto& l = doc["loss"];
    reject_unknown(l, "loss", {"lambda1", "lambda2", "lambda_r", "lambda_s", "dice_without_factor2"});
    read(l, "loss", "lambda1", s.loss_weights.lambda1);
    read(l, "loss", "lambda2", s.loss_weights.lambda2);
    read(l, "loss", "lambda_r", s.loss_weights.lambda_r);
    read(l, "loss", "lambda_s", s.loss_weights.lambda_s);
    read(l, "loss", "dice_without_factor2", s.loss_weights.dice_without_factor2);
  }
  if (doc.contains("solve")) {
    const auto& v = doc["solve"];
    reject_unknown(v, "solve",
                   {"levels", "iters_per_level", "affine_step", "field_step", "step_growth", "seed",
                    "convergence_tol", "run_affine", "run_deformable", "use_masks"});
    read(v, "solve", "levels", s.levels);
    if (v.contains("iters_per_level")) {
      const auto& it = v["iters_per_level"];
      if (!it.is_array()) fail("solve.iters_per_level must be an array of integers");
      s.iters_per_level.clear();
      for (const auto& e : it) {
        if (!e.is_number_integer()) fail("solve.iters_per_level must be an array of integers");
        s.iters_per_level.push_back(e.get<int>());
      }
    }
    read(v, "solve", "affine_step", s.affine_step);
    read(v, "solve", "field_step", s.field_step);
    read(v, "solve", "step_growth", s.step_growth);
    read(v, "solve", "seed", s.seed);
    read(v, "solve", "convergence_tol", s.convergence_tol);
    read(v, "solve", "run_affine", s.run_affine);
    read(v, "solve", "run_deformable", s.run_deformable);
    read(v, "solve", "use_masks", s.use_masks);
  }
  if (doc.contains("io")) {
    const auto& o = doc["io"];
    reject_unknown(o, "io", {"write_pgm"});
    read(o, "io", "write_pgm", cfg.io.write_pgm);
  }
  try {
    s.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
  return cfg;
}

RunConfig load(const std::string& path, const RunConfig& base) {
  const auto bytes = io::read_file(path);
  return parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), base);
}

std::string to_json(const RunConfig& cfg) {
  const auto& s = cfg.solve;
  ordered_json j;
  j["metric"] = {{"ncc", s.weights.ncc},
                 {"mi", s.weights.mi},
                 {"ngf", s.weights.ngf},
                 {"mind", s.weights.mind},
                 {"mi_bins", s.metric_params.mi_bins},
                 {"ngf_eps", s.metric_params.ngf_eps},
                 {"mind_patch_radius", s.metric_params.mind_patch_radius},
                 {"mind_sigma", s.metric_params.mind_sigma},
                 {"mind_variance_floor", s.metric_params.mind_variance_floor}};
  j["loss"] = {{"lambda1", s.loss_weights.lambda1},
               {"lambda2", s.loss_weights.lambda2},
               {"lambda_r", s.loss_weights.lambda_r},
               {"lambda_s", s.loss_weights.lambda_s},
               {"dice_without_factor2", s.loss_weights.dice_without_factor2}};
  j["solve"] = {{"levels", s.levels},
                {"iters_per_level", s.iters_per_level},
                {"affine_step", s.affine_step},
                {"field_step", s.field_step},
                {"step_growth", s.step_growth},
                {"seed", s.seed},
                {"convergence_tol", s.convergence_tol},
                {"run_affine", s.run_affine},
                {"run_deformable", s.run_deformable},
                {"use_masks", s.use_masks}};
  j["io"] = {{"write_pgm", cfg.io.write_pgm}};
  return j.dump(2) + "\n";
}

}  // namespace t1moco::config
