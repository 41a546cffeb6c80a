#include "tomo/run_config.hpp"

#include <cmath>
#include <initializer_list>
#include <stdexcept>

#include <json.hpp>

namespace tomo {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw std::invalid_argument("config: " + ctx + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw std::invalid_argument("config: unknown key \"" + key + "\" in " + ctx);
  }
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void parse_geometry(const json& j, ScannerGeometry& g) {
  check_keys(j, "geometry", {"sad", "sdd", "det_rows", "det_cols", "det_pixel_pitch"});
  maybe(j, "sad", g.sad);
  maybe(j, "sdd", g.sdd);
  maybe(j, "det_rows", g.det_rows);
  maybe(j, "det_cols", g.det_cols);
  maybe(j, "det_pixel_pitch", g.det_pixel_pitch);
}

void parse_phantom(const json& j, PhantomSpec& p) {
  check_keys(j, "phantom",
             {"seed", "size", "n_teeth", "n_sinuses", "soft_level", "hard_level"});
  maybe(j, "seed", p.seed);
  maybe(j, "size", p.size);
  maybe(j, "n_teeth", p.n_teeth);
  maybe(j, "n_sinuses", p.n_sinuses);
  maybe(j, "soft_level", p.soft_level);
  maybe(j, "hard_level", p.hard_level);
}

void parse_noise(const json& j, NoiseSpec& n) {
  check_keys(j, "train.noise", {"gaussian_sigma", "smooth_gain_amp", "seed"});
  maybe(j, "gaussian_sigma", n.gaussian_sigma);
  maybe(j, "smooth_gain_amp", n.smooth_gain_amp);
  maybe(j, "seed", n.seed);
}

void parse_grid(const json& j, HashGridConfig& g) {
  check_keys(j, "train.grid",
             {"levels", "table_size_log2", "n_min", "max_resolution", "growth"});
  if (j.contains("max_resolution") && j.contains("growth"))
    throw std::invalid_argument("config: grid takes max_resolution or growth, not both");
  int levels = g.levels, log2 = g.table_size_log2, n_min = g.n_min;
  maybe(j, "levels", levels);
  maybe(j, "table_size_log2", log2);
  maybe(j, "n_min", n_min);
  if (j.contains("max_resolution")) {
    g = HashGridConfig::with_max_resolution(levels, log2, n_min,
                                            j.at("max_resolution").get<int>());
  } else {
    g.levels = levels;
    g.table_size_log2 = log2;
    g.n_min = n_min;
    maybe(j, "growth", g.growth);
  }
}

void parse_train(const json& j, TrainConfig& t) {
  check_keys(j, "train",
             {"total_iterations", "batch_rays", "n_samples", "lambda0", "k", "lr", "mode",
              "supervision", "noise", "seed", "eval_every", "t_alpha", "t_beta",
              "surrogate_temp", "grid"});
  maybe(j, "total_iterations", t.total_iterations);
  maybe(j, "batch_rays", t.batch_rays);
  maybe(j, "n_samples", t.n_samples);
  maybe(j, "lambda0", t.lambda0);
  maybe(j, "k", t.k);
  maybe(j, "lr", t.lr);
  if (j.contains("mode")) t.mode = train_mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("supervision"))
    t.supervision = supervision_from_string(j.at("supervision").get<std::string>());
  if (j.contains("noise")) parse_noise(j.at("noise"), t.noise);
  maybe(j, "seed", t.seed);
  maybe(j, "eval_every", t.eval_every);
  maybe(j, "t_alpha", t.t_alpha);
  maybe(j, "t_beta", t.t_beta);
  maybe(j, "surrogate_temp", t.surrogate_temp);
  if (j.contains("grid")) parse_grid(j.at("grid"), t.grid);
}

void parse_sart(const json& j, SartConfig& s) {
  check_keys(j, "sart",
             {"n_iterations", "relaxation", "nonneg_clamp", "view_order", "n_samples"});
  maybe(j, "n_iterations", s.n_iterations);
  maybe(j, "relaxation", s.relaxation);
  maybe(j, "nonneg_clamp", s.nonneg_clamp);
  if (j.contains("view_order")) {
    const std::string order = j.at("view_order").get<std::string>();
    if (order == "sequential")
      s.view_order = ViewOrder::kSequential;
    else if (order == "shuffled")
      s.view_order = ViewOrder::kShuffled;
    else
      throw std::invalid_argument("config: unknown view_order: " + order);
  }
  maybe(j, "n_samples", s.n_samples);
}

void parse_fdk(const json& j, FdkConfig& f) {
  check_keys(j, "fdk", {"filter"});
  if (j.contains("filter"))
    f.filter = fdk_filter_from_string(j.at("filter").get<std::string>());
}

}  // namespace

void RunConfig::validate() const {
  if (scale != "desk" && scale != "full")
    throw std::invalid_argument("config: scale must be \"desk\" or \"full\"");
  if (n_views < 1) throw std::invalid_argument("config: n_views must be >= 1");
  if (!(range_deg > 0.0 && range_deg <= 360.0))
    throw std::invalid_argument("config: range_deg must be in (0, 360]");
  geometry_with_trajectory().validate();
  phantom.validate();
  train.validate();
  sart.validate();
}

ScannerGeometry RunConfig::geometry_with_trajectory() const {
  return geometry_with_trajectory(n_views);
}

ScannerGeometry RunConfig::geometry_with_trajectory(int views) const {
  ScannerGeometry g = geometry;
  g.angles_deg = make_circular_trajectory(views, range_deg);
  return g;
}

VolumeExtent RunConfig::recon_extent() const {
  VolumeExtent e;
  e.nx = e.ny = e.nz = phantom.size;
  return e;
}

RunConfig RunConfig::desk_config() {
  RunConfig cfg;
  cfg.scale = "desk";
  cfg.geometry.det_rows = 64;
  cfg.geometry.det_cols = 64;
  cfg.geometry.det_pixel_pitch = 3.0 / 64.0;
  cfg.phantom.size = 64;
  cfg.train = TrainConfig::desk_preset();
  return cfg;
}

RunConfig RunConfig::full_config() {
  RunConfig cfg;
  cfg.scale = "full";
  cfg.geometry.det_rows = 512;
  cfg.geometry.det_cols = 512;
  cfg.geometry.det_pixel_pitch = 3.0 / 512.0;
  cfg.n_views = 120;
  cfg.phantom.size = 256;
  cfg.train = TrainConfig::full_preset();
  return cfg;
}

RunConfig parse_run_config(const std::string& json_text) {
  const json j = json::parse(json_text);
  check_keys(j, "config",
             {"scale", "geometry", "trajectory", "phantom", "train", "sart", "fdk",
              "output", "deterministic"});

  std::string scale = "desk";
  maybe(j, "scale", scale);
  RunConfig cfg = scale == "full" ? RunConfig::full_config() : RunConfig::desk_config();
  cfg.scale = scale;

  if (j.contains("geometry")) parse_geometry(j.at("geometry"), cfg.geometry);
  if (j.contains("trajectory")) {
    const json& t = j.at("trajectory");
    check_keys(t, "trajectory", {"n_views", "range_deg"});
    maybe(t, "n_views", cfg.n_views);
    maybe(t, "range_deg", cfg.range_deg);
  }
  if (j.contains("phantom")) parse_phantom(j.at("phantom"), cfg.phantom);
  if (j.contains("train")) parse_train(j.at("train"), cfg.train);
  if (j.contains("sart")) parse_sart(j.at("sart"), cfg.sart);
  if (j.contains("fdk")) parse_fdk(j.at("fdk"), cfg.fdk);
  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, "output", {"dir"});
    maybe(o, "dir", cfg.out_dir);
  }
  maybe(j, "deterministic", cfg.deterministic);

  cfg.validate();
  return cfg;
}

std::string to_json_text(const RunConfig& cfg) {
  json j{
      {"scale", cfg.scale},
      {"geometry",
       {{"sad", cfg.geometry.sad},
        {"sdd", cfg.geometry.sdd},
        {"det_rows", cfg.geometry.det_rows},
        {"det_cols", cfg.geometry.det_cols},
        {"det_pixel_pitch", cfg.geometry.det_pixel_pitch}}},
      {"trajectory", {{"n_views", cfg.n_views}, {"range_deg", cfg.range_deg}}},
      {"phantom",
       {{"seed", cfg.phantom.seed},
        {"size", cfg.phantom.size},
        {"n_teeth", cfg.phantom.n_teeth},
        {"n_sinuses", cfg.phantom.n_sinuses},
        {"soft_level", cfg.phantom.soft_level},
        {"hard_level", cfg.phantom.hard_level}}},
      {"train",
       {{"total_iterations", cfg.train.total_iterations},
        {"batch_rays", cfg.train.batch_rays},
        {"n_samples", cfg.train.n_samples},
        {"lambda0", cfg.train.lambda0},
        {"k", cfg.train.k},
        {"lr", cfg.train.lr},
        {"mode", to_string(cfg.train.mode)},
        {"supervision", to_string(cfg.train.supervision)},
        {"noise",
         {{"gaussian_sigma", cfg.train.noise.gaussian_sigma},
          {"smooth_gain_amp", cfg.train.noise.smooth_gain_amp},
          {"seed", cfg.train.noise.seed}}},
        {"seed", cfg.train.seed},
        {"eval_every", cfg.train.eval_every},
        {"t_alpha", cfg.train.t_alpha},
        {"t_beta", cfg.train.t_beta},
        {"surrogate_temp", cfg.train.surrogate_temp},
        {"grid",
         {{"levels", cfg.train.grid.levels},
          {"table_size_log2", cfg.train.grid.table_size_log2},
          {"n_min", cfg.train.grid.n_min},
          {"growth", cfg.train.grid.growth}}}}},
      {"sart",
       {{"n_iterations", cfg.sart.n_iterations},
        {"relaxation", cfg.sart.relaxation},
        {"nonneg_clamp", cfg.sart.nonneg_clamp},
        {"view_order",
         cfg.sart.view_order == ViewOrder::kSequential ? "sequential" : "shuffled"},
        {"n_samples", cfg.sart.n_samples}}},
      {"fdk", {{"filter", to_string(cfg.fdk.filter)}}},
      {"output", {{"dir", cfg.out_dir}}},
      {"deterministic", cfg.deterministic},
  };
  return j.dump(2) + "\n";
}

}  // namespace tomo
