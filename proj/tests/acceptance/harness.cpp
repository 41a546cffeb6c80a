#include "harness.hpp"

#include <chrono>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "tomo/io.hpp"
#include "tomo/metrics.hpp"

namespace tomo::acceptance {

namespace {

using nlohmann::json;

constexpr int kSimulationOversampling = 2;

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) h = (h ^ c) * 1099511628211ULL;
  return h;
}

}  // namespace

std::string to_string(SceneVariant variant) {
  switch (variant) {
    case SceneVariant::kPlain: return "plain";
    case SceneVariant::kForeignBodies: return "balls";
    case SceneVariant::kClippedHard: return "clipped";
  }
  return "plain";
}

BuiltScene build_scene(const SceneSpec& spec) {
  const RunConfig base = RunConfig::desk_config();
  auto [volume, masks] = generate_head_phantom(base.phantom);

  BuiltScene built;
  built.original_masks = masks;

  if (spec.variant == SceneVariant::kForeignBodies) {
    auto [vol2, masks2] = add_foreign_bodies(volume, masks, spec.n_balls, spec.ball_radius,
                                             spec.ball_value, spec.ball_seed);
    volume = std::move(vol2);
    masks = std::move(masks2);
  } else if (spec.variant == SceneVariant::kClippedHard) {
    volume = clip_hard_tissue(volume, spec.clip_cap);
    masks = threshold_masks(volume, base.train.t_alpha, base.train.t_beta);
  }
  built.construction_masks = masks;

  built.geom = base.geometry;
  built.geom.angles_deg = make_circular_trajectory(spec.views, base.range_deg);

  const int sim_samples = kSimulationOversampling * base.train.n_samples;
  built.scene.sigma_stack = project_volume(volume, built.geom, sim_samples);
  const TissueMasks targets =
      threshold_masks(volume, base.train.t_alpha, base.train.t_beta);
  auto [alpha, beta] = project_masks(targets, built.geom, sim_samples);
  built.scene.alpha_stack = std::move(alpha);
  built.scene.beta_stack = std::move(beta);
  built.scene.ground_truth = std::move(volume);
  built.scene.recon_extent = built.scene.ground_truth.extent;
  return built;
}

RunCache::RunCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::optional<RunOutcome> RunCache::load(const std::string& key) const {
  const auto path = dir_ / (std::to_string(fnv1a(key)) + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  const json j = json::parse(io::read_text(path));
  if (j.at("key").get<std::string>() != key) return std::nullopt;  // hash collision
  RunOutcome out;
  out.psnr = j.at("psnr").get<double>();
  out.ssim = j.at("ssim").get<double>();
  out.seconds = j.at("seconds").get<double>();
  out.iterations = j.at("iterations").get<int>();
  for (const auto& rec : j.at("psnr_history"))
    out.psnr_history.emplace_back(rec.at(0).get<int>(), rec.at(1).get<double>());
  return out;
}

void RunCache::store(const std::string& key, const RunOutcome& outcome) const {
  json history = json::array();
  for (const auto& [iter, psnr] : outcome.psnr_history) history.push_back({iter, psnr});
  const json j{{"key", key},
               {"psnr", outcome.psnr},
               {"ssim", outcome.ssim},
               {"seconds", outcome.seconds},
               {"iterations", outcome.iterations},
               {"psnr_history", history}};
  io::write_text_atomic(dir_ / (std::to_string(fnv1a(key)) + ".json"), j.dump(2) + "\n");
}

RunCache default_cache() {
  if (const char* env = std::getenv("TOMO_ACCEPTANCE_CACHE"))
    return RunCache(std::filesystem::path(env));
  return RunCache(std::filesystem::current_path() / "acceptance_cache");
}

std::string cache_key(const NeuralRunSpec& spec) {
  std::ostringstream key;
  key << "v" << kCacheVersion << "|scene=" << to_string(spec.scene.variant)
      << "|views=" << spec.scene.views << "|mode=" << to_string(spec.mode)
      << "|sup=" << to_string(spec.supervision) << "|seed=" << spec.seed
      << "|noisy_defaults=" << (spec.noisy_supervision_defaults ? 1 : 0);
  if (spec.scene.variant == SceneVariant::kForeignBodies)
    key << "|balls=" << spec.scene.n_balls << "," << spec.scene.ball_radius << ","
        << spec.scene.ball_value << "," << spec.scene.ball_seed;
  if (spec.scene.variant == SceneVariant::kClippedHard)
    key << "|cap=" << spec.scene.clip_cap;
  return key.str();
}

namespace {

TrainConfig config_for(const NeuralRunSpec& spec, const BuiltScene& built) {
  TrainConfig cfg = TrainConfig::desk_preset();
  cfg.mode = spec.mode;
  cfg.supervision = spec.supervision;
  cfg.seed = spec.seed;
  if (spec.noisy_supervision_defaults) {
    cfg.noise.gaussian_sigma = 0.05 * built.scene.alpha_stack->mean_value();
    cfg.noise.smooth_gain_amp = 0.1;
    cfg.noise.seed = 1000 + spec.seed;
  }
  return cfg;
}

RunOutcome outcome_from(const TrainResult& result, const Scene& scene, double seconds) {
  RunOutcome out;
  const Volume recon = std::visit(
      [&](const auto& f) { return extract_volume(f, scene.ground_truth.extent); },
      result.field);
  const PsnrResult p = psnr(recon, scene.ground_truth, 1.0);
  out.psnr = p.identical ? 999.0 : *p.db;
  out.ssim = ssim(recon, scene.ground_truth, 1.0);
  for (const TrainLogRecord& rec : result.log.records)
    out.psnr_history.emplace_back(rec.iteration, rec.psnr_db);
  out.seconds = seconds;
  out.iterations =
      result.log.records.empty() ? 0 : result.log.records.back().iteration;
  return out;
}

}  // namespace

RunOutcome run_neural(const NeuralRunSpec& spec, const RunCache& cache) {
  const std::string key = cache_key(spec);
  if (const auto cached = cache.load(key)) return *cached;

  const BuiltScene built = build_scene(spec.scene);
  const TrainConfig cfg = config_for(spec, built);
  const auto start = std::chrono::steady_clock::now();
  const TrainResult result = train(built.scene, cfg);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const RunOutcome out = outcome_from(result, built.scene, seconds);
  cache.store(key, out);
  return out;
}

std::pair<RunOutcome, FieldVariant> run_neural_with_field(const NeuralRunSpec& spec) {
  const BuiltScene built = build_scene(spec.scene);
  const TrainConfig cfg = config_for(spec, built);
  const auto start = std::chrono::steady_clock::now();
  TrainResult result = train(built.scene, cfg);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  RunOutcome out = outcome_from(result, built.scene, seconds);
  return {std::move(out), std::move(result.field)};
}

RunOutcome run_sart(const SceneSpec& scene_spec, const RunCache& cache) {
  NeuralRunSpec pseudo;
  pseudo.scene = scene_spec;
  const std::string key = "sart|" + cache_key(pseudo);
  if (const auto cached = cache.load(key)) return *cached;

  const BuiltScene built = build_scene(scene_spec);
  const RunConfig base = RunConfig::desk_config();
  const auto start = std::chrono::steady_clock::now();
  const Volume recon = sart(built.scene.sigma_stack, built.scene.recon_extent, base.sart);
  RunOutcome out;
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const PsnrResult p = psnr(recon, built.scene.ground_truth, 1.0);
  out.psnr = p.identical ? 999.0 : *p.db;
  out.ssim = ssim(recon, built.scene.ground_truth, 1.0);
  out.iterations = base.sart.n_iterations;
  cache.store(key, out);
  return out;
}

double mean(const std::vector<double>& values) {
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

}  // namespace tomo::acceptance
