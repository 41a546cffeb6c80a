#include "tomo/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tomo/adam.hpp"
#include "tomo/metrics.hpp"

namespace tomo {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kTnt: return "tnt";
    case TrainMode::kTntConstLambda: return "tnt_const_lambda";
    case TrainMode::kTntNoSup: return "tnt_nosup";
    case TrainMode::kMlp: return "mlp";
    case TrainMode::kMlpThreshSup: return "mlp_thresh_sup";
  }
  return "tnt";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "tnt") return TrainMode::kTnt;
  if (s == "tnt_const_lambda" || s == "tnt-const-lambda") return TrainMode::kTntConstLambda;
  if (s == "tnt_nosup" || s == "tnt-nosup") return TrainMode::kTntNoSup;
  if (s == "mlp") return TrainMode::kMlp;
  if (s == "mlp_thresh_sup" || s == "mlp-thresh-sup") return TrainMode::kMlpThreshSup;
  throw std::invalid_argument("unknown train mode: " + s);
}

std::string to_string(SupervisionKind kind) {
  return kind == SupervisionKind::kTarget ? "target" : "target_noisy";
}

SupervisionKind supervision_from_string(const std::string& s) {
  if (s == "target") return SupervisionKind::kTarget;
  if (s == "target_noisy") return SupervisionKind::kTargetNoisy;
  throw std::invalid_argument("unknown supervision kind: " + s);
}

bool mode_uses_tissue_supervision(TrainMode mode) {
  return mode == TrainMode::kTnt || mode == TrainMode::kTntConstLambda ||
         mode == TrainMode::kMlpThreshSup;
}

bool mode_uses_quad_field(TrainMode mode) {
  return mode == TrainMode::kTnt || mode == TrainMode::kTntConstLambda ||
         mode == TrainMode::kTntNoSup;
}

void TrainConfig::validate() const {
  if (total_iterations < 1) throw std::invalid_argument("train: iterations must be >= 1");
  if (batch_rays < 1) throw std::invalid_argument("train: batch must be >= 1");
  if (n_samples < 1) throw std::invalid_argument("train: n_samples must be >= 1");
  if (lambda0 < 0.0) throw std::invalid_argument("train: lambda0 must be >= 0");
  if (!(k > 0.0 && k <= 1.0)) throw std::invalid_argument("train: k must be in (0, 1]");
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (eval_every < 1) throw std::invalid_argument("train: eval_every must be >= 1");
  if (!(t_alpha >= 0.0 && t_alpha < t_beta))
    throw std::invalid_argument("train: requires 0 <= t_alpha < t_beta");
  if (!(surrogate_temp > 0.0))
    throw std::invalid_argument("train: surrogate temperature must be positive");
  noise.validate();
  grid.validate();
}

TrainConfig TrainConfig::desk_preset() {
  TrainConfig cfg;
  cfg.total_iterations = 2000;
  cfg.batch_rays = 512;
  cfg.n_samples = 128;
  cfg.eval_every = 100;
  cfg.grid = HashGridConfig::desk_preset();
  return cfg;
}

TrainConfig TrainConfig::full_preset() {
  TrainConfig cfg;
  cfg.total_iterations = 10000;
  cfg.batch_rays = 1024;
  cfg.n_samples = 576;
  cfg.eval_every = 500;
  cfg.grid = HashGridConfig::full_preset();
  return cfg;
}

double lambda_schedule(int t, int total_iterations, double k, double lambda0) {
  const double base = std::max(0.0, 1.0 - static_cast<double>(t) / (k * total_iterations));
  return base * base * lambda0;
}

double composite_loss(std::span<const RenderedRay> rendered,
                      std::span<const double> gt_sigma, std::span<const double> sup_alpha,
                      std::span<const double> sup_beta, double lambda) {
  const std::size_t n = rendered.size();
  if (gt_sigma.size() != n || sup_alpha.size() != n || sup_beta.size() != n)
    throw std::invalid_argument("composite_loss: batch length mismatch");
  if (n == 0) throw std::invalid_argument("composite_loss: batch must be non-empty");
  double data = 0.0, tissue = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    data += std::abs(rendered[i].sigma_acc - gt_sigma[i]);
    const double da = rendered[i].alpha_acc - sup_alpha[i];
    const double db = rendered[i].beta_acc - sup_beta[i];
    tissue += da * da + db * db;
  }
  return data / n + lambda * (tissue / n);
}

std::vector<TrainRay> sample_batch(const ProjectionStack& sigma_stack,
                                   const ProjectionStack* alpha_stack,
                                   const ProjectionStack* beta_stack,
                                   const VolumeExtent& extent, int batch_rays, Rng* rng) {
  const int n_views = sigma_stack.geom.n_views();
  if (batch_rays < n_views)
    throw std::invalid_argument("sample_batch: batch must cover every view (B >= V)");

  const int base = batch_rays / n_views;
  const int remainder = batch_rays % n_views;
  std::vector<TrainRay> batch;
  batch.reserve(batch_rays);

  for (int view = 0; view < n_views; ++view) {
    const int count = base + (view < remainder ? 1 : 0);
    for (int i = 0; i < count; ++i) {
      for (int attempt = 0;; ++attempt) {
        if (attempt >= 10000)
          throw PlacementError("sample_batch: no volume-intersecting pixel found");
        const int row = static_cast<int>(rng->below(sigma_stack.geom.det_rows));
        const int col = static_cast<int>(rng->below(sigma_stack.geom.det_cols));
        Ray ray = ray_for_pixel(sigma_stack.geom, view, row, col);
        const auto hit = intersect_aabb(ray, extent);
        if (!hit) continue;
        ray.t_near = hit->first;
        ray.t_far = hit->second;
        TrainRay tr;
        tr.ray = ray;
        tr.sigma_gt = sigma_stack.at(view, row, col);
        tr.alpha_sup = alpha_stack ? alpha_stack->at(view, row, col) : 0.0;
        tr.beta_sup = beta_stack ? beta_stack->at(view, row, col) : 0.0;
        batch.push_back(tr);
        break;
      }
    }
  }
  return batch;
}

std::pair<double, double> accumulate_thresholded(std::span<const double> sigma, double dt,
                                                 double t_alpha, double t_beta,
                                                 double temperature) {
  double acc_a = 0.0, acc_b = 0.0;
  if (temperature > 0.0) {
    const double inv = 1.0 / temperature;
    for (double v : sigma) {
      acc_a += sigmoid((v - t_alpha) * inv);
      acc_b += sigmoid((v - t_beta) * inv);
    }
  } else {
    for (double v : sigma) {
      acc_a += v >= t_alpha ? 1.0 : 0.0;
      acc_b += v >= t_beta ? 1.0 : 0.0;
    }
  }
  return {acc_a * dt, acc_b * dt};
}

namespace {

std::pair<double, double> threshold_render_impl(const SingleField& field, const Ray& ray,
                                                int n_samples, double t_alpha,
                                                double t_beta, double temperature) {
  if (n_samples < 1) throw std::invalid_argument("threshold render: n_samples must be >= 1");
  const auto hit = intersect_aabb(ray, field.domain);
  if (!hit) return {0.0, 0.0};
  const double dt = (hit->second - hit->first) / n_samples;
  std::vector<double> sigma(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const Vec3 p = field.normalize(ray.at(hit->first + (i + 0.5) * dt));
    sigma[i] = eval_sigma(field, p);
  }
  return accumulate_thresholded(sigma, dt, t_alpha, t_beta, temperature);
}

}  // namespace

std::pair<double, double> surrogate_threshold_render(const SingleField& field,
                                                     const Ray& ray, int n_samples,
                                                     double t_alpha, double t_beta,
                                                     double temperature) {
  if (!(temperature > 0.0))
    throw std::invalid_argument("surrogate render: temperature must be positive");
  return threshold_render_impl(field, ray, n_samples, t_alpha, t_beta, temperature);
}

std::pair<double, double> hard_threshold_render(const SingleField& field, const Ray& ray,
                                                int n_samples, double t_alpha,
                                                double t_beta) {
  return threshold_render_impl(field, ray, n_samples, t_alpha, t_beta, 0.0);
}

namespace {

double lambda_for(const TrainConfig& cfg, int t) {
  switch (cfg.mode) {
    case TrainMode::kTnt:
    case TrainMode::kMlpThreshSup:
      return lambda_schedule(t, cfg.total_iterations, cfg.k, cfg.lambda0);
    case TrainMode::kTntConstLambda:
      return cfg.lambda0;
    case TrainMode::kTntNoSup:
    case TrainMode::kMlp:
      return 0.0;
  }
  return 0.0;
}

}  // namespace

TrainResult train(const Scene& scene, const TrainConfig& config) {
  config.validate();
  scene.sigma_stack.validate();
  scene.recon_extent.validate();

  const bool needs_sup = mode_uses_tissue_supervision(config.mode);
  if (needs_sup && (!scene.alpha_stack || !scene.beta_stack))
    throw std::invalid_argument("train: mode requires tissue supervision stacks");

  // Resolve the supervision actually fed to the loss.
  std::optional<ProjectionStack> sup_alpha, sup_beta;
  if (needs_sup) {
    if (config.supervision == SupervisionKind::kTargetNoisy) {
      NoiseSpec beta_noise = config.noise;
      beta_noise.seed = config.noise.seed + 1;
      sup_alpha = perturb_projections(*scene.alpha_stack, config.noise);
      sup_beta = perturb_projections(*scene.beta_stack, beta_noise);
    } else {
      sup_alpha = *scene.alpha_stack;
      sup_beta = *scene.beta_stack;
    }
  }

  FieldVariant field = mode_uses_quad_field(config.mode)
                           ? FieldVariant(QuadField::create(config.grid, scene.recon_extent,
                                                            config.seed))
                           : FieldVariant(SingleField::create(config.grid,
                                                              scene.recon_extent,
                                                              config.seed));

  const std::int64_t n_params = std::visit(
      [](const auto& f) { return f.layout.total; }, field);
  AdamState adam(AdamConfig{config.lr, 0.9, 0.999, 1e-8},
                 static_cast<std::size_t>(n_params));
  std::vector<double> grads(n_params, 0.0);

  // distinct stream from the parameter-init seed
  Rng batch_rng(config.seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);

  const ThresholdSurrogate surrogate{config.t_alpha, config.t_beta, config.surrogate_temp};
  LossWorkspace workspace;
  TrainLog log;
  const auto start = std::chrono::steady_clock::now();

  const auto evaluate = [&](int iteration, const LossTerms& loss, double lambda) {
    const Volume recon = std::visit(
        [&](const auto& f) { return extract_volume(f, scene.ground_truth.extent); }, field);
    const PsnrResult p = psnr(recon, scene.ground_truth, 1.0);
    TrainLogRecord rec;
    rec.iteration = iteration;
    rec.loss = loss.total;
    rec.loss_data = loss.data;
    rec.loss_tissue = loss.tissue;
    rec.lambda = lambda;
    rec.psnr_db = p.identical ? std::numeric_limits<double>::infinity() : *p.db;
    rec.ssim = ssim(recon, scene.ground_truth, 1.0);
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.records.push_back(rec);
  };

  for (int t = 0; t < config.total_iterations; ++t) {
    const double lambda = lambda_for(config, t);
    const std::vector<TrainRay> batch =
        sample_batch(scene.sigma_stack, sup_alpha ? &*sup_alpha : nullptr,
                     sup_beta ? &*sup_beta : nullptr, scene.recon_extent,
                     config.batch_rays, &batch_rng);

    LossTerms loss;
    try {
      if (auto* quad = std::get_if<QuadField>(&field)) {
        loss = loss_forward_backward(*quad, batch, config.n_samples, lambda, grads,
                                     nullptr, &workspace);
        adam_step(quad->params, grads, adam);
      } else {
        auto& single = std::get<SingleField>(field);
        const ThresholdSurrogate* sur =
            config.mode == TrainMode::kMlpThreshSup ? &surrogate : nullptr;
        loss = loss_forward_backward(single, batch, config.n_samples, lambda, sur, grads,
                                     nullptr, &workspace);
        adam_step(single.params, grads, adam);
      }
    } catch (const NumericError& e) {
      // parameters are still the last finite state; hand them back
      throw TrainingDiverged(std::string("train: diverged at iteration ") +
                                 std::to_string(t) + ": " + e.what(),
                             field, log, t);
    }

    if ((t + 1) % config.eval_every == 0 || t + 1 == config.total_iterations)
      evaluate(t + 1, loss, lambda);
  }

  return {std::move(field), std::move(log)};
}

}  // namespace tomo
