#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tomo/autodiff.hpp"
#include "tomo/field.hpp"
#include "tomo/projection.hpp"

namespace tomo {

enum class TrainMode { kTnt, kTntConstLambda, kTntNoSup, kMlp, kMlpThreshSup };
enum class SupervisionKind { kTarget, kTargetNoisy };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);
std::string to_string(SupervisionKind kind);
SupervisionKind supervision_from_string(const std::string& s);

bool mode_uses_tissue_supervision(TrainMode mode);
bool mode_uses_quad_field(TrainMode mode);

struct TrainConfig {
  int total_iterations = 10000;
  int batch_rays = 1024;
  int n_samples = 576;
  double lambda0 = 5.0;
  double k = 0.5;
  double lr = 3e-4;
  TrainMode mode = TrainMode::kTnt;
  SupervisionKind supervision = SupervisionKind::kTarget;
  NoiseSpec noise{0.0, 0.0, 0};  // applied to the tissue stacks for target_noisy
  std::uint64_t seed = 1;
  int eval_every = 500;
  double t_alpha = 0.05;
  double t_beta = 0.45;
  double surrogate_temp = 0.02;
  HashGridConfig grid = HashGridConfig::full_preset();

  void validate() const;

  /// CPU-sized setup: 64^3 volume, 64^2 projections, 128 samples, 2000 iters.
  static TrainConfig desk_preset();
  static TrainConfig full_preset();
};

struct TrainLogRecord {
  int iteration = 0;
  double loss = 0.0;
  double loss_data = 0.0;
  double loss_tissue = 0.0;
  double lambda = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRecord> records;
};

// Everything a reconstruction run consumes: measured projections, optional
// clean tissue-target stacks, and the ground truth used for progress metrics.
struct Scene {
  Volume ground_truth;
  ProjectionStack sigma_stack;
  std::optional<ProjectionStack> alpha_stack;
  std::optional<ProjectionStack> beta_stack;
  VolumeExtent recon_extent;
};

struct TrainResult {
  FieldVariant field;
  TrainLog log;
};

/// Divergence abort: carries the last finite state and the log so far.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, FieldVariant last_field, TrainLog log,
                   int at_iteration)
      : NumericError(what), last_field(std::move(last_field)), log(std::move(log)),
        at_iteration(at_iteration) {}

  FieldVariant last_field;
  TrainLog log;
  int at_iteration = 0;
};

/// lambda(t) = max(0, 1 - t/(kT))^2 * lambda0.
double lambda_schedule(int t, int total_iterations, double k, double lambda0);

/// mean |sigma - gt| + lambda * mean[(alpha - sup)^2 + (beta - sup)^2].
double composite_loss(std::span<const RenderedRay> rendered,
                      std::span<const double> gt_sigma, std::span<const double> sup_alpha,
                      std::span<const double> sup_beta, double lambda);

/// B pixels with near-equal per-view allocation; every returned ray intersects
/// the volume (missing pixels are resampled) and arrives clipped to it.
std::vector<TrainRay> sample_batch(const ProjectionStack& sigma_stack,
                                   const ProjectionStack* alpha_stack,
                                   const ProjectionStack* beta_stack,
                                   const VolumeExtent& extent, int batch_rays, Rng* rng);

/// Soft-thresholded accumulations (alpha_hat, beta_hat) of per-sample sigma
/// values; temperature <= 0 selects the hard indicator.
std::pair<double, double> accumulate_thresholded(std::span<const double> sigma, double dt,
                                                 double t_alpha, double t_beta,
                                                 double temperature);

/// Differentiable tissue accumulations for the single-output baseline.
std::pair<double, double> surrogate_threshold_render(const SingleField& field,
                                                     const Ray& ray, int n_samples,
                                                     double t_alpha, double t_beta,
                                                     double temperature);

/// Hard-threshold counterpart, for evaluation-only rendering.
std::pair<double, double> hard_threshold_render(const SingleField& field, const Ray& ray,
                                                int n_samples, double t_alpha,
                                                double t_beta);

TrainResult train(const Scene& scene, const TrainConfig& config);

}  // namespace tomo
