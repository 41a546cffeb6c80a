#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "tomo/field.hpp"

namespace tomo {

// One training example. The ray interval is assumed already clipped to the
// field domain (sample_batch guarantees it); an empty interval contributes
// zero renders.
struct TrainRay {
  Ray ray;
  double sigma_gt = 0.0;
  double alpha_sup = 0.0;
  double beta_sup = 0.0;
};

struct LossTerms {
  double total = 0.0;
  double data = 0.0;    // mean |sigma_hat - sigma_gt|
  double tissue = 0.0;  // mean [(alpha_hat - sup)^2 + (beta_hat - sup)^2]

  // Fingerprint of the active smooth piece (ReLU masks, L1 residual signs).
  // Finite-difference checks are only valid between points with equal
  // fingerprints; the loss has kinks elsewhere.
  std::uint64_t smooth_piece = 0;
};

// Differentiable replacement for hard thresholding of the single-output
// field: tau(sigma) ~ sigmoid((sigma - T) / temperature).
struct ThresholdSurrogate {
  double t_alpha = 0.05;
  double t_beta = 0.45;
  double temperature = 0.02;
};

// Reusable scratch buffers; passing the same instance across iterations
// avoids re-allocating the batch-sized activation matrices every step.
class LossWorkspace {
 public:
  LossWorkspace();
  ~LossWorkspace();
  LossWorkspace(LossWorkspace&&) noexcept;
  LossWorkspace& operator=(LossWorkspace&&) noexcept;

  struct Impl;
  Impl& impl() { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

/// Loss of the batch under the composite objective and its exact reverse-mode
/// gradient with respect to every parameter. grads must have layout.total
/// entries; it is overwritten. L1 subgradient at the kink is taken as 0.
/// rendered_out, when given, receives the per-ray accumulations.
LossTerms loss_forward_backward(const QuadField& field, std::span<const TrainRay> batch,
                                int n_samples, double lambda, std::span<double> grads,
                                std::vector<RenderedRay>* rendered_out = nullptr,
                                LossWorkspace* workspace = nullptr);

/// Single-output variant. When `surrogate` is non-null and lambda > 0 the
/// tissue term supervises surrogate-thresholded accumulations of sigma;
/// otherwise only the data term is active.
LossTerms loss_forward_backward(const SingleField& field, std::span<const TrainRay> batch,
                                int n_samples, double lambda,
                                const ThresholdSurrogate* surrogate,
                                std::span<double> grads,
                                std::vector<RenderedRay>* rendered_out = nullptr,
                                LossWorkspace* workspace = nullptr);

}  // namespace tomo
