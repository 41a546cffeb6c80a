#pragma once

#include <cstdint>
#include <string>

#include "tomo/projection.hpp"
#include "tomo/training.hpp"

namespace tomo {

enum class ViewOrder { kSequential, kShuffled };

struct SartConfig {
  int n_iterations = 50;     // full sweeps over all views
  double relaxation = 0.3;   // in (0, 2)
  bool nonneg_clamp = true;
  ViewOrder view_order = ViewOrder::kSequential;
  std::uint64_t shuffle_seed = 0;
  int n_samples = 0;         // forward-projection samples per ray; 0 = 2x max axis

  void validate() const;
};

enum class FdkFilter { kRamp, kRampHann };

std::string to_string(FdkFilter filter);
FdkFilter fdk_filter_from_string(const std::string& s);

struct FdkConfig {
  FdkFilter filter = FdkFilter::kRampHann;
  bool clamp_negative = true;  // ramp undershoot is clipped for valid volumes
};

/// Relaxed iterative residual backprojection (view-by-view sweeps).
/// sweep_residuals, when given, records ||measured - forward||_2 per sweep.
Volume sart(const ProjectionStack& stack, const VolumeExtent& extent,
            const SartConfig& config, std::vector<double>* sweep_residuals = nullptr);

/// Weighted filtered backprojection for the circular cone-beam trajectory.
Volume fdk(const ProjectionStack& stack, const VolumeExtent& extent,
           const FdkConfig& config);

/// Parameter-matched single-output neural baseline; delegates to train().
TrainResult reconstruct_mlp_hash(const Scene& scene, const TrainConfig& config);

}  // namespace tomo
