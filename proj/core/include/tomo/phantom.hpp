#pragma once

#include <cstdint>
#include <utility>

#include "tomo/volume.hpp"

namespace tomo {

struct PhantomSpec {
  std::uint64_t seed = 7;
  int size = 64;         // voxels per axis
  int n_teeth = 10;
  int n_sinuses = 3;
  double soft_level = 0.25;
  double hard_level = 0.85;

  void validate() const;
};

// Default segmentation thresholds; chosen mid-gap between the soft and hard
// intensity bands of the generated phantoms.
inline constexpr double kDefaultAlphaThreshold = 0.05;
inline constexpr double kDefaultBetaThreshold = 0.45;

/// Deterministic head-like phantom: soft ellipsoid, skull shell, jaw arc with
/// tooth prisms, air sinuses. Returned masks are the construction-time region
/// indicators (material placed / hard material placed).
std::pair<Volume, TissueMasks> generate_head_phantom(const PhantomSpec& spec);

/// alpha = [value >= t_alpha], beta = [value >= t_beta]; requires t_alpha < t_beta.
TissueMasks threshold_masks(const Volume& vol, double t_alpha, double t_beta);

/// Writes n non-overlapping spheres of the given intensity into soft-tissue
/// regions (inside alpha, outside beta) and updates the masks consistently.
std::pair<Volume, TissueMasks> add_foreign_bodies(const Volume& vol,
                                                  const TissueMasks& masks, int n,
                                                  double radius, double value,
                                                  std::uint64_t seed,
                                                  double t_beta = kDefaultBetaThreshold);

/// value' = min(value, cap) voxelwise.
Volume clip_hard_tissue(const Volume& vol, double cap);

}  // namespace tomo
