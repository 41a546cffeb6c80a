#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "tomo/types.hpp"

namespace tomo {

// Multiresolution hash-grid encoding with a fixed 4-wide feature per level.
// Component k of every level feeds field branch k, so one table behaves like
// four independent 1-feature encodings.
struct HashGridConfig {
  int levels = 8;
  int table_size_log2 = 17;
  int n_min = 8;
  double growth = 1.0;  // > 1
  static constexpr int kFeaturesPerLevel = 4;

  void validate() const;

  /// N_l = floor(n_min * growth^l).
  std::vector<int> resolutions() const;
  /// Entries at level l: (N_l+1)^3 when that fits in 2^H (dense, collision
  /// free), otherwise 2^H (hashed).
  std::vector<std::int64_t> level_entries() const;
  std::int64_t total_entries() const;

  /// growth such that the last level lands exactly on n_max.
  static HashGridConfig with_max_resolution(int levels, int table_size_log2, int n_min,
                                            int n_max);
  static HashGridConfig desk_preset() { return with_max_resolution(8, 17, 8, 64); }
  static HashGridConfig full_preset() { return with_max_resolution(16, 19, 8, 256); }
};

struct HashGrid {
  HashGridConfig config;
  std::vector<double> tables;  // level-major, 4 features per entry

  static HashGrid create(const HashGridConfig& config, std::uint64_t seed);
};

/// Table entry index for integer vertex coords at a level: dense row-major
/// when the level fits, spatial hash modulo 2^H otherwise.
std::int64_t cell_index(int level, const std::array<int, 3>& coords,
                        const HashGridConfig& config);

/// Per-level trilinear corner stencil of a normalized point.
struct LevelStencil {
  std::array<std::int64_t, 8> entry;  // index within the level's table
  std::array<double, 8> weight;
};

LevelStencil level_stencil(double x, double y, double z, int level, int resolution,
                           const HashGridConfig& config);

/// Features of x in [0,1]^3 (clamped): per level the trilinear blend of the 8
/// enclosing cell corners, concatenated level-major.
std::vector<double> encode(const HashGrid& grid, const Vec3& x);

/// Stream k collects component k of every level. Order: alpha, beta, vb, vs.
std::array<std::vector<double>, 4> split_features(std::span<const double> feat);

/// Scatter of the upstream feature gradient onto the corner table entries.
/// grad_tables must have the same length as grid.tables.
void encode_backward(const HashGrid& grid, const Vec3& x,
                     std::span<const double> upstream, std::span<double> grad_tables);

}  // namespace tomo
