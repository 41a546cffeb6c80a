#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "tomo/rng.hpp"
#include "tomo/types.hpp"

namespace tomo {

// Cone-beam acquisition: point source and flat detector rotating about the
// z axis on a circle of radius `sad`. The detector plane is orthogonal to the
// source->axis line at distance `sdd` from the source; its u axis lies in the
// rotation plane, its v axis along the rotation axis.
struct ScannerGeometry {
  double sad = 2.0;             // source to rotation axis
  double sdd = 4.0;             // source to detector plane
  int det_rows = 64;            // M
  int det_cols = 64;            // N
  double det_pixel_pitch = 3.0 / 64.0;
  std::vector<double> angles_deg;

  void validate() const;
  int n_views() const { return static_cast<int>(angles_deg.size()); }
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
  double t_near = 0.0;
  double t_far = 0.0;

  Vec3 at(double t) const { return origin + direction * t; }
};

struct VolumeExtent {
  Vec3 min_corner{-0.5, -0.5, -0.5};
  Vec3 max_corner{0.5, 0.5, 0.5};
  int nx = 1;
  int ny = 1;
  int nz = 1;

  void validate() const;
  Vec3 size() const { return max_corner - min_corner; }
  Vec3 voxel_size() const {
    const Vec3 s = size();
    return {s.x / nx, s.y / ny, s.z / nz};
  }
  Vec3 voxel_center(int ix, int iy, int iz) const {
    const Vec3 vs = voxel_size();
    return {min_corner.x + (ix + 0.5) * vs.x, min_corner.y + (iy + 0.5) * vs.y,
            min_corner.z + (iz + 0.5) * vs.z};
  }
  std::size_t n_voxels() const {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
};

/// n_views equally spaced angles covering [0, range_deg), starting at 0.
std::vector<double> make_circular_trajectory(int n_views, double range_deg);

Vec3 source_position(const ScannerGeometry& geom, int view_index);

/// Ray from the view's source through the center of detector pixel (row, col).
/// t spans [0, distance to the pixel]; callers clip against the volume.
Ray ray_for_pixel(const ScannerGeometry& geom, int view_index, int row, int col);

/// Parametric interval of the ray inside the box, clipped to the ray's own
/// interval. Empty or near-degenerate (< 1e-9) intersections yield nullopt.
std::optional<std::pair<double, double>> intersect_aabb(const Ray& ray,
                                                        const VolumeExtent& extent);

struct RaySample {
  Vec3 point;
  double t;
  double dt;
};

/// Midpoints of n equal sub-intervals of [t_near, t_far]; with jitter each
/// sample is displaced uniformly within its own sub-interval (stratified).
std::vector<RaySample> sample_points(const Ray& ray, int n_samples, bool jitter,
                                     Rng* rng);

}  // namespace tomo
