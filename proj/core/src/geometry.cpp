#include "tomo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tomo {

void ScannerGeometry::validate() const {
  if (!(sdd > sad && sad > 0.0))
    throw std::invalid_argument("geometry: requires sdd > sad > 0");
  if (det_rows < 1 || det_cols < 1)
    throw std::invalid_argument("geometry: detector must be at least 1x1");
  if (!(det_pixel_pitch > 0.0))
    throw std::invalid_argument("geometry: pixel pitch must be positive");
  for (std::size_t i = 0; i < angles_deg.size(); ++i) {
    const double a = angles_deg[i];
    if (a < 0.0 || a >= 360.0)
      throw std::invalid_argument("geometry: angles must lie in [0, 360)");
    if (i > 0 && a <= angles_deg[i - 1])
      throw std::invalid_argument("geometry: angles must be strictly increasing");
  }
}

void VolumeExtent::validate() const {
  if (!(max_corner.x > min_corner.x && max_corner.y > min_corner.y &&
        max_corner.z > min_corner.z))
    throw std::invalid_argument("extent: max corner must exceed min corner");
  if (nx < 1 || ny < 1 || nz < 1)
    throw std::invalid_argument("extent: voxel counts must be >= 1");
}

std::vector<double> make_circular_trajectory(int n_views, double range_deg) {
  if (n_views < 1) throw std::invalid_argument("trajectory: n_views must be >= 1");
  if (!(range_deg > 0.0 && range_deg <= 360.0))
    throw std::invalid_argument("trajectory: range must be in (0, 360]");
  std::vector<double> angles(n_views);
  const double step = range_deg / n_views;  // endpoint excluded
  for (int i = 0; i < n_views; ++i) angles[i] = i * step;
  return angles;
}

Vec3 source_position(const ScannerGeometry& geom, int view_index) {
  const double a = geom.angles_deg.at(view_index) * M_PI / 180.0;
  return {geom.sad * std::cos(a), geom.sad * std::sin(a), 0.0};
}

Ray ray_for_pixel(const ScannerGeometry& geom, int view_index, int row, int col) {
  if (view_index < 0 || view_index >= geom.n_views())
    throw std::invalid_argument("ray_for_pixel: view index out of range");
  if (row < 0 || row >= geom.det_rows || col < 0 || col >= geom.det_cols)
    throw std::invalid_argument("ray_for_pixel: pixel index out of range");

  const double a = geom.angles_deg[view_index] * M_PI / 180.0;
  const Vec3 to_axis{-std::cos(a), -std::sin(a), 0.0};  // source -> rotation axis
  const Vec3 u_axis{-std::sin(a), std::cos(a), 0.0};
  const Vec3 v_axis{0.0, 0.0, 1.0};

  const Vec3 source = source_position(geom, view_index);
  const Vec3 det_center = source + to_axis * geom.sdd;
  const double u = (col - 0.5 * (geom.det_cols - 1)) * geom.det_pixel_pitch;
  const double v = (row - 0.5 * (geom.det_rows - 1)) * geom.det_pixel_pitch;
  const Vec3 pixel = det_center + u_axis * u + v_axis * v;

  const Vec3 diff = pixel - source;
  const double dist = diff.norm();
  Ray ray;
  ray.origin = source;
  ray.direction = diff / dist;
  ray.t_near = 0.0;
  ray.t_far = dist;  // reaches the detector; clipped by intersect_aabb later
  return ray;
}

std::optional<std::pair<double, double>> intersect_aabb(const Ray& ray,
                                                        const VolumeExtent& extent) {
  // Branchless slab method; IEEE inf handles axis-parallel components.
  double t0 = ray.t_near;
  double t1 = ray.t_far;
  for (int axis = 0; axis < 3; ++axis) {
    const double inv = 1.0 / ray.direction[axis];
    double ta = (extent.min_corner[axis] - ray.origin[axis]) * inv;
    double tb = (extent.max_corner[axis] - ray.origin[axis]) * inv;
    if (inv < 0.0) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t1 - t0 >= 1e-9)) return std::nullopt;
  return std::make_pair(t0, t1);
}

std::vector<RaySample> sample_points(const Ray& ray, int n_samples, bool jitter,
                                     Rng* rng) {
  if (n_samples < 1) throw std::invalid_argument("sample_points: n_samples must be >= 1");
  const double span = ray.t_far - ray.t_near;
  if (!(span > 0.0)) return {};
  const double dt = span / n_samples;
  std::vector<RaySample> samples(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const double offset = jitter ? rng->uniform() : 0.5;
    const double t = ray.t_near + (i + offset) * dt;
    samples[i] = {ray.at(t), t, dt};
  }
  return samples;
}

}  // namespace tomo
