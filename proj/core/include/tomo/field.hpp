#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tomo/hash_grid.hpp"
#include "tomo/volume.hpp"

namespace tomo {

struct ParamSegment {
  std::string name;
  std::int64_t offset = 0;
  std::int64_t size = 0;
};

// Flat parameter vector with named segments; the unit the optimizer works on.
struct ParamLayout {
  std::vector<ParamSegment> segments;
  std::int64_t total = 0;

  void add(const std::string& name, std::int64_t size) {
    segments.push_back({name, total, size});
    total += size;
  }
  const ParamSegment& segment(const std::string& name) const;
};

// Fully connected net with two ReLU hidden layers and one output unit.
// Parameter block order: W1 | b1 | W2 | b2 | w3 | b3 (W row-major, input x hidden).
struct MlpDims {
  int input = 0;
  int hidden = 0;

  std::int64_t param_count() const {
    const std::int64_t in = input, h = hidden;
    return in * h + h + h * h + h + h + 1;
  }
};

inline double sigmoid(double z) {
  // saturates exactly to 0/1 instead of overflowing
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Quadruple field: two small shape MLPs (alpha, beta) and two affine value
// maps (vb, vs), each fed by its own 1-feature-per-level stream of a shared
// hash grid; sigma composes them with a learned floor epsilon.
struct QuadField {
  HashGridConfig grid_config;
  VolumeExtent domain;  // world box mapped to [0,1]^3 for encoding
  MlpDims shape_mlp{0, 32};
  ParamLayout layout;  // tables, alpha_mlp, beta_mlp, vb_map, vs_map, rho
  std::vector<double> params;

  static QuadField create(const HashGridConfig& grid_config, const VolumeExtent& domain,
                          std::uint64_t seed);

  std::span<const double> segment_view(const std::string& name) const;
  std::span<double> segment_view(const std::string& name);

  /// epsilon = 0.05 * sigmoid(rho): positive, bounded below 0.05.
  double epsilon() const;

  Vec3 normalize(const Vec3& world) const {
    const Vec3 s = domain.size();
    return {(world.x - domain.min_corner.x) / s.x, (world.y - domain.min_corner.y) / s.y,
            (world.z - domain.min_corner.z) / s.z};
  }
};

// Single-output baseline: same hash grid, undivided 4L-wide feature, one MLP
// sized so the total parameter count matches the quadruple field within 2%.
struct SingleField {
  HashGridConfig grid_config;
  VolumeExtent domain;
  MlpDims mlp;
  ParamLayout layout;  // tables, mlp
  std::vector<double> params;

  static SingleField create(const HashGridConfig& grid_config, const VolumeExtent& domain,
                            std::uint64_t seed);

  std::span<const double> segment_view(const std::string& name) const;
  std::span<double> segment_view(const std::string& name);

  Vec3 normalize(const Vec3& world) const {
    const Vec3 s = domain.size();
    return {(world.x - domain.min_corner.x) / s.x, (world.y - domain.min_corner.y) / s.y,
            (world.z - domain.min_corner.z) / s.z};
  }
};

using FieldVariant = std::variant<QuadField, SingleField>;

struct FieldComponents {
  double alpha = 0.0;
  double beta = 0.0;
  double vb = 0.0;
  double vs = 0.0;
};

struct RenderedRay {
  double sigma_acc = 0.0;
  double alpha_acc = 0.0;
  double beta_acc = 0.0;
};

/// Branch outputs at a normalized coordinate, each in (0,1).
FieldComponents eval_components(const QuadField& field, const Vec3& x_normalized);

/// Baseline output sigma in (0,1) at a normalized coordinate.
double eval_sigma(const SingleField& field, const Vec3& x_normalized);

/// sigma = (alpha + eps) * (beta * vb + vs).
inline double compose_sigma(double alpha, double beta, double vb, double vs, double eps) {
  return (alpha + eps) * (beta * vb + vs);
}

/// Midpoint accumulation of sigma/alpha/beta along the ray clipped to the
/// field domain; all zero when the ray misses it.
RenderedRay render_ray(const QuadField& field, const Ray& ray, int n_samples);
RenderedRay render_ray(const SingleField& field, const Ray& ray, int n_samples);

struct FieldVolumes {
  Volume sigma;
  Volume alpha;
  Volume beta;
  Volume vb;
  Volume vs;
};

Volume extract_volume(const QuadField& field, const VolumeExtent& extent);
Volume extract_volume(const SingleField& field, const VolumeExtent& extent);
FieldVolumes extract_components(const QuadField& field, const VolumeExtent& extent);

std::int64_t param_count(const QuadField& field);
std::int64_t param_count(const SingleField& field);

/// Hidden width whose single-MLP parameter count comes closest to the
/// quadruple field's non-table parameters (same grid assumed on both sides).
int matched_single_hidden_width(const HashGridConfig& grid_config);

}  // namespace tomo
