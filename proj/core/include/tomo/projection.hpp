#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tomo/geometry.hpp"
#include "tomo/volume.hpp"

namespace tomo {

enum class StackKind { kSigma, kAlpha, kBeta };

std::string to_string(StackKind kind);
StackKind stack_kind_from_string(const std::string& s);

// Per-view detector images in line-integral units (attenuation x length).
struct ProjectionStack {
  ScannerGeometry geom;
  StackKind kind = StackKind::kSigma;
  std::vector<float> data;  // [view][row][col], col fastest

  ProjectionStack() = default;
  ProjectionStack(const ScannerGeometry& g, StackKind k)
      : geom(g), kind(k),
        data(static_cast<std::size_t>(g.n_views()) * g.det_rows * g.det_cols, 0.0f) {}

  std::size_t index(int view, int row, int col) const {
    return (static_cast<std::size_t>(view) * geom.det_rows + row) * geom.det_cols + col;
  }
  float at(int view, int row, int col) const { return data[index(view, row, col)]; }
  float& at(int view, int row, int col) { return data[index(view, row, col)]; }

  float mean_value() const;
  void validate() const;
};

struct NoiseSpec {
  double gaussian_sigma = 0.0;
  double smooth_gain_amp = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Trilinear interpolation between voxel centers; 0 outside the extent,
/// constant continuation within the half-voxel boundary shell.
double trilinear_sample(const Volume& vol, const Vec3& p);

/// Midpoint-quadrature line integrals of the volume for every detector pixel.
ProjectionStack project_volume(const Volume& vol, const ScannerGeometry& geom,
                               int n_samples);

/// project_volume applied to both binary masks.
std::pair<ProjectionStack, ProjectionStack> project_masks(const TissueMasks& masks,
                                                          const ScannerGeometry& geom,
                                                          int n_samples);

/// Lambert-Beer: I = I0 * exp(-line_integral).
double to_intensity(double log_value, double i0);
/// Inverse: ln(I0) - ln(I). Requires 0 < i.
double from_intensity(double intensity, double i0);

/// value' = max(0, value * (1 + gain(u,v)) + gauss(u,v)); gain is a smooth
/// per-view cosine field of amplitude smooth_gain_amp, gauss is i.i.d. noise.
ProjectionStack perturb_projections(const ProjectionStack& stack, const NoiseSpec& spec);

}  // namespace tomo
