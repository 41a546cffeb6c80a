#include "tomo/projection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tomo/rng.hpp"

namespace tomo {

std::string to_string(StackKind kind) {
  switch (kind) {
    case StackKind::kSigma: return "sigma";
    case StackKind::kAlpha: return "alpha";
    case StackKind::kBeta: return "beta";
  }
  return "sigma";
}

StackKind stack_kind_from_string(const std::string& s) {
  if (s == "sigma") return StackKind::kSigma;
  if (s == "alpha") return StackKind::kAlpha;
  if (s == "beta") return StackKind::kBeta;
  throw std::invalid_argument("unknown projection kind: " + s);
}

float ProjectionStack::mean_value() const {
  if (data.empty()) return 0.0f;
  double sum = 0.0;
  for (float v : data) sum += v;
  return static_cast<float>(sum / data.size());
}

void ProjectionStack::validate() const {
  geom.validate();
  const std::size_t expected =
      static_cast<std::size_t>(geom.n_views()) * geom.det_rows * geom.det_cols;
  if (data.size() != expected)
    throw std::invalid_argument("stack: image count does not match geometry");
  for (float v : data)
    if (!std::isfinite(v) || v < 0.0f)
      throw std::invalid_argument("stack: values must be finite and >= 0");
}

void NoiseSpec::validate() const {
  if (gaussian_sigma < 0.0 || smooth_gain_amp < 0.0)
    throw std::invalid_argument("noise: amplitudes must be >= 0");
}

double trilinear_sample(const Volume& vol, const Vec3& p) {
  const VolumeExtent& e = vol.extent;
  if (p.x < e.min_corner.x || p.x > e.max_corner.x || p.y < e.min_corner.y ||
      p.y > e.max_corner.y || p.z < e.min_corner.z || p.z > e.max_corner.z)
    return 0.0;

  const Vec3 vs = e.voxel_size();
  // grid coordinates of voxel centers
  double gx = (p.x - e.min_corner.x) / vs.x - 0.5;
  double gy = (p.y - e.min_corner.y) / vs.y - 0.5;
  double gz = (p.z - e.min_corner.z) / vs.z - 0.5;
  gx = std::clamp(gx, 0.0, static_cast<double>(e.nx - 1));
  gy = std::clamp(gy, 0.0, static_cast<double>(e.ny - 1));
  gz = std::clamp(gz, 0.0, static_cast<double>(e.nz - 1));

  const int x0 = std::min(static_cast<int>(gx), e.nx - 1);
  const int y0 = std::min(static_cast<int>(gy), e.ny - 1);
  const int z0 = std::min(static_cast<int>(gz), e.nz - 1);
  const int x1 = std::min(x0 + 1, e.nx - 1);
  const int y1 = std::min(y0 + 1, e.ny - 1);
  const int z1 = std::min(z0 + 1, e.nz - 1);
  const double fx = gx - x0;
  const double fy = gy - y0;
  const double fz = gz - z0;

  const double c00 = vol.at(x0, y0, z0) * (1 - fx) + vol.at(x1, y0, z0) * fx;
  const double c10 = vol.at(x0, y1, z0) * (1 - fx) + vol.at(x1, y1, z0) * fx;
  const double c01 = vol.at(x0, y0, z1) * (1 - fx) + vol.at(x1, y0, z1) * fx;
  const double c11 = vol.at(x0, y1, z1) * (1 - fx) + vol.at(x1, y1, z1) * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return c0 * (1 - fz) + c1 * fz;
}

ProjectionStack project_volume(const Volume& vol, const ScannerGeometry& geom,
                               int n_samples) {
  if (n_samples < 1) throw std::invalid_argument("project_volume: n_samples must be >= 1");
  geom.validate();
  ProjectionStack stack(geom, StackKind::kSigma);

  for (int view = 0; view < geom.n_views(); ++view) {
    for (int row = 0; row < geom.det_rows; ++row) {
      for (int col = 0; col < geom.det_cols; ++col) {
        Ray ray = ray_for_pixel(geom, view, row, col);
        const auto hit = intersect_aabb(ray, vol.extent);
        if (!hit) continue;
        const double t0 = hit->first;
        const double dt = (hit->second - hit->first) / n_samples;
        double acc = 0.0;
        for (int i = 0; i < n_samples; ++i) {
          const double t = t0 + (i + 0.5) * dt;
          acc += trilinear_sample(vol, ray.at(t));
        }
        stack.at(view, row, col) = static_cast<float>(acc * dt);
      }
    }
  }
  return stack;
}

std::pair<ProjectionStack, ProjectionStack> project_masks(const TissueMasks& masks,
                                                          const ScannerGeometry& geom,
                                                          int n_samples) {
  ProjectionStack alpha = project_volume(masks.alpha, geom, n_samples);
  ProjectionStack beta = project_volume(masks.beta, geom, n_samples);
  alpha.kind = StackKind::kAlpha;
  beta.kind = StackKind::kBeta;
  return {std::move(alpha), std::move(beta)};
}

double to_intensity(double log_value, double i0) {
  if (!(i0 > 0.0)) throw std::invalid_argument("to_intensity: i0 must be positive");
  return i0 * std::exp(-log_value);
}

double from_intensity(double intensity, double i0) {
  if (!(i0 > 0.0)) throw std::invalid_argument("from_intensity: i0 must be positive");
  if (!(intensity > 0.0))
    throw std::invalid_argument("from_intensity: intensity must be positive");
  return std::log(i0) - std::log(intensity);
}

namespace {

// Smooth per-view gain field: low-order 2D cosine series scaled to [-1, 1].
struct GainField {
  struct Term {
    int hu, hv;
    double amplitude, phase;
  };
  std::vector<Term> terms;
  double inv_weight = 0.0;

  GainField(Rng* rng, int n_terms) {
    double weight_sum = 0.0;
    for (int i = 0; i < n_terms; ++i) {
      Term t;
      do {
        t.hu = static_cast<int>(rng->below(4));
        t.hv = static_cast<int>(rng->below(4));
      } while (t.hu == 0 && t.hv == 0);
      t.amplitude = rng->uniform(0.3, 1.0);
      t.phase = rng->uniform(0.0, 2.0 * M_PI);
      weight_sum += t.amplitude;
      terms.push_back(t);
    }
    inv_weight = 1.0 / weight_sum;
  }

  double operator()(double u, double v) const {
    double s = 0.0;
    for (const Term& t : terms)
      s += t.amplitude * std::cos(M_PI * (t.hu * u + t.hv * v) + t.phase);
    return s * inv_weight;
  }
};

}  // namespace

ProjectionStack perturb_projections(const ProjectionStack& stack, const NoiseSpec& spec) {
  spec.validate();
  ProjectionStack out = stack;
  if (spec.gaussian_sigma == 0.0 && spec.smooth_gain_amp == 0.0) return out;

  Rng rng(spec.seed);
  const int rows = stack.geom.det_rows;
  const int cols = stack.geom.det_cols;
  for (int view = 0; view < stack.geom.n_views(); ++view) {
    const GainField gain(&rng, 4);
    for (int row = 0; row < rows; ++row) {
      const double v = rows > 1 ? static_cast<double>(row) / (rows - 1) : 0.5;
      for (int col = 0; col < cols; ++col) {
        const double u = cols > 1 ? static_cast<double>(col) / (cols - 1) : 0.5;
        const double g = spec.smooth_gain_amp * gain(u, v);
        const double n = spec.gaussian_sigma * rng.normal();
        const double value = stack.at(view, row, col) * (1.0 + g) + n;
        out.at(view, row, col) = static_cast<float>(std::max(0.0, value));
      }
    }
  }
  return out;
}

}  // namespace tomo
