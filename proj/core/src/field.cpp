#include "tomo/field.hpp"

#include <cmath>
#include <stdexcept>

#include "field_kernels.hpp"
#include "tomo/rng.hpp"

namespace tomo {

namespace {

// Attenuation values concentrate in the lower part of [0,1], so value-style
// outputs start near 0.3 instead of 0.5; shape outputs start at 0.5.
const double kValueOutputBias = std::log(0.3 / 0.7);

// Weights Xavier-uniform, hidden biases zero.
void init_mlp(Rng* rng, std::span<double> segment, const MlpDims& dims,
              double output_bias) {
  double* ptr = segment.data();
  const auto fill = [&](std::int64_t count, int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::int64_t i = 0; i < count; ++i) *ptr++ = rng->uniform(-bound, bound);
  };
  const auto zeros = [&](std::int64_t count) {
    for (std::int64_t i = 0; i < count; ++i) *ptr++ = 0.0;
  };
  fill(std::int64_t(dims.input) * dims.hidden, dims.input, dims.hidden);
  zeros(dims.hidden);
  fill(std::int64_t(dims.hidden) * dims.hidden, dims.hidden, dims.hidden);
  zeros(dims.hidden);
  fill(dims.hidden, dims.hidden, 1);
  *ptr++ = output_bias;
}

void init_affine(Rng* rng, std::span<double> segment, int input, double output_bias) {
  const double bound = std::sqrt(6.0 / (input + 1));
  for (int i = 0; i < input; ++i) segment[i] = rng->uniform(-bound, bound);
  segment[input] = output_bias;
}

void init_tables(Rng* rng, std::span<double> segment) {
  for (double& v : segment) v = rng->uniform(-1e-4, 1e-4);
}

// epsilon(rho_init) = 0.05 * sigmoid(rho_init) = 1e-3
const double kRhoInit = std::log(0.02 / 0.98);

std::span<const double> view(const std::vector<double>& params, const ParamSegment& seg) {
  return {params.data() + seg.offset, static_cast<std::size_t>(seg.size)};
}
std::span<double> view(std::vector<double>& params, const ParamSegment& seg) {
  return {params.data() + seg.offset, static_cast<std::size_t>(seg.size)};
}

}  // namespace

const ParamSegment& ParamLayout::segment(const std::string& name) const {
  for (const ParamSegment& s : segments)
    if (s.name == name) return s;
  throw std::invalid_argument("unknown parameter segment: " + name);
}

QuadField QuadField::create(const HashGridConfig& grid_config, const VolumeExtent& domain,
                            std::uint64_t seed) {
  grid_config.validate();
  domain.validate();

  QuadField f;
  f.grid_config = grid_config;
  f.domain = domain;
  f.shape_mlp = MlpDims{grid_config.levels, 32};

  f.layout.add("tables", grid_config.total_entries() * HashGridConfig::kFeaturesPerLevel);
  f.layout.add("alpha_mlp", f.shape_mlp.param_count());
  f.layout.add("beta_mlp", f.shape_mlp.param_count());
  f.layout.add("vb_map", grid_config.levels + 1);
  f.layout.add("vs_map", grid_config.levels + 1);
  f.layout.add("rho", 1);
  f.params.assign(f.layout.total, 0.0);

  Rng rng(seed);
  init_tables(&rng, f.segment_view("tables"));
  init_mlp(&rng, f.segment_view("alpha_mlp"), f.shape_mlp, 0.0);
  init_mlp(&rng, f.segment_view("beta_mlp"), f.shape_mlp, 0.0);
  init_affine(&rng, f.segment_view("vb_map"), grid_config.levels, kValueOutputBias);
  init_affine(&rng, f.segment_view("vs_map"), grid_config.levels, kValueOutputBias);
  f.segment_view("rho")[0] = kRhoInit;
  return f;
}

std::span<const double> QuadField::segment_view(const std::string& name) const {
  return view(params, layout.segment(name));
}
std::span<double> QuadField::segment_view(const std::string& name) {
  return view(params, layout.segment(name));
}

double QuadField::epsilon() const { return 0.05 * sigmoid(params[layout.segment("rho").offset]); }

int matched_single_hidden_width(const HashGridConfig& grid_config) {
  const int levels = grid_config.levels;
  const std::int64_t quad_nontable = 2 * MlpDims{levels, 32}.param_count() +
                                     2 * (levels + 1) + 1;
  int best_width = 8;
  std::int64_t best_diff = std::numeric_limits<std::int64_t>::max();
  for (int w = 8; w <= 512; ++w) {
    const std::int64_t diff =
        std::llabs(MlpDims{levels * 4, w}.param_count() - quad_nontable);
    if (diff < best_diff) {
      best_diff = diff;
      best_width = w;
    }
  }
  return best_width;
}

SingleField SingleField::create(const HashGridConfig& grid_config,
                                const VolumeExtent& domain, std::uint64_t seed) {
  grid_config.validate();
  domain.validate();

  SingleField f;
  f.grid_config = grid_config;
  f.domain = domain;
  f.mlp = MlpDims{grid_config.levels * 4, matched_single_hidden_width(grid_config)};

  f.layout.add("tables", grid_config.total_entries() * HashGridConfig::kFeaturesPerLevel);
  f.layout.add("mlp", f.mlp.param_count());
  f.params.assign(f.layout.total, 0.0);

  Rng rng(seed);
  init_tables(&rng, f.segment_view("tables"));
  init_mlp(&rng, f.segment_view("mlp"), f.mlp, kValueOutputBias);

  // parameter budget must match the quadruple build within 2%
  const QuadField reference = QuadField::create(grid_config, domain, seed);
  const double rel = std::abs(static_cast<double>(f.layout.total - reference.layout.total)) /
                     static_cast<double>(reference.layout.total);
  if (rel > 0.02)
    throw std::logic_error("single field: parameter count differs from quad by > 2%");
  return f;
}

std::span<const double> SingleField::segment_view(const std::string& name) const {
  return view(params, layout.segment(name));
}
std::span<double> SingleField::segment_view(const std::string& name) {
  return view(params, layout.segment(name));
}

namespace {

void check_finite(const detail::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string("non-finite ") + what);
}

}  // namespace

FieldComponents eval_components(const QuadField& field, const Vec3& x) {
  detail::QuadForward fwd;
  const Vec3 pts[1] = {x};
  fwd.run(field, pts);
  check_finite(fwd.sigma, "field components");
  return {fwd.alpha[0], fwd.beta[0], fwd.vb[0], fwd.vs[0]};
}

double eval_sigma(const SingleField& field, const Vec3& x) {
  detail::SingleForward fwd;
  const Vec3 pts[1] = {x};
  fwd.run(field, pts);
  check_finite(fwd.sigma, "field output");
  return fwd.sigma[0];
}

namespace {

// Normalized midpoint samples of the ray clipped to the domain.
bool clipped_samples(const VolumeExtent& domain, const Ray& ray, int n_samples,
                     std::vector<Vec3>& pts, double& dt,
                     const auto& normalize) {
  const auto hit = intersect_aabb(ray, domain);
  if (!hit) return false;
  dt = (hit->second - hit->first) / n_samples;
  pts.resize(n_samples);
  for (int i = 0; i < n_samples; ++i)
    pts[i] = normalize(ray.at(hit->first + (i + 0.5) * dt));
  return true;
}

}  // namespace

RenderedRay render_ray(const QuadField& field, const Ray& ray, int n_samples) {
  if (n_samples < 1) throw std::invalid_argument("render_ray: n_samples must be >= 1");
  std::vector<Vec3> pts;
  double dt = 0.0;
  if (!clipped_samples(field.domain, ray, n_samples, pts, dt,
                       [&](const Vec3& p) { return field.normalize(p); }))
    return {};
  detail::QuadForward fwd;
  fwd.run(field, pts);
  check_finite(fwd.sigma, "rendered ray");
  return {fwd.sigma.sum() * dt, fwd.alpha.sum() * dt, fwd.beta.sum() * dt};
}

RenderedRay render_ray(const SingleField& field, const Ray& ray, int n_samples) {
  if (n_samples < 1) throw std::invalid_argument("render_ray: n_samples must be >= 1");
  std::vector<Vec3> pts;
  double dt = 0.0;
  if (!clipped_samples(field.domain, ray, n_samples, pts, dt,
                       [&](const Vec3& p) { return field.normalize(p); }))
    return {};
  detail::SingleForward fwd;
  fwd.run(field, pts);
  check_finite(fwd.sigma, "rendered ray");
  return {fwd.sigma.sum() * dt, 0.0, 0.0};
}

namespace {

constexpr int kExtractChunk = 16384;

template <typename EvalChunk>
void for_voxel_chunks(const VolumeExtent& extent, const EvalChunk& eval_chunk) {
  std::vector<Vec3> pts;
  std::vector<std::size_t> indices;
  pts.reserve(kExtractChunk);
  indices.reserve(kExtractChunk);
  std::size_t flat = 0;
  for (int iz = 0; iz < extent.nz; ++iz)
    for (int iy = 0; iy < extent.ny; ++iy)
      for (int ix = 0; ix < extent.nx; ++ix, ++flat) {
        pts.push_back(extent.voxel_center(ix, iy, iz));
        indices.push_back(flat);
        if (pts.size() == kExtractChunk) {
          eval_chunk(pts, indices);
          pts.clear();
          indices.clear();
        }
      }
  if (!pts.empty()) eval_chunk(pts, indices);
}

}  // namespace

FieldVolumes extract_components(const QuadField& field, const VolumeExtent& extent) {
  extent.validate();
  FieldVolumes out{Volume(extent), Volume(extent), Volume(extent), Volume(extent),
                   Volume(extent)};
  detail::QuadForward fwd;
  std::vector<Vec3> normalized;
  for_voxel_chunks(extent, [&](const std::vector<Vec3>& pts,
                               const std::vector<std::size_t>& indices) {
    normalized.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) normalized[i] = field.normalize(pts[i]);
    fwd.run(field, normalized);
    check_finite(fwd.sigma, "extracted volume");
    for (std::size_t i = 0; i < indices.size(); ++i) {
      out.sigma.data[indices[i]] = static_cast<float>(fwd.sigma[i]);
      out.alpha.data[indices[i]] = static_cast<float>(fwd.alpha[i]);
      out.beta.data[indices[i]] = static_cast<float>(fwd.beta[i]);
      out.vb.data[indices[i]] = static_cast<float>(fwd.vb[i]);
      out.vs.data[indices[i]] = static_cast<float>(fwd.vs[i]);
    }
  });
  return out;
}

Volume extract_volume(const QuadField& field, const VolumeExtent& extent) {
  extent.validate();
  Volume out(extent);
  detail::QuadForward fwd;
  std::vector<Vec3> normalized;
  for_voxel_chunks(extent, [&](const std::vector<Vec3>& pts,
                               const std::vector<std::size_t>& indices) {
    normalized.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) normalized[i] = field.normalize(pts[i]);
    fwd.run(field, normalized);
    check_finite(fwd.sigma, "extracted volume");
    for (std::size_t i = 0; i < indices.size(); ++i)
      out.data[indices[i]] = static_cast<float>(fwd.sigma[i]);
  });
  return out;
}

Volume extract_volume(const SingleField& field, const VolumeExtent& extent) {
  extent.validate();
  Volume out(extent);
  detail::SingleForward fwd;
  std::vector<Vec3> normalized;
  for_voxel_chunks(extent, [&](const std::vector<Vec3>& pts,
                               const std::vector<std::size_t>& indices) {
    normalized.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) normalized[i] = field.normalize(pts[i]);
    fwd.run(field, normalized);
    check_finite(fwd.sigma, "extracted volume");
    for (std::size_t i = 0; i < indices.size(); ++i)
      out.data[indices[i]] = static_cast<float>(fwd.sigma[i]);
  });
  return out;
}

std::int64_t param_count(const QuadField& field) { return field.layout.total; }
std::int64_t param_count(const SingleField& field) { return field.layout.total; }

}  // namespace tomo
