#include "tomo/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "tomo/rng.hpp"

namespace tomo {

void SartConfig::validate() const {
  if (n_iterations < 0) throw std::invalid_argument("sart: iterations must be >= 0");
  if (!(relaxation > 0.0 && relaxation < 2.0))
    throw std::invalid_argument("sart: relaxation must be in (0, 2)");
  if (n_samples < 0) throw std::invalid_argument("sart: n_samples must be >= 0");
}

std::string to_string(FdkFilter filter) {
  return filter == FdkFilter::kRamp ? "ramp" : "ramp_hann";
}

FdkFilter fdk_filter_from_string(const std::string& s) {
  if (s == "ramp") return FdkFilter::kRamp;
  if (s == "ramp_hann") return FdkFilter::kRampHann;
  throw std::invalid_argument("unknown fdk filter: " + s);
}

namespace {

struct ViewFrame {
  Vec3 source;
  double cos_a, sin_a;
};

ViewFrame view_frame(const ScannerGeometry& geom, int view) {
  const double a = geom.angles_deg[view] * M_PI / 180.0;
  return {{geom.sad * std::cos(a), geom.sad * std::sin(a), 0.0}, std::cos(a), std::sin(a)};
}

// Distance from the source plane along the central axis, and detector-plane
// coordinates of the voxel's projection.
struct DetectorHit {
  double depth;  // (P - S) . central_axis
  double u, v;
};

DetectorHit project_point(const ViewFrame& f, double sdd, const Vec3& p) {
  const double depth = f.source.dot(Vec3{f.cos_a, f.sin_a, 0.0}) -
                       (p.x * f.cos_a + p.y * f.sin_a);
  const double eta = -p.x * f.sin_a + p.y * f.cos_a;  // along the u axis
  return {depth, sdd * eta / depth, sdd * p.z / depth};
}

double bilinear_image(const float* img, int rows, int cols, double row_f, double col_f) {
  if (row_f < 0.0 || row_f > rows - 1 || col_f < 0.0 || col_f > cols - 1) return 0.0;
  const int r0 = std::min(static_cast<int>(row_f), rows - 1);
  const int c0 = std::min(static_cast<int>(col_f), cols - 1);
  const int r1 = std::min(r0 + 1, rows - 1);
  const int c1 = std::min(c0 + 1, cols - 1);
  const double fr = row_f - r0;
  const double fc = col_f - c0;
  const double top = img[r0 * cols + c0] * (1 - fc) + img[r0 * cols + c1] * fc;
  const double bot = img[r1 * cols + c0] * (1 - fc) + img[r1 * cols + c1] * fc;
  return top * (1 - fr) + bot * fr;
}

int auto_samples(const VolumeExtent& extent) {
  return 2 * std::max({extent.nx, extent.ny, extent.nz});
}

}  // namespace

Volume sart(const ProjectionStack& stack, const VolumeExtent& extent,
            const SartConfig& config, std::vector<double>* sweep_residuals) {
  config.validate();
  stack.validate();
  extent.validate();
  const ScannerGeometry& geom = stack.geom;
  if (geom.n_views() < 1) throw std::invalid_argument("sart: needs at least one view");

  const int n_samples = config.n_samples > 0 ? config.n_samples : auto_samples(extent);
  const int rows = geom.det_rows, cols = geom.det_cols;
  Volume vol(extent);

  // Per-view ray cache: clipped interval per pixel (chord is the row sum of
  // the continuous system model).
  struct PixelRay {
    Ray ray;
    double chord = 0.0;
  };
  std::vector<std::vector<PixelRay>> rays(geom.n_views());
  for (int view = 0; view < geom.n_views(); ++view) {
    rays[view].resize(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        PixelRay pr;
        pr.ray = ray_for_pixel(geom, view, r, c);
        if (const auto hit = intersect_aabb(pr.ray, extent)) {
          pr.ray.t_near = hit->first;
          pr.ray.t_far = hit->second;
          pr.chord = hit->second - hit->first;
        }
        rays[view][r * cols + c] = pr;
      }
  }

  std::vector<int> order(geom.n_views());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(config.shuffle_seed);

  const auto forward_pixel = [&](const PixelRay& pr) {
    const double dt = pr.chord / n_samples;
    double acc = 0.0;
    for (int i = 0; i < n_samples; ++i)
      acc += trilinear_sample(vol, pr.ray.at(pr.ray.t_near + (i + 0.5) * dt));
    return acc * dt;
  };

  const auto data_residual_norm = [&]() {
    double sq = 0.0;
    for (int view = 0; view < geom.n_views(); ++view)
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          const PixelRay& pr = rays[view][r * cols + c];
          const double fp = pr.chord > 0.0 ? forward_pixel(pr) : 0.0;
          const double d = stack.at(view, r, c) - fp;
          sq += d * d;
        }
    return std::sqrt(sq);
  };

  std::vector<float> residual(static_cast<std::size_t>(rows) * cols);
  for (int sweep = 0; sweep < config.n_iterations; ++sweep) {
    if (config.view_order == ViewOrder::kShuffled) {
      for (int i = geom.n_views() - 1; i > 0; --i)
        std::swap(order[i], order[shuffle_rng.below(i + 1)]);
    }
    for (int view : order) {
      // forward-project and normalize the residual by the chord length
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          const PixelRay& pr = rays[view][r * cols + c];
          if (pr.chord <= 0.0) {
            residual[r * cols + c] = 0.0f;
            continue;
          }
          residual[r * cols + c] =
              static_cast<float>((stack.at(view, r, c) - forward_pixel(pr)) / pr.chord);
        }

      const ViewFrame frame = view_frame(geom, view);
      for (int iz = 0; iz < extent.nz; ++iz)
        for (int iy = 0; iy < extent.ny; ++iy)
          for (int ix = 0; ix < extent.nx; ++ix) {
            const Vec3 p = extent.voxel_center(ix, iy, iz);
            const DetectorHit hit = project_point(frame, geom.sdd, p);
            if (hit.depth <= 0.0) continue;
            const double row_f = hit.v / geom.det_pixel_pitch + 0.5 * (rows - 1);
            const double col_f = hit.u / geom.det_pixel_pitch + 0.5 * (cols - 1);
            const double upd = bilinear_image(residual.data(), rows, cols, row_f, col_f);
            float& vox = vol.data[vol.index(ix, iy, iz)];
            vox += static_cast<float>(config.relaxation * upd);
            if (config.nonneg_clamp && vox < 0.0f) vox = 0.0f;
          }
    }
    if (sweep_residuals) sweep_residuals->push_back(data_residual_norm());
  }
  return vol;
}

Volume fdk(const ProjectionStack& stack, const VolumeExtent& extent,
           const FdkConfig& config) {
  stack.validate();
  extent.validate();
  const ScannerGeometry& geom = stack.geom;
  const int n_views = geom.n_views();
  if (n_views < 1) throw std::invalid_argument("fdk: needs at least one view");
  const int rows = geom.det_rows, cols = geom.det_cols;

  // Detector rescaled to a virtual panel through the rotation axis.
  const double scale = geom.sad / geom.sdd;
  const double pitch_iso = geom.det_pixel_pitch * scale;

  int n_pad = 1;
  while (n_pad < 2 * cols) n_pad *= 2;

  // |f| ramp in cycles per world unit, with optional Hann rolloff
  std::vector<double> filter(n_pad);
  const double f_nyquist = 1.0 / (2.0 * pitch_iso);
  for (int k = 0; k < n_pad; ++k) {
    const int k_signed = k <= n_pad / 2 ? k : k - n_pad;
    const double f = std::abs(k_signed) / (n_pad * pitch_iso);
    double h = f;
    if (config.filter == FdkFilter::kRampHann)
      h *= 0.5 * (1.0 + std::cos(M_PI * f / f_nyquist));
    filter[k] = h;
  }

  // cosine-weight and row-filter every view
  std::vector<float> filtered(static_cast<std::size_t>(n_views) * rows * cols);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> time(n_pad), freq(n_pad);
  for (int view = 0; view < n_views; ++view) {
    for (int r = 0; r < rows; ++r) {
      const double v_iso = (r - 0.5 * (rows - 1)) * pitch_iso;
      for (int c = 0; c < n_pad; ++c) time[c] = 0.0;
      for (int c = 0; c < cols; ++c) {
        const double u_iso = (c - 0.5 * (cols - 1)) * pitch_iso;
        const double w =
            geom.sad / std::sqrt(geom.sad * geom.sad + u_iso * u_iso + v_iso * v_iso);
        time[c] = stack.at(view, r, c) * w;
      }
      fft.fwd(freq, time);
      for (int k = 0; k < n_pad; ++k) freq[k] *= filter[k];
      fft.inv(time, freq);
      for (int c = 0; c < cols; ++c)
        filtered[(static_cast<std::size_t>(view) * rows + r) * cols + c] =
            static_cast<float>(time[c].real());
    }
  }

  // weighted voxel-driven backprojection scaled by the angular spacing
  const double range_deg =
      n_views > 1 ? (geom.angles_deg[1] - geom.angles_deg[0]) * n_views
                  : 360.0;
  const double d_beta = (range_deg * M_PI / 180.0) / n_views;
  const double short_scan_factor = range_deg >= 270.0 ? 0.5 : 1.0;

  Volume vol(extent);
  for (int view = 0; view < n_views; ++view) {
    const ViewFrame frame = view_frame(geom, view);
    const float* q = filtered.data() + static_cast<std::size_t>(view) * rows * cols;
    for (int iz = 0; iz < extent.nz; ++iz)
      for (int iy = 0; iy < extent.ny; ++iy)
        for (int ix = 0; ix < extent.nx; ++ix) {
          const Vec3 p = extent.voxel_center(ix, iy, iz);
          const double depth = geom.sad - (p.x * frame.cos_a + p.y * frame.sin_a);
          if (depth <= 0.0) continue;
          const double inv_u = geom.sad / depth;
          const double u_iso = (-p.x * frame.sin_a + p.y * frame.cos_a) * inv_u;
          const double v_iso = p.z * inv_u;
          const double row_f = v_iso / pitch_iso + 0.5 * (rows - 1);
          const double col_f = u_iso / pitch_iso + 0.5 * (cols - 1);
          const double val = bilinear_image(q, rows, cols, row_f, col_f);
          vol.data[vol.index(ix, iy, iz)] += static_cast<float>(
              short_scan_factor * d_beta * inv_u * inv_u * val);
        }
  }
  if (config.clamp_negative)
    for (float& v : vol.data) v = std::max(v, 0.0f);
  return vol;
}

TrainResult reconstruct_mlp_hash(const Scene& scene, const TrainConfig& config) {
  TrainConfig cfg = config;
  if (mode_uses_quad_field(cfg.mode))
    throw std::invalid_argument("reconstruct_mlp_hash: mode must be mlp or mlp_thresh_sup");
  return train(scene, cfg);
}

}  // namespace tomo
