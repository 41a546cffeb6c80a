#include "tomo/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "field_kernels.hpp"

namespace tomo {

namespace {

using detail::MatrixXd;
using detail::VectorXd;

// Rays are mutually independent under the fixed 1/R loss weights, so the
// batch is processed in ray-aligned tiles whose activations stay cache
// resident through the forward and backward passes.
constexpr int kTileSamples = 4096;

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
  return (h ^ v) * 1099511628211ULL;
}

std::uint64_t relu_mask_fingerprint(std::uint64_t h, const MatrixXd& h1,
                                    const MatrixXd& h2) {
  // per-unit active counts; a collision needs canceling flips in one unit
  for (Eigen::Index c = 0; c < h1.cols(); ++c)
    h = fnv_mix(h, static_cast<std::uint64_t>((h1.col(c).array() > 0.0).count()));
  for (Eigen::Index c = 0; c < h2.cols(); ++c)
    h = fnv_mix(h, static_cast<std::uint64_t>((h2.col(c).array() > 0.0).count()));
  return h;
}

std::uint64_t residual_sign_fingerprint(std::uint64_t h, std::span<const double> acc,
                                        std::span<const TrainRay> batch) {
  for (std::size_t r = 0; r < batch.size(); ++r)
    h = fnv_mix(h, static_cast<std::uint64_t>(sign0(acc[r] - batch[r].sigma_gt) + 2.0));
  return h;
}

constexpr std::uint64_t kFnvBasis = 1469598103934665603ULL;

}  // namespace

struct LossWorkspace::Impl {
  detail::QuadForward quad_fwd;
  detail::SingleForward single_fwd;

  std::vector<Vec3> pts;             // tile sample positions
  std::vector<std::int64_t> row_of;  // tile-local ray row offsets
  std::vector<double> sig_acc, alpha_acc, beta_acc;

  VectorXd g_sigma, g_alpha, g_beta, g_vb, g_vs;
  VectorXd gza, gzb, gzvb, gzvs, gz;
  VectorXd tau_a, tau_b;
  MatrixXd ga_in, gb_in, gvb_in, gvs_in, gx;
  detail::MlpScratch mlp_scratch;
};

LossWorkspace::LossWorkspace() : impl_(std::make_unique<Impl>()) {}
LossWorkspace::~LossWorkspace() = default;
LossWorkspace::LossWorkspace(LossWorkspace&&) noexcept = default;
LossWorkspace& LossWorkspace::operator=(LossWorkspace&&) noexcept = default;

namespace {

// Midpoint sample positions for rays [r0, r1); rays with empty intervals get
// no rows.
template <typename Field>
void build_tile_samples(const Field& field, std::span<const TrainRay> batch,
                        std::size_t r0, std::size_t r1, int n_samples,
                        LossWorkspace::Impl& ws) {
  const std::size_t tile_rays = r1 - r0;
  ws.row_of.assign(tile_rays + 1, 0);
  ws.pts.clear();
  for (std::size_t r = r0; r < r1; ++r) {
    ws.row_of[r - r0] = static_cast<std::int64_t>(ws.pts.size());
    const Ray& ray = batch[r].ray;
    const double span = ray.t_far - ray.t_near;
    if (span > 0.0) {
      const double dt = span / n_samples;
      for (int i = 0; i < n_samples; ++i)
        ws.pts.push_back(field.normalize(ray.at(ray.t_near + (i + 0.5) * dt)));
    }
  }
  ws.row_of[tile_rays] = static_cast<std::int64_t>(ws.pts.size());
}

void validate_args(std::span<const TrainRay> batch, int n_samples, double lambda,
                   std::size_t grads_size, std::int64_t expected) {
  if (batch.empty()) throw std::invalid_argument("loss: batch must be non-empty");
  if (n_samples < 1) throw std::invalid_argument("loss: n_samples must be >= 1");
  if (lambda < 0.0) throw std::invalid_argument("loss: lambda must be >= 0");
  if (grads_size != static_cast<std::size_t>(expected))
    throw std::invalid_argument("loss: gradient buffer length mismatch");
}

double ray_dt(const TrainRay& tr, int n_samples) {
  const double span = tr.ray.t_far - tr.ray.t_near;
  return span > 0.0 ? span / n_samples : 0.0;
}

}  // namespace

LossTerms loss_forward_backward(const QuadField& field, std::span<const TrainRay> batch,
                                int n_samples, double lambda, std::span<double> grads,
                                std::vector<RenderedRay>* rendered_out,
                                LossWorkspace* workspace) {
  validate_args(batch, n_samples, lambda, grads.size(), field.layout.total);
  std::fill(grads.begin(), grads.end(), 0.0);

  LossWorkspace local;
  LossWorkspace::Impl& ws = (workspace ? *workspace : local).impl();
  detail::QuadForward& fwd = ws.quad_fwd;

  const std::size_t n_rays = batch.size();
  const std::size_t rays_per_tile =
      std::max<std::size_t>(1, kTileSamples / static_cast<std::size_t>(n_samples));

  ws.sig_acc.assign(n_rays, 0.0);
  ws.alpha_acc.assign(n_rays, 0.0);
  ws.beta_acc.assign(n_rays, 0.0);

  const auto seg = [&](const char* name) {
    const ParamSegment& ps = field.layout.segment(name);
    return std::span<double>(grads.data() + ps.offset, static_cast<std::size_t>(ps.size));
  };
  const detail::MlpParams ap =
      detail::MlpParams::view(field.segment_view("alpha_mlp"), field.shape_mlp);
  const detail::MlpParams bp =
      detail::MlpParams::view(field.segment_view("beta_mlp"), field.shape_mlp);
  const int levels = field.grid_config.levels;
  Eigen::Map<const VectorXd> wvb(field.segment_view("vb_map").data(), levels);
  Eigen::Map<const VectorXd> wvs(field.segment_view("vs_map").data(), levels);
  std::span<double> gvb_seg = seg("vb_map");
  std::span<double> gvs_seg = seg("vs_map");
  std::span<double> alpha_grad_seg = seg("alpha_mlp");
  std::span<double> beta_grad_seg = seg("beta_mlp");
  double* table_grads = seg("tables").data();

  const double inv_r = 1.0 / static_cast<double>(n_rays);
  const double eps = field.epsilon();
  double g_eps = 0.0;
  LossTerms loss;
  std::uint64_t mask_fp = kFnvBasis;

  for (std::size_t r0 = 0; r0 < n_rays; r0 += rays_per_tile) {
    const std::size_t r1 = std::min(n_rays, r0 + rays_per_tile);
    build_tile_samples(field, batch, r0, r1, n_samples, ws);
    fwd.run(field, ws.pts);
    const auto n_pts = static_cast<Eigen::Index>(ws.pts.size());

    for (std::size_t r = r0; r < r1; ++r) {
      double ss = 0.0, sa = 0.0, sb = 0.0;
      for (std::int64_t p = ws.row_of[r - r0]; p < ws.row_of[r - r0 + 1]; ++p) {
        ss += fwd.sigma[p];
        sa += fwd.alpha[p];
        sb += fwd.beta[p];
      }
      const double dt = ray_dt(batch[r], n_samples);
      ws.sig_acc[r] = ss * dt;
      ws.alpha_acc[r] = sa * dt;
      ws.beta_acc[r] = sb * dt;
      if (!std::isfinite(ws.sig_acc[r]))
        throw NumericError("non-finite render for ray " + std::to_string(r));

      loss.data += std::abs(ws.sig_acc[r] - batch[r].sigma_gt);
      if (lambda > 0.0) {
        const double da = ws.alpha_acc[r] - batch[r].alpha_sup;
        const double db = ws.beta_acc[r] - batch[r].beta_sup;
        loss.tissue += da * da + db * db;
      }
    }
    mask_fp = relu_mask_fingerprint(mask_fp, fwd.a_act.h1, fwd.a_act.h2);
    mask_fp = relu_mask_fingerprint(mask_fp, fwd.b_act.h1, fwd.b_act.h2);

    // ---- backward over the tile ----
    ws.g_alpha.resize(n_pts);
    ws.g_beta.resize(n_pts);
    ws.g_vb.resize(n_pts);
    ws.g_vs.resize(n_pts);
    for (std::size_t r = r0; r < r1; ++r) {
      const double g_sig_acc = sign0(ws.sig_acc[r] - batch[r].sigma_gt) * inv_r;
      const double g_alpha_acc =
          lambda > 0.0 ? 2.0 * lambda * (ws.alpha_acc[r] - batch[r].alpha_sup) * inv_r
                       : 0.0;
      const double g_beta_acc =
          lambda > 0.0 ? 2.0 * lambda * (ws.beta_acc[r] - batch[r].beta_sup) * inv_r : 0.0;
      const double dt = ray_dt(batch[r], n_samples);
      for (std::int64_t p = ws.row_of[r - r0]; p < ws.row_of[r - r0 + 1]; ++p) {
        const double gs = g_sig_acc * dt;
        const double soft = fwd.beta[p] * fwd.vb[p] + fwd.vs[p];
        const double shell = fwd.alpha[p] + eps;
        ws.g_alpha[p] = gs * soft + g_alpha_acc * dt;
        ws.g_beta[p] = gs * shell * fwd.vb[p] + g_beta_acc * dt;
        ws.g_vb[p] = gs * shell * fwd.beta[p];
        ws.g_vs[p] = gs * shell;
        g_eps += gs * soft;
      }
    }

    ws.gza = ws.g_alpha.array() * fwd.alpha.array() * (1.0 - fwd.alpha.array());
    ws.gzb = ws.g_beta.array() * fwd.beta.array() * (1.0 - fwd.beta.array());
    ws.gzvb = ws.g_vb.array() * fwd.vb.array() * (1.0 - fwd.vb.array());
    ws.gzvs = ws.g_vs.array() * fwd.vs.array() * (1.0 - fwd.vs.array());

    detail::mlp_backward(ap, fwd.a_in, fwd.a_act, ws.gza, ws.ga_in, alpha_grad_seg,
                         ws.mlp_scratch);
    detail::mlp_backward(bp, fwd.b_in, fwd.b_act, ws.gzb, ws.gb_in, beta_grad_seg,
                         ws.mlp_scratch);

    Eigen::Map<VectorXd>(gvb_seg.data(), levels).noalias() +=
        fwd.vb_in.transpose() * ws.gzvb;
    gvb_seg[levels] += ws.gzvb.sum();
    Eigen::Map<VectorXd>(gvs_seg.data(), levels).noalias() +=
        fwd.vs_in.transpose() * ws.gzvs;
    gvs_seg[levels] += ws.gzvs.sum();
    ws.gvb_in.noalias() = ws.gzvb * wvb.transpose();
    ws.gvs_in.noalias() = ws.gzvs * wvs.transpose();

    detail::scatter_streams_quad(field.grid_config, ws.pts, ws.ga_in, ws.gb_in, ws.gvb_in,
                                 ws.gvs_in, table_grads);
  }

  loss.data *= inv_r;
  loss.tissue *= inv_r;
  loss.total = loss.data + lambda * loss.tissue;
  if (!std::isfinite(loss.total)) throw NumericError("non-finite loss");
  loss.smooth_piece = residual_sign_fingerprint(mask_fp, ws.sig_acc, batch);

  // eps = 0.05 * sigmoid(rho)
  const double srho = sigmoid(field.segment_view("rho")[0]);
  seg("rho")[0] += g_eps * 0.05 * srho * (1.0 - srho);

  if (rendered_out) {
    rendered_out->resize(n_rays);
    for (std::size_t r = 0; r < n_rays; ++r)
      (*rendered_out)[r] = {ws.sig_acc[r], ws.alpha_acc[r], ws.beta_acc[r]};
  }
  return loss;
}

LossTerms loss_forward_backward(const SingleField& field, std::span<const TrainRay> batch,
                                int n_samples, double lambda,
                                const ThresholdSurrogate* surrogate,
                                std::span<double> grads,
                                std::vector<RenderedRay>* rendered_out,
                                LossWorkspace* workspace) {
  validate_args(batch, n_samples, lambda, grads.size(), field.layout.total);
  std::fill(grads.begin(), grads.end(), 0.0);

  LossWorkspace local;
  LossWorkspace::Impl& ws = (workspace ? *workspace : local).impl();
  detail::SingleForward& fwd = ws.single_fwd;

  const std::size_t n_rays = batch.size();
  const std::size_t rays_per_tile =
      std::max<std::size_t>(1, kTileSamples / static_cast<std::size_t>(n_samples));
  const bool tissue_active = surrogate != nullptr && lambda > 0.0;

  ws.sig_acc.assign(n_rays, 0.0);
  ws.alpha_acc.assign(n_rays, 0.0);
  ws.beta_acc.assign(n_rays, 0.0);

  const ParamSegment& mlp_seg = field.layout.segment("mlp");
  const ParamSegment& tab_seg = field.layout.segment("tables");
  const detail::MlpParams mp = detail::MlpParams::view(field.segment_view("mlp"), field.mlp);
  const std::span<double> mlp_grad_seg{grads.data() + mlp_seg.offset,
                                       static_cast<std::size_t>(mlp_seg.size)};
  double* table_grads = grads.data() + tab_seg.offset;

  const double inv_r = 1.0 / static_cast<double>(n_rays);
  LossTerms loss;
  std::uint64_t mask_fp = kFnvBasis;

  for (std::size_t r0 = 0; r0 < n_rays; r0 += rays_per_tile) {
    const std::size_t r1 = std::min(n_rays, r0 + rays_per_tile);
    build_tile_samples(field, batch, r0, r1, n_samples, ws);
    fwd.run(field, ws.pts);
    const auto n_pts = static_cast<Eigen::Index>(ws.pts.size());

    if (tissue_active) {
      const double inv_temp = 1.0 / surrogate->temperature;
      ws.tau_a = fwd.sigma.unaryExpr(
          [&](double v) { return sigmoid((v - surrogate->t_alpha) * inv_temp); });
      ws.tau_b = fwd.sigma.unaryExpr(
          [&](double v) { return sigmoid((v - surrogate->t_beta) * inv_temp); });
    }

    for (std::size_t r = r0; r < r1; ++r) {
      double ss = 0.0, sa = 0.0, sb = 0.0;
      for (std::int64_t p = ws.row_of[r - r0]; p < ws.row_of[r - r0 + 1]; ++p) {
        ss += fwd.sigma[p];
        if (tissue_active) {
          sa += ws.tau_a[p];
          sb += ws.tau_b[p];
        }
      }
      const double dt = ray_dt(batch[r], n_samples);
      ws.sig_acc[r] = ss * dt;
      ws.alpha_acc[r] = sa * dt;
      ws.beta_acc[r] = sb * dt;
      if (!std::isfinite(ws.sig_acc[r]))
        throw NumericError("non-finite render for ray " + std::to_string(r));

      loss.data += std::abs(ws.sig_acc[r] - batch[r].sigma_gt);
      if (tissue_active) {
        const double da = ws.alpha_acc[r] - batch[r].alpha_sup;
        const double db = ws.beta_acc[r] - batch[r].beta_sup;
        loss.tissue += da * da + db * db;
      }
    }
    mask_fp = relu_mask_fingerprint(mask_fp, fwd.act.h1, fwd.act.h2);

    // ---- backward over the tile ----
    ws.g_sigma.resize(n_pts);
    for (std::size_t r = r0; r < r1; ++r) {
      const double g_sig_acc = sign0(ws.sig_acc[r] - batch[r].sigma_gt) * inv_r;
      const double g_alpha_acc =
          tissue_active ? 2.0 * lambda * (ws.alpha_acc[r] - batch[r].alpha_sup) * inv_r
                        : 0.0;
      const double g_beta_acc =
          tissue_active ? 2.0 * lambda * (ws.beta_acc[r] - batch[r].beta_sup) * inv_r
                        : 0.0;
      const double dt = ray_dt(batch[r], n_samples);
      for (std::int64_t p = ws.row_of[r - r0]; p < ws.row_of[r - r0 + 1]; ++p) {
        double g = g_sig_acc * dt;
        if (tissue_active) {
          const double inv_temp = 1.0 / surrogate->temperature;
          g += g_alpha_acc * dt * ws.tau_a[p] * (1.0 - ws.tau_a[p]) * inv_temp;
          g += g_beta_acc * dt * ws.tau_b[p] * (1.0 - ws.tau_b[p]) * inv_temp;
        }
        ws.g_sigma[p] = g;
      }
    }

    ws.gz = ws.g_sigma.array() * fwd.sigma.array() * (1.0 - fwd.sigma.array());
    detail::mlp_backward(mp, fwd.x_in, fwd.act, ws.gz, ws.gx, mlp_grad_seg,
                         ws.mlp_scratch);
    detail::scatter_features_single(field.grid_config, ws.pts, ws.gx, table_grads);
  }

  loss.data *= inv_r;
  loss.tissue *= inv_r;
  loss.total = loss.data + lambda * loss.tissue;
  if (!std::isfinite(loss.total)) throw NumericError("non-finite loss");
  loss.smooth_piece = residual_sign_fingerprint(mask_fp, ws.sig_acc, batch);

  if (rendered_out) {
    rendered_out->resize(n_rays);
    for (std::size_t r = 0; r < n_rays; ++r)
      (*rendered_out)[r] = {ws.sig_acc[r], ws.alpha_acc[r], ws.beta_acc[r]};
  }
  return loss;
}

}  // namespace tomo
