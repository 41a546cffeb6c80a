#include "field_kernels.hpp"

#include <cmath>

namespace tomo::detail {

MlpParams MlpParams::view(std::span<const double> segment, const MlpDims& dims) {
  const std::int64_t in = dims.input, h = dims.hidden;
  MlpParams p;
  p.dims = dims;
  const double* ptr = segment.data();
  p.w1 = ptr;
  ptr += in * h;
  p.b1 = ptr;
  ptr += h;
  p.w2 = ptr;
  ptr += h * h;
  p.b2 = ptr;
  ptr += h;
  p.w3 = ptr;
  ptr += h;
  p.b3 = ptr;
  return p;
}

AffineParams AffineParams::view(std::span<const double> segment, int input) {
  return {segment.data(), segment[input]};
}

void mlp_forward(const MlpParams& p, const MatrixXd& x, MlpActs& acts) {
  const int h = p.dims.hidden;
  RowMajorMap w1(p.w1, p.dims.input, h);
  RowMajorMap w2(p.w2, h, h);
  Eigen::Map<const VectorXd> b1(p.b1, h), b2(p.b2, h), w3(p.w3, h);

  acts.h1.noalias() = x * w1;
  acts.h1 = (acts.h1.rowwise() + b1.transpose()).cwiseMax(0.0);

  acts.h2.noalias() = acts.h1 * w2;
  acts.h2 = (acts.h2.rowwise() + b2.transpose()).cwiseMax(0.0);

  acts.z.noalias() = acts.h2 * w3;
  acts.z.array() += *p.b3;
}

void mlp_backward(const MlpParams& p, const MatrixXd& x, const MlpActs& acts,
                  const VectorXd& gz, MatrixXd& gx, std::span<double> grad_segment,
                  MlpScratch& scratch) {
  const std::int64_t in = p.dims.input, h = p.dims.hidden;
  RowMajorMap w1(p.w1, in, h);
  RowMajorMap w2(p.w2, h, h);
  Eigen::Map<const VectorXd> w3(p.w3, h);

  double* gptr = grad_segment.data();
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw1(
      gptr, in, h);
  gptr += in * h;
  Eigen::Map<VectorXd> gb1(gptr, h);
  gptr += h;
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw2(
      gptr, h, h);
  gptr += h * h;
  Eigen::Map<VectorXd> gb2(gptr, h);
  gptr += h;
  Eigen::Map<VectorXd> gw3(gptr, h);
  gptr += h;
  double* gb3 = gptr;

  gw3.noalias() += acts.h2.transpose() * gz;
  *gb3 += gz.sum();

  // ReLU subgradient: zero at inactive units (h == 0)
  scratch.gh2.noalias() = gz * w3.transpose();
  scratch.gh2.array() *= (acts.h2.array() > 0.0).cast<double>();

  gw2.noalias() += acts.h1.transpose() * scratch.gh2;
  gb2.noalias() += scratch.gh2.colwise().sum().transpose();

  scratch.gh1.noalias() = scratch.gh2 * w2.transpose();
  scratch.gh1.array() *= (acts.h1.array() > 0.0).cast<double>();

  gw1.noalias() += x.transpose() * scratch.gh1;
  gb1.noalias() += scratch.gh1.colwise().sum().transpose();

  gx.noalias() = scratch.gh1 * w1.transpose();
}

namespace {

struct LevelIter {
  std::vector<int> res;
  std::vector<std::int64_t> entries;
  std::vector<std::int64_t> offsets;

  explicit LevelIter(const HashGridConfig& cfg)
      : res(cfg.resolutions()), entries(cfg.level_entries()) {
    offsets.resize(entries.size());
    std::int64_t off = 0;
    for (std::size_t l = 0; l < entries.size(); ++l) {
      offsets[l] = off;
      off += entries[l];
    }
  }
};

}  // namespace

void gather_streams_quad(const HashGridConfig& cfg, const double* tables,
                         std::span<const Vec3> pts, MatrixXd& a, MatrixXd& b,
                         MatrixXd& vb, MatrixXd& vs) {
  const LevelIter it(cfg);
  const auto n = static_cast<Eigen::Index>(pts.size());
  a.resize(n, cfg.levels);
  b.resize(n, cfg.levels);
  vb.resize(n, cfg.levels);
  vs.resize(n, cfg.levels);
  for (Eigen::Index p = 0; p < n; ++p) {
    const Vec3& q = pts[p];
    for (int l = 0; l < cfg.levels; ++l) {
      const LevelStencil st = level_stencil(q.x, q.y, q.z, l, it.res[l], cfg);
      double f0 = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0;
      const double* base = tables + it.offsets[l] * 4;
      for (int c = 0; c < 8; ++c) {
        const double* e = base + st.entry[c] * 4;
        const double w = st.weight[c];
        f0 += w * e[0];
        f1 += w * e[1];
        f2 += w * e[2];
        f3 += w * e[3];
      }
      a(p, l) = f0;
      b(p, l) = f1;
      vb(p, l) = f2;
      vs(p, l) = f3;
    }
  }
}

void gather_features_single(const HashGridConfig& cfg, const double* tables,
                            std::span<const Vec3> pts, MatrixXd& x) {
  const LevelIter it(cfg);
  const auto n = static_cast<Eigen::Index>(pts.size());
  x.resize(n, cfg.levels * 4);
  for (Eigen::Index p = 0; p < n; ++p) {
    const Vec3& q = pts[p];
    for (int l = 0; l < cfg.levels; ++l) {
      const LevelStencil st = level_stencil(q.x, q.y, q.z, l, it.res[l], cfg);
      double f0 = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0;
      const double* base = tables + it.offsets[l] * 4;
      for (int c = 0; c < 8; ++c) {
        const double* e = base + st.entry[c] * 4;
        const double w = st.weight[c];
        f0 += w * e[0];
        f1 += w * e[1];
        f2 += w * e[2];
        f3 += w * e[3];
      }
      x(p, l * 4 + 0) = f0;
      x(p, l * 4 + 1) = f1;
      x(p, l * 4 + 2) = f2;
      x(p, l * 4 + 3) = f3;
    }
  }
}

void scatter_streams_quad(const HashGridConfig& cfg, std::span<const Vec3> pts,
                          const MatrixXd& ga, const MatrixXd& gb, const MatrixXd& gvb,
                          const MatrixXd& gvs, double* grad_tables) {
  const LevelIter it(cfg);
  const auto n = static_cast<Eigen::Index>(pts.size());
  for (Eigen::Index p = 0; p < n; ++p) {
    const Vec3& q = pts[p];
    for (int l = 0; l < cfg.levels; ++l) {
      const LevelStencil st = level_stencil(q.x, q.y, q.z, l, it.res[l], cfg);
      const double u0 = ga(p, l), u1 = gb(p, l), u2 = gvb(p, l), u3 = gvs(p, l);
      double* base = grad_tables + it.offsets[l] * 4;
      for (int c = 0; c < 8; ++c) {
        double* e = base + st.entry[c] * 4;
        const double w = st.weight[c];
        e[0] += w * u0;
        e[1] += w * u1;
        e[2] += w * u2;
        e[3] += w * u3;
      }
    }
  }
}

void scatter_features_single(const HashGridConfig& cfg, std::span<const Vec3> pts,
                             const MatrixXd& gx, double* grad_tables) {
  const LevelIter it(cfg);
  const auto n = static_cast<Eigen::Index>(pts.size());
  for (Eigen::Index p = 0; p < n; ++p) {
    const Vec3& q = pts[p];
    for (int l = 0; l < cfg.levels; ++l) {
      const LevelStencil st = level_stencil(q.x, q.y, q.z, l, it.res[l], cfg);
      const double u0 = gx(p, l * 4 + 0), u1 = gx(p, l * 4 + 1), u2 = gx(p, l * 4 + 2),
                   u3 = gx(p, l * 4 + 3);
      double* base = grad_tables + it.offsets[l] * 4;
      for (int c = 0; c < 8; ++c) {
        double* e = base + st.entry[c] * 4;
        const double w = st.weight[c];
        e[0] += w * u0;
        e[1] += w * u1;
        e[2] += w * u2;
        e[3] += w * u3;
      }
    }
  }
}

void QuadForward::run(const QuadField& field, std::span<const Vec3> pts) {
  gather_streams_quad(field.grid_config, field.segment_view("tables").data(), pts, a_in,
                      b_in, vb_in, vs_in);

  const MlpParams ap = MlpParams::view(field.segment_view("alpha_mlp"), field.shape_mlp);
  const MlpParams bp = MlpParams::view(field.segment_view("beta_mlp"), field.shape_mlp);
  mlp_forward(ap, a_in, a_act);
  mlp_forward(bp, b_in, b_act);

  const AffineParams vbp =
      AffineParams::view(field.segment_view("vb_map"), field.grid_config.levels);
  const AffineParams vsp =
      AffineParams::view(field.segment_view("vs_map"), field.grid_config.levels);
  Eigen::Map<const VectorXd> wvb(vbp.w, field.grid_config.levels);
  Eigen::Map<const VectorXd> wvs(vsp.w, field.grid_config.levels);
  vb_z.noalias() = vb_in * wvb;
  vb_z.array() += vbp.b;
  vs_z.noalias() = vs_in * wvs;
  vs_z.array() += vsp.b;

  alpha = sigmoid_vec(a_act.z);
  beta = sigmoid_vec(b_act.z);
  vb = sigmoid_vec(vb_z);
  vs = sigmoid_vec(vs_z);

  eps = field.epsilon();
  sigma = (alpha.array() + eps) * (beta.array() * vb.array() + vs.array());
}

void SingleForward::run(const SingleField& field, std::span<const Vec3> pts) {
  gather_features_single(field.grid_config, field.segment_view("tables").data(), pts, x_in);
  const MlpParams mp = MlpParams::view(field.segment_view("mlp"), field.mlp);
  mlp_forward(mp, x_in, act);
  sigma = sigmoid_vec(act.z);
}

}  // namespace tomo::detail
