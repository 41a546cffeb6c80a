#include "tomo/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace tomo {

namespace {
constexpr int kWindow = 7;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

void check_same_shape(const Volume& a, const Volume& b) {
  if (a.extent.nx != b.extent.nx || a.extent.ny != b.extent.ny ||
      a.extent.nz != b.extent.nz || a.data.size() != b.data.size())
    throw std::invalid_argument("metrics: volume shapes differ");
}

// Valid-mode box sum along one axis; shrinks that axis by window-1.
std::vector<double> box_sum_axis(const std::vector<double>& in, int nx, int ny, int nz,
                                 int axis) {
  const int out_nx = axis == 0 ? nx - kWindow + 1 : nx;
  const int out_ny = axis == 1 ? ny - kWindow + 1 : ny;
  const int out_nz = axis == 2 ? nz - kWindow + 1 : nz;
  std::vector<double> out(static_cast<std::size_t>(out_nx) * out_ny * out_nz);
  const auto idx_in = [&](int x, int y, int z) {
    return (static_cast<std::size_t>(z) * ny + y) * nx + x;
  };
  const auto idx_out = [&](int x, int y, int z) {
    return (static_cast<std::size_t>(z) * out_ny + y) * out_nx + x;
  };
  for (int z = 0; z < out_nz; ++z)
    for (int y = 0; y < out_ny; ++y)
      for (int x = 0; x < out_nx; ++x) {
        // sliding update along x when filtering x, otherwise direct sum
        double s = 0.0;
        for (int w = 0; w < kWindow; ++w) {
          const int xx = axis == 0 ? x + w : x;
          const int yy = axis == 1 ? y + w : y;
          const int zz = axis == 2 ? z + w : z;
          s += in[idx_in(xx, yy, zz)];
        }
        out[idx_out(x, y, z)] = s;
      }
  return out;
}

std::vector<double> box_filter(const std::vector<double>& in, int nx, int ny, int nz) {
  std::vector<double> t = box_sum_axis(in, nx, ny, nz, 0);
  t = box_sum_axis(t, nx - kWindow + 1, ny, nz, 1);
  t = box_sum_axis(t, nx - kWindow + 1, ny - kWindow + 1, nz, 2);
  return t;
}

}  // namespace

PsnrResult psnr(const Volume& a, const Volume& b, double data_range) {
  check_same_shape(a, b);
  if (!(data_range > 0.0)) throw std::invalid_argument("psnr: data_range must be positive");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse == 0.0) return {std::nullopt, true};
  return {10.0 * std::log10(data_range * data_range / mse), false};
}

double ssim(const Volume& a, const Volume& b, double data_range) {
  check_same_shape(a, b);
  if (!(data_range > 0.0)) throw std::invalid_argument("ssim: data_range must be positive");
  const int nx = a.extent.nx, ny = a.extent.ny, nz = a.extent.nz;
  if (nx < kWindow || ny < kWindow || nz < kWindow)
    throw std::invalid_argument("ssim: volume smaller than the 7^3 window");

  const std::size_t n = a.data.size();
  std::vector<double> va(n), vb(n), vaa(n), vbb(n), vab(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.data[i], y = b.data[i];
    va[i] = x;
    vb[i] = y;
    vaa[i] = x * x;
    vbb[i] = y * y;
    vab[i] = x * y;
  }

  const std::vector<double> sa = box_filter(va, nx, ny, nz);
  const std::vector<double> sb = box_filter(vb, nx, ny, nz);
  const std::vector<double> saa = box_filter(vaa, nx, ny, nz);
  const std::vector<double> sbb = box_filter(vbb, nx, ny, nz);
  const std::vector<double> sab = box_filter(vab, nx, ny, nz);

  const double inv_w = 1.0 / (kWindow * kWindow * kWindow);
  const double c1 = (kK1 * data_range) * (kK1 * data_range);
  const double c2 = (kK2 * data_range) * (kK2 * data_range);

  double total = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double mu_a = sa[i] * inv_w;
    const double mu_b = sb[i] * inv_w;
    const double var_a = saa[i] * inv_w - mu_a * mu_a;
    const double var_b = sbb[i] * inv_w - mu_b * mu_b;
    const double cov = sab[i] * inv_w - mu_a * mu_b;
    const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
    const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
    total += num / den;
  }
  return total / static_cast<double>(sa.size());
}

}  // namespace tomo
