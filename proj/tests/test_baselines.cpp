#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "tomo/baselines.hpp"
#include "tomo/metrics.hpp"
#include "tomo/phantom.hpp"

using namespace tomo;

namespace {

ScannerGeometry geom_for(int n_views, int det) {
  ScannerGeometry g;
  g.det_rows = det;
  g.det_cols = det;
  g.det_pixel_pitch = 3.0 / det;
  g.angles_deg = make_circular_trajectory(n_views, 180.0);
  return g;
}

struct SmallScene {
  Volume truth;
  ProjectionStack stack;
  VolumeExtent extent;
};

SmallScene small_scene(int n_views) {
  PhantomSpec spec;
  spec.size = 32;
  auto [vol, masks] = generate_head_phantom(spec);
  SmallScene s;
  s.extent = vol.extent;
  s.stack = project_volume(vol, geom_for(n_views, 32), 64);
  s.truth = std::move(vol);
  return s;
}

double psnr_db(const Volume& a, const Volume& b) { return *psnr(a, b, 1.0).db; }

}  // namespace

TEST_CASE("sart single-voxel iteration follows the closed form") {
  VolumeExtent extent;
  extent.nx = extent.ny = extent.nz = 1;
  ScannerGeometry g = geom_for(1, 1);
  g.det_pixel_pitch = 0.1;

  ProjectionStack stack(g, StackKind::kSigma);
  const double measured = 0.42;
  stack.at(0, 0, 0) = static_cast<float>(measured);

  // central ray crosses the unit box: chord 1, target value = measured / 1
  SartConfig cfg;
  cfg.relaxation = 0.3;
  cfg.n_samples = 8;
  double expected = 0.0;
  for (int sweeps = 1; sweeps <= 50; ++sweeps) {
    cfg.n_iterations = sweeps;
    const Volume recon = sart(stack, extent, cfg);
    expected = measured * (1.0 - std::pow(1.0 - cfg.relaxation, sweeps));
    // float32 voxel storage bounds the match
    CHECK(recon.data[0] == doctest::Approx(expected).epsilon(1e-5));
  }
  CHECK(std::abs(measured - expected) < 1e-6);  // residual after 50 sweeps
}

TEST_CASE("sart fixes the zero solution for zero projections") {
  const SmallScene s = small_scene(6);
  ProjectionStack zeros = s.stack;
  std::fill(zeros.data.begin(), zeros.data.end(), 0.0f);
  SartConfig cfg;
  cfg.n_iterations = 3;
  const Volume recon = sart(zeros, s.extent, cfg);
  for (float v : recon.data) CHECK(v == 0.0f);
}

TEST_CASE("sart improves with more views") {
  const SmallScene sparse = small_scene(5);
  const SmallScene dense = small_scene(20);
  SartConfig cfg;
  cfg.n_iterations = 15;
  const Volume sparse_recon = sart(sparse.stack, sparse.extent, cfg);
  const Volume dense_recon = sart(dense.stack, dense.extent, cfg);
  CHECK(psnr_db(dense_recon, dense.truth) > psnr_db(sparse_recon, sparse.truth));
}

TEST_CASE("sart residual norm is non-increasing for relaxation <= 1") {
  const SmallScene s = small_scene(8);
  SartConfig cfg;
  cfg.n_iterations = 12;
  std::vector<double> residuals;
  sart(s.stack, s.extent, cfg, &residuals);
  REQUIRE(residuals.size() == 12);
  for (std::size_t i = 1; i < residuals.size(); ++i)
    CHECK(residuals[i] <= residuals[i - 1] * (1.0 + 1e-9));
}

TEST_CASE("fdk localizes an impulse") {
  VolumeExtent extent;
  extent.nx = extent.ny = extent.nz = 32;
  Volume impulse(extent);
  const int ix = 20, iy = 13, iz = 18;
  impulse.at(ix, iy, iz) = 1.0f;

  const ProjectionStack stack = project_volume(impulse, geom_for(60, 64), 64);
  FdkConfig cfg;
  const Volume recon = fdk(stack, extent, cfg);

  std::size_t argmax = 0;
  for (std::size_t i = 0; i < recon.data.size(); ++i)
    if (recon.data[i] > recon.data[argmax]) argmax = i;
  const int rz = static_cast<int>(argmax / (32 * 32));
  const int ry = static_cast<int>((argmax / 32) % 32);
  const int rx = static_cast<int>(argmax % 32);
  CHECK(std::abs(rx - ix) <= 1);
  CHECK(std::abs(ry - iy) <= 1);
  CHECK(std::abs(rz - iz) <= 1);
}

TEST_CASE("fdk of zero data is zero") {
  const SmallScene s = small_scene(8);
  ProjectionStack zeros = s.stack;
  std::fill(zeros.data.begin(), zeros.data.end(), 0.0f);
  const Volume recon = fdk(zeros, s.extent, FdkConfig{});
  for (float v : recon.data) CHECK(v == 0.0f);
}

TEST_CASE("fdk is linear in the projection data") {
  const SmallScene s = small_scene(10);
  FdkConfig cfg;
  cfg.clamp_negative = false;

  ProjectionStack doubled = s.stack;
  for (float& v : doubled.data) v *= 2.0f;
  ProjectionStack shifted = s.stack;
  for (std::size_t i = 0; i < shifted.data.size(); ++i)
    shifted.data[i] = 0.25f * s.stack.data[i] + 0.75f * doubled.data[i];

  const Volume base = fdk(s.stack, s.extent, cfg);
  const Volume twice = fdk(doubled, s.extent, cfg);
  const Volume mix = fdk(shifted, s.extent, cfg);

  double max_abs = 0.0;
  for (float v : base.data) max_abs = std::max(max_abs, std::abs(double(v)));
  for (std::size_t i = 0; i < base.data.size(); ++i) {
    CHECK(std::abs(twice.data[i] - 2.0 * base.data[i]) < 1e-5 * max_abs);
    const double expected = 0.25 * base.data[i] + 0.75 * twice.data[i];
    CHECK(std::abs(mix.data[i] - expected) < 1e-5 * max_abs);
  }
}

TEST_CASE("fdk improves with more views") {
  const SmallScene sparse = small_scene(8);
  const SmallScene dense = small_scene(60);
  const Volume a = fdk(sparse.stack, sparse.extent, FdkConfig{});
  const Volume b = fdk(dense.stack, dense.extent, FdkConfig{});
  CHECK(psnr_db(b, dense.truth) > psnr_db(a, sparse.truth));
}

TEST_CASE("ramp and hann filters both reconstruct; hann smooths") {
  const SmallScene s = small_scene(30);
  FdkConfig ramp;
  ramp.filter = FdkFilter::kRamp;
  FdkConfig hann;
  hann.filter = FdkFilter::kRampHann;
  const Volume vr = fdk(s.stack, s.extent, ramp);
  const Volume vh = fdk(s.stack, s.extent, hann);
  CHECK(psnr_db(vr, s.truth) > 10.0);
  CHECK(psnr_db(vh, s.truth) > 10.0);
  CHECK(vr.data != vh.data);
}

TEST_CASE("reconstruct_mlp_hash accepts only single-output modes") {
  PhantomSpec spec;
  spec.size = 32;
  auto [vol, masks] = generate_head_phantom(spec);
  Scene scene;
  scene.sigma_stack = project_volume(vol, geom_for(4, 32), 64);
  scene.ground_truth = std::move(vol);
  scene.recon_extent = scene.ground_truth.extent;

  TrainConfig cfg = TrainConfig::desk_preset();
  cfg.total_iterations = 5;
  cfg.batch_rays = 16;
  cfg.n_samples = 16;
  cfg.eval_every = 5;
  cfg.grid = HashGridConfig::with_max_resolution(4, 12, 4, 16);

  cfg.mode = TrainMode::kTnt;
  CHECK_THROWS_AS(reconstruct_mlp_hash(scene, cfg), std::invalid_argument);

  cfg.mode = TrainMode::kMlp;
  const TrainResult result = reconstruct_mlp_hash(scene, cfg);
  CHECK(std::holds_alternative<SingleField>(result.field));
}
