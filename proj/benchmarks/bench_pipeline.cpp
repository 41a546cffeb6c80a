#include <benchmark/benchmark.h>

#include "tomo/adam.hpp"
#include "tomo/autodiff.hpp"
#include "tomo/baselines.hpp"
#include "tomo/metrics.hpp"
#include "tomo/phantom.hpp"
#include "tomo/training.hpp"

namespace {

using namespace tomo;

struct DeskSetup {
  Volume volume;
  TissueMasks masks;
  ScannerGeometry geom;
  ProjectionStack sigma;
  QuadField quad;
  SingleField single;
  std::vector<TrainRay> batch;

  DeskSetup() : quad(make_quad()), single(make_single()) {
    PhantomSpec spec;
    auto [vol, m] = generate_head_phantom(spec);
    volume = std::move(vol);
    masks = std::move(m);
    geom.angles_deg = make_circular_trajectory(20, 180.0);
    sigma = project_volume(volume, geom, 128);
    Rng rng(1);
    batch = sample_batch(sigma, nullptr, nullptr, volume.extent, 512, &rng);
  }

  static QuadField make_quad() {
    VolumeExtent e;
    e.nx = e.ny = e.nz = 64;
    return QuadField::create(HashGridConfig::desk_preset(), e, 1);
  }
  static SingleField make_single() {
    VolumeExtent e;
    e.nx = e.ny = e.nz = 64;
    return SingleField::create(HashGridConfig::desk_preset(), e, 1);
  }
};

DeskSetup& setup() {
  static DeskSetup s;
  return s;
}

void BM_ProjectVolumeView(benchmark::State& state) {
  DeskSetup& s = setup();
  ScannerGeometry one = s.geom;
  one.angles_deg = {17.0};
  for (auto _ : state) {
    ProjectionStack stack = project_volume(s.volume, one, 128);
    benchmark::DoNotOptimize(stack.data.data());
  }
}
BENCHMARK(BM_ProjectVolumeView)->Unit(benchmark::kMillisecond);

void BM_Encode(benchmark::State& state) {
  const HashGrid grid = HashGrid::create(HashGridConfig::desk_preset(), 3);
  Rng rng(5);
  std::vector<Vec3> pts(10000);
  for (Vec3& p : pts) p = {rng.uniform(), rng.uniform(), rng.uniform()};
  std::size_t i = 0;
  for (auto _ : state) {
    const auto feat = encode(grid, pts[i++ % pts.size()]);
    benchmark::DoNotOptimize(feat.data());
  }
}
BENCHMARK(BM_Encode);

void BM_QuadLossForwardBackward(benchmark::State& state) {
  DeskSetup& s = setup();
  std::vector<double> grads(s.quad.layout.total);
  LossWorkspace ws;
  for (auto _ : state) {
    const LossTerms loss =
        loss_forward_backward(s.quad, s.batch, 128, 2.5, grads, nullptr, &ws);
    benchmark::DoNotOptimize(loss.total);
  }
}
BENCHMARK(BM_QuadLossForwardBackward)->Unit(benchmark::kMillisecond);

void BM_SingleLossForwardBackward(benchmark::State& state) {
  DeskSetup& s = setup();
  std::vector<double> grads(s.single.layout.total);
  const ThresholdSurrogate surrogate{};
  LossWorkspace ws;
  for (auto _ : state) {
    const LossTerms loss = loss_forward_backward(s.single, s.batch, 128, 2.5, &surrogate,
                                                 grads, nullptr, &ws);
    benchmark::DoNotOptimize(loss.total);
  }
}
BENCHMARK(BM_SingleLossForwardBackward)->Unit(benchmark::kMillisecond);

void BM_AdamStep(benchmark::State& state) {
  DeskSetup& s = setup();
  std::vector<double> params = s.quad.params;
  std::vector<double> grads(params.size(), 1e-4);
  AdamState adam(AdamConfig{}, params.size());
  for (auto _ : state) {
    adam_step(params, grads, adam);
    benchmark::DoNotOptimize(params.data());
  }
}
BENCHMARK(BM_AdamStep)->Unit(benchmark::kMillisecond);

void BM_ExtractVolume(benchmark::State& state) {
  DeskSetup& s = setup();
  for (auto _ : state) {
    const Volume v = extract_volume(s.quad, s.volume.extent);
    benchmark::DoNotOptimize(v.data.data());
  }
}
BENCHMARK(BM_ExtractVolume)->Unit(benchmark::kMillisecond);

void BM_SartSweep(benchmark::State& state) {
  DeskSetup& s = setup();
  SartConfig cfg;
  cfg.n_iterations = 1;
  for (auto _ : state) {
    const Volume v = sart(s.sigma, s.volume.extent, cfg);
    benchmark::DoNotOptimize(v.data.data());
  }
}
BENCHMARK(BM_SartSweep)->Unit(benchmark::kMillisecond);

void BM_Fdk(benchmark::State& state) {
  DeskSetup& s = setup();
  for (auto _ : state) {
    const Volume v = fdk(s.sigma, s.volume.extent, FdkConfig{});
    benchmark::DoNotOptimize(v.data.data());
  }
}
BENCHMARK(BM_Fdk)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  DeskSetup& s = setup();
  const Volume noisy = s.volume;  // self-comparison exercises the full path
  for (auto _ : state) benchmark::DoNotOptimize(ssim(s.volume, noisy, 1.0));
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
