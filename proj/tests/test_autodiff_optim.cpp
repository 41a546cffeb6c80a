#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tomo/adam.hpp"
#include "tomo/autodiff.hpp"
#include "tomo/rng.hpp"

using namespace tomo;

namespace {

HashGridConfig fd_grid() { return HashGridConfig::with_max_resolution(4, 10, 4, 16); }

VolumeExtent unit_extent(int n) {
  VolumeExtent e;
  e.nx = e.ny = e.nz = n;
  return e;
}

// Rays through the unit box with nonzero residuals against synthetic targets.
std::vector<TrainRay> make_batch(int n_rays, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainRay> batch;
  const VolumeExtent box = unit_extent(1);
  while (static_cast<int>(batch.size()) < n_rays) {
    const double a = rng.uniform(0.0, 2.0 * M_PI);
    Ray ray;
    ray.origin = {2.0 * std::cos(a), 2.0 * std::sin(a), rng.uniform(-0.2, 0.2)};
    const Vec3 target{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                      rng.uniform(-0.3, 0.3)};
    ray.direction = (target - ray.origin).normalized();
    ray.t_near = 0.0;
    ray.t_far = 10.0;
    const auto hit = intersect_aabb(ray, box);
    if (!hit) continue;
    ray.t_near = hit->first;
    ray.t_far = hit->second;
    TrainRay tr;
    tr.ray = ray;
    tr.sigma_gt = rng.uniform(0.1, 0.8);
    tr.alpha_sup = rng.uniform(0.2, 1.0);
    tr.beta_sup = rng.uniform(0.0, 0.5);
    batch.push_back(tr);
  }
  return batch;
}

QuadField generic_quad(std::uint64_t seed) {
  QuadField field = QuadField::create(fd_grid(), unit_extent(16), seed);
  Rng rng(seed + 100);
  for (double& v : field.segment_view("tables")) v = rng.uniform(-0.5, 0.5);
  return field;
}

SingleField generic_single(std::uint64_t seed) {
  SingleField field = SingleField::create(fd_grid(), unit_extent(16), seed);
  Rng rng(seed + 100);
  for (double& v : field.segment_view("tables")) v = rng.uniform(-0.5, 0.5);
  return field;
}

struct FdCheckStats {
  int checked = 0;
  double max_rel = 0.0;
};

// Central differences are a valid derivative oracle only where the loss is
// smooth; candidates whose +-h step crosses a ReLU or L1 kink (detected via
// the smooth-piece fingerprint) are resampled.
template <typename LossFn, typename FieldT>
FdCheckStats fd_check_segments(FieldT& field, const LossFn& loss_of,
                               std::span<const double> analytic,
                               std::uint64_t base_piece, int per_segment,
                               std::uint64_t seed) {
  Rng rng(seed);
  FdCheckStats stats;
  const double h = 1e-3;
  for (const ParamSegment& seg : field.layout.segments) {
    int done = 0;
    for (int trial = 0; trial < 60 * per_segment && done < per_segment; ++trial) {
      const std::int64_t i = seg.offset + static_cast<std::int64_t>(rng.below(seg.size));
      const double saved = field.params[i];
      field.params[i] = saved + h;
      const LossTerms up = loss_of(field);
      field.params[i] = saved - h;
      const LossTerms down = loss_of(field);
      field.params[i] = saved;
      if (up.smooth_piece != base_piece || down.smooth_piece != base_piece) continue;
      const double fd = (up.total - down.total) / (2.0 * h);

      if (std::abs(analytic[i]) < 1e-6) {
        CHECK(std::abs(fd) < 1e-6);
        // count only informative comparisons against nonzero gradients
        continue;
      }
      const double rel = std::abs(fd - analytic[i]) / std::abs(analytic[i]);
      stats.max_rel = std::max(stats.max_rel, rel);
      CHECK(rel < 1e-3);
      ++done;
      ++stats.checked;
    }
  }
  return stats;
}

}  // namespace

TEST_CASE("perfect fit gives zero loss and zero gradients") {
  const QuadField field = generic_quad(1);
  std::vector<TrainRay> batch = make_batch(12, 3);
  std::vector<double> grads(field.layout.total);

  std::vector<RenderedRay> rendered;
  loss_forward_backward(field, batch, 24, 2.0, grads, &rendered);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    batch[r].sigma_gt = rendered[r].sigma_acc;
    batch[r].alpha_sup = rendered[r].alpha_acc;
    batch[r].beta_sup = rendered[r].beta_acc;
  }

  const LossTerms loss = loss_forward_backward(field, batch, 24, 2.0, grads);
  CHECK(loss.total == 0.0);
  for (double g : grads) CHECK(g == 0.0);
}

TEST_CASE("quad gradients match central finite differences on all segments") {
  QuadField field = generic_quad(7);
  const std::vector<TrainRay> batch = make_batch(12, 11);
  const int n_samples = 24;
  const double lambda = 2.5;

  std::vector<double> analytic(field.layout.total);
  const LossTerms base = loss_forward_backward(field, batch, n_samples, lambda, analytic);

  std::vector<double> scratch(field.layout.total);
  const auto loss_of = [&](const QuadField& f) {
    return loss_forward_backward(f, batch, n_samples, lambda, scratch);
  };

  const FdCheckStats stats =
      fd_check_segments(field, loss_of, analytic, base.smooth_piece, 20, 99);
  CHECK(stats.checked >= 60);
}

TEST_CASE("single-field gradients match finite differences, surrogate included") {
  SingleField field = generic_single(5);
  const std::vector<TrainRay> batch = make_batch(10, 17);
  const ThresholdSurrogate surrogate{0.2, 0.6, 0.05};
  const int n_samples = 24;
  const double lambda = 1.5;

  std::vector<double> analytic(field.layout.total);
  const LossTerms base =
      loss_forward_backward(field, batch, n_samples, lambda, &surrogate, analytic);

  std::vector<double> scratch(field.layout.total);
  const auto loss_of = [&](const SingleField& f) {
    return loss_forward_backward(f, batch, n_samples, lambda, &surrogate, scratch);
  };
  const FdCheckStats stats =
      fd_check_segments(field, loss_of, analytic, base.smooth_piece, 25, 31);
  CHECK(stats.checked >= 30);
}

TEST_CASE("lambda = 0 makes the loss ignore the supervision values") {
  const QuadField field = generic_quad(2);
  std::vector<TrainRay> batch = make_batch(8, 5);
  std::vector<double> g1(field.layout.total), g2(field.layout.total);

  const LossTerms l1 = loss_forward_backward(field, batch, 16, 0.0, g1);
  for (TrainRay& r : batch) {
    r.alpha_sup += 5.0;
    r.beta_sup += 7.0;
  }
  const LossTerms l2 = loss_forward_backward(field, batch, 16, 0.0, g2);
  CHECK(l1.total == l2.total);
  CHECK(g1 == g2);
}

TEST_CASE("dead branch: vb pinned to zero kills all beta-stream gradients") {
  QuadField field = generic_quad(3);
  field.segment_view("vb_map")[field.grid_config.levels] = -1000.0;  // vb == 0 exactly

  const std::vector<TrainRay> batch = make_batch(10, 7);
  std::vector<double> grads(field.layout.total);
  loss_forward_backward(field, batch, 16, 0.0, grads);

  const ParamSegment& beta_seg = field.layout.segment("beta_mlp");
  for (std::int64_t i = 0; i < beta_seg.size; ++i)
    CHECK(grads[beta_seg.offset + i] == 0.0);

  const ParamSegment& tables = field.layout.segment("tables");
  for (std::int64_t e = 0; e < tables.size / 4; ++e)
    CHECK(grads[tables.offset + e * 4 + 1] == 0.0);  // beta stream component

  // alpha path must still learn
  const ParamSegment& alpha_seg = field.layout.segment("alpha_mlp");
  double alpha_norm = 0.0;
  for (std::int64_t i = 0; i < alpha_seg.size; ++i)
    alpha_norm += std::abs(grads[alpha_seg.offset + i]);
  CHECK(alpha_norm > 0.0);
}

TEST_CASE("per-ray gradients sum linearly") {
  const QuadField field = generic_quad(4);
  const std::vector<TrainRay> batch = make_batch(2, 23);
  const std::vector<TrainRay> first{batch[0]};
  const std::vector<TrainRay> second{batch[1]};

  std::vector<double> g_first(field.layout.total), g_second(field.layout.total),
      g_both(field.layout.total);
  const LossTerms l_first = loss_forward_backward(field, first, 16, 1.0, g_first);
  const LossTerms l_second = loss_forward_backward(field, second, 16, 1.0, g_second);
  const LossTerms l_both = loss_forward_backward(field, batch, 16, 1.0, g_both);

  CHECK(l_both.total ==
        doctest::Approx(0.5 * (l_first.total + l_second.total)).epsilon(1e-12));
  for (std::size_t i = 0; i < g_both.size(); ++i) {
    const double expected = 0.5 * (g_first[i] + g_second[i]);
    if (std::abs(expected) < 1e-12)
      CHECK(std::abs(g_both[i]) < 1e-12);
    else
      CHECK(g_both[i] == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("loss and gradients are bit-identical across repeats") {
  const QuadField field = generic_quad(6);
  const std::vector<TrainRay> batch = make_batch(16, 29);
  std::vector<double> g1(field.layout.total), g2(field.layout.total);
  const LossTerms l1 = loss_forward_backward(field, batch, 32, 1.3, g1);
  const LossTerms l2 = loss_forward_backward(field, batch, 32, 1.3, g2);
  CHECK(l1.total == l2.total);
  CHECK(g1 == g2);
}

TEST_CASE("numeric failures name the offending ray") {
  QuadField field = generic_quad(8);
  auto alpha_seg = field.segment_view("alpha_mlp");
  alpha_seg[alpha_seg.size() - 1] = std::numeric_limits<double>::quiet_NaN();  // b3
  const std::vector<TrainRay> batch = make_batch(4, 41);
  std::vector<double> grads(field.layout.total);
  CHECK_THROWS_WITH_AS(loss_forward_backward(field, batch, 16, 1.0, grads),
                       doctest::Contains("ray"), NumericError);
}

TEST_CASE("loss input validation") {
  const QuadField field = generic_quad(9);
  std::vector<double> grads(field.layout.total);
  CHECK_THROWS_AS(loss_forward_backward(field, {}, 16, 1.0, grads),
                  std::invalid_argument);
  const std::vector<TrainRay> batch = make_batch(2, 2);
  std::vector<double> wrong(3);
  CHECK_THROWS_AS(loss_forward_backward(field, batch, 16, 1.0, wrong),
                  std::invalid_argument);
  CHECK_THROWS_AS(loss_forward_backward(field, batch, 16, -1.0, grads),
                  std::invalid_argument);
}

TEST_CASE("adam: first step size approaches the learning rate") {
  std::vector<double> params{0.0};
  std::vector<double> grads{0.37};  // |g| >> eps
  AdamState state(AdamConfig{3e-4, 0.9, 0.999, 1e-8}, 1);
  adam_step(params, grads, state);
  CHECK(std::abs(params[0]) == doctest::Approx(3e-4).epsilon(1e-6));
  CHECK(state.t == 1);
}

TEST_CASE("adam: zero gradients leave parameters fixed") {
  std::vector<double> params{1.0, -2.0};
  const std::vector<double> grads{0.0, 0.0};
  AdamState state(AdamConfig{}, 2);
  adam_step(params, grads, state);
  CHECK(params == std::vector<double>{1.0, -2.0});
  CHECK(state.t == 1);
}

TEST_CASE("adam: converges on a 1-d quadratic") {
  std::vector<double> w{0.0};
  AdamState state(AdamConfig{0.1, 0.9, 0.999, 1e-8}, 1);
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> g{2.0 * (w[0] - 3.0)};
    adam_step(w, g, state);
  }
  CHECK(std::abs(w[0] - 3.0) < 1e-2);
}

TEST_CASE("adam: shape mismatch throws") {
  std::vector<double> params{1.0};
  const std::vector<double> grads{0.0, 0.0};
  AdamState state(AdamConfig{}, 1);
  CHECK_THROWS_AS(adam_step(params, grads, state), std::invalid_argument);
}
