#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "tomo/field.hpp"
#include "tomo/projection.hpp"
#include "tomo/rng.hpp"

using namespace tomo;

namespace {

HashGridConfig small_grid() { return HashGridConfig::with_max_resolution(4, 12, 4, 16); }

VolumeExtent unit_extent(int n) {
  VolumeExtent e;
  e.nx = e.ny = e.nz = n;
  return e;
}

// Pin a branch output by saturating its output bias.
void pin_output(QuadField& field, const std::string& segment, double bias) {
  auto seg = field.segment_view(segment);
  if (segment == "vb_map" || segment == "vs_map") {
    seg[field.grid_config.levels] = bias;
  } else {
    seg[seg.size() - 1] = bias;
  }
}

}  // namespace

TEST_CASE("zeroed tables reduce every branch to sigmoid of its output bias") {
  QuadField field = QuadField::create(small_grid(), unit_extent(16), 5);
  auto tables = field.segment_view("tables");
  std::fill(tables.begin(), tables.end(), 0.0);

  // shape branches start at 0.5; value branches start at the low-attenuation
  // prior 0.3
  const FieldComponents c = eval_components(field, {0.3, 0.6, 0.9});
  CHECK(c.alpha == doctest::Approx(0.5));
  CHECK(c.beta == doctest::Approx(0.5));
  CHECK(c.vb == doctest::Approx(0.3));
  CHECK(c.vs == doctest::Approx(0.3));

  // and with the biases cleared too, everything sits at 0.5 by symmetry
  field.segment_view("vb_map")[field.grid_config.levels] = 0.0;
  field.segment_view("vs_map")[field.grid_config.levels] = 0.0;
  const FieldComponents c0 = eval_components(field, {0.3, 0.6, 0.9});
  CHECK(c0.vb == doctest::Approx(0.5));
  CHECK(c0.vs == doctest::Approx(0.5));
}

TEST_CASE("components stay strictly inside (0,1)") {
  QuadField field = QuadField::create(small_grid(), unit_extent(16), 6);
  Rng rng(10);
  // moderate weights so the preactivations stay below sigmoid saturation
  for (double& p : field.params) p = rng.uniform(-0.1, 0.1);
  field.segment_view("rho")[0] = 0.7;

  for (int i = 0; i < 200; ++i) {
    const FieldComponents c =
        eval_components(field, {rng.uniform(), rng.uniform(), rng.uniform()});
    for (double v : {c.alpha, c.beta, c.vb, c.vs}) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }

  // extreme weights may round to the interval endpoints but never leave [0,1]
  for (double& p : field.params) p = rng.uniform(-100.0, 100.0);
  for (int i = 0; i < 50; ++i) {
    const FieldComponents c =
        eval_components(field, {rng.uniform(), rng.uniform(), rng.uniform()});
    for (double v : {c.alpha, c.beta, c.vb, c.vs}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("epsilon is positive, bounded and starts at 1e-3") {
  const QuadField field = QuadField::create(small_grid(), unit_extent(16), 1);
  CHECK(field.epsilon() == doctest::Approx(1e-3).epsilon(1e-9));

  QuadField big = field;
  big.segment_view("rho")[0] = 30.0;
  CHECK(big.epsilon() < 0.05);
  big.segment_view("rho")[0] = 1e9;  // saturates onto the bound in floating point
  CHECK(big.epsilon() <= 0.05);
  big.segment_view("rho")[0] = -1e9;
  CHECK(big.epsilon() >= 0.0);
}

TEST_CASE("beta stream perturbations leave the other branches fixed") {
  QuadField field = QuadField::create(small_grid(), unit_extent(16), 8);
  Rng rng(2);
  auto tables = field.segment_view("tables");
  for (double& v : tables) v = rng.uniform(-0.5, 0.5);

  const Vec3 x{0.4, 0.5, 0.6};
  const FieldComponents before = eval_components(field, x);
  for (std::size_t e = 0; e < tables.size() / 4; ++e) tables[e * 4 + 1] += 0.3;
  const FieldComponents after = eval_components(field, x);

  CHECK(after.alpha == before.alpha);
  CHECK(after.vb == before.vb);
  CHECK(after.vs == before.vs);
  CHECK(after.beta != before.beta);
}

TEST_CASE("compose_sigma hand values") {
  CHECK(compose_sigma(1, 0, 0.7, 0.5, 0) == doctest::Approx(0.5));
  CHECK(compose_sigma(1, 1, 0.4, 0.3, 0) == doctest::Approx(0.7));
  CHECK(compose_sigma(1, 0, 0.4, 0.3, 0) == doctest::Approx(0.3));
  CHECK(compose_sigma(0, 0, 0.9, 0.3, 0.01) == doctest::Approx(0.003));
}

TEST_CASE("sigma is non-negative and monotone in beta when vb > 0") {
  Rng rng(33);
  for (int i = 0; i < 100000; ++i) {
    const double a = rng.uniform(), b = rng.uniform(), vb = rng.uniform(),
                 vs = rng.uniform();
    const double eps = rng.uniform(0.0, 0.05);
    const double sigma = compose_sigma(a, b, vb, vs, eps);
    CHECK(sigma >= 0.0);
    if (vb > 0.0) {
      const double bumped = compose_sigma(a, std::min(1.0, b + 1e-3), vb, vs, eps);
      if (b + 1e-3 <= 1.0) CHECK(bumped > sigma);
    }
  }
}

TEST_CASE("render_ray of a pinned constant field integrates exactly") {
  QuadField field = QuadField::create(small_grid(), unit_extent(16), 9);
  auto tables = field.segment_view("tables");
  std::fill(tables.begin(), tables.end(), 0.0);
  pin_output(field, "alpha_mlp", 1000.0);   // alpha = 1 exactly
  pin_output(field, "beta_mlp", -1000.0);   // beta = 0 exactly
  pin_output(field, "vs_map", 0.0);         // vs = 0.5
  field.segment_view("rho")[0] = -1000.0;   // eps = 0

  Ray ray{{-2, 0, 0}, {1, 0, 0}, 0.0, 10.0};
  const RenderedRay r = render_ray(field, ray, 64);
  CHECK(r.sigma_acc == doctest::Approx(0.5).epsilon(1e-9));  // 0.5 * chord 1.0
  CHECK(r.alpha_acc == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.beta_acc == doctest::Approx(0.0));

  const RenderedRay single_sample = render_ray(field, ray, 1);
  CHECK(single_sample.sigma_acc == doctest::Approx(0.5).epsilon(1e-9));

  Ray miss{{-2, 5, 0}, {1, 0, 0}, 0.0, 10.0};
  const RenderedRay zero = render_ray(field, miss, 16);
  CHECK(zero.sigma_acc == 0.0);
  CHECK(zero.alpha_acc == 0.0);
}

TEST_CASE("rendered rays agree with projecting the extracted grid") {
  QuadField field = QuadField::create(small_grid(), unit_extent(32), 12);
  Rng rng(13);
  auto tables = field.segment_view("tables");
  for (double& v : tables) v = rng.uniform(-0.05, 0.05);

  const Volume grid_volume = extract_volume(field, unit_extent(32));

  ScannerGeometry geom;
  geom.det_rows = geom.det_cols = 17;
  geom.det_pixel_pitch = 3.0 / 17;
  geom.angles_deg = make_circular_trajectory(2, 180.0);
  const ProjectionStack proj = project_volume(grid_volume, geom, 128);

  for (int view = 0; view < 2; ++view)
    for (int row : {4, 8, 12})
      for (int col : {4, 8, 12}) {
        const Ray ray = ray_for_pixel(geom, view, row, col);
        const RenderedRay r = render_ray(field, ray, 128);
        const double reference = proj.at(view, row, col);
        if (reference > 1e-6)
          CHECK(r.sigma_acc == doctest::Approx(reference).epsilon(0.02));
      }
}

TEST_CASE("extraction is deterministic and composes exactly") {
  QuadField field = QuadField::create(small_grid(), unit_extent(16), 21);
  Rng rng(55);
  for (double& v : field.segment_view("tables")) v = rng.uniform(-0.4, 0.4);

  const FieldVolumes parts = extract_components(field, unit_extent(16));
  const Volume direct = extract_volume(field, unit_extent(16));
  CHECK(parts.sigma.data == direct.data);

  const double eps = field.epsilon();
  for (std::size_t i = 0; i < direct.data.size(); ++i) {
    const double composed = compose_sigma(parts.alpha.data[i], parts.beta.data[i],
                                          parts.vb.data[i], parts.vs.data[i], eps);
    CHECK(static_cast<double>(direct.data[i]) == doctest::Approx(composed).epsilon(1e-6));
    CHECK(direct.data[i] >= 0.0f);
  }

  const Volume again = extract_volume(field, unit_extent(16));
  CHECK(again.data == direct.data);
}

TEST_CASE("non-finite parameters surface as numeric failures") {
  QuadField field = QuadField::create(small_grid(), unit_extent(16), 2);
  field.segment_view("alpha_mlp")[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(eval_components(field, {0.5, 0.5, 0.5}), NumericError);
}

TEST_CASE("single field parameter count matches the quad build within 2%") {
  for (const HashGridConfig& cfg : {small_grid(), HashGridConfig::desk_preset()}) {
    const QuadField quad = QuadField::create(cfg, unit_extent(16), 3);
    const SingleField single = SingleField::create(cfg, unit_extent(16), 3);
    const double rel = std::abs(double(param_count(single) - param_count(quad))) /
                       double(param_count(quad));
    CHECK(rel <= 0.02);
    CHECK(single.mlp.input == cfg.levels * 4);
    CHECK(single.mlp.hidden > 32);  // undivided input warrants the larger MLP
  }
}

TEST_CASE("single field renders sigma only") {
  const SingleField field = SingleField::create(small_grid(), unit_extent(16), 4);
  const double sigma = eval_sigma(field, {0.5, 0.5, 0.5});
  CHECK(sigma > 0.0);
  CHECK(sigma < 1.0);

  Ray ray{{-2, 0, 0}, {1, 0, 0}, 0.0, 10.0};
  const RenderedRay r = render_ray(field, ray, 32);
  CHECK(r.sigma_acc > 0.0);
  CHECK(r.alpha_acc == 0.0);
  CHECK(r.beta_acc == 0.0);
}
