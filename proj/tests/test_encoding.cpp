#include <doctest.h>

#include <cmath>
#include <set>

#include "tomo/hash_grid.hpp"
#include "tomo/rng.hpp"

using namespace tomo;

namespace {

HashGridConfig tiny_config() {
  // level 0 dense (3^3 = 27 entries), level 1 hashed (9^3 > 2^6)
  HashGridConfig cfg;
  cfg.levels = 2;
  cfg.table_size_log2 = 6;
  cfg.n_min = 2;
  cfg.growth = 4.0;
  return cfg;
}

}  // namespace

TEST_CASE("preset resolutions are non-decreasing and land on the target") {
  const HashGridConfig desk = HashGridConfig::desk_preset();
  const auto res = desk.resolutions();
  REQUIRE(static_cast<int>(res.size()) == desk.levels);
  CHECK(res.front() == 8);
  CHECK(res.back() == 64);
  for (std::size_t i = 1; i < res.size(); ++i) CHECK(res[i] >= res[i - 1]);

  const HashGridConfig full = HashGridConfig::full_preset();
  CHECK(full.resolutions().back() == 256);
}

TEST_CASE("cell_index: dense levels are row-major and injective") {
  const HashGridConfig cfg = tiny_config();
  CHECK(cell_index(0, {0, 0, 0}, cfg) == 0);

  std::set<std::int64_t> seen;
  const int n = cfg.resolutions()[0];  // 2 -> 3 vertices per axis
  for (int z = 0; z <= n; ++z)
    for (int y = 0; y <= n; ++y)
      for (int x = 0; x <= n; ++x) seen.insert(cell_index(0, {x, y, z}, cfg));
  CHECK(seen.size() == static_cast<std::size_t>((n + 1) * (n + 1) * (n + 1)));
}

TEST_CASE("cell_index: hashed levels stay within the table") {
  const HashGridConfig cfg = tiny_config();
  const std::int64_t table = std::int64_t{1} << cfg.table_size_log2;
  Rng rng(4);
  for (int i = 0; i < 1000000; ++i) {
    const std::array<int, 3> coords{static_cast<int>(rng.below(1 << 20)),
                                    static_cast<int>(rng.below(1 << 20)),
                                    static_cast<int>(rng.below(1 << 20))};
    const std::int64_t idx = cell_index(1, coords, cfg);
    CHECK(idx >= 0);
    CHECK(idx < table);
  }
}

TEST_CASE("encode returns table entries at grid vertices") {
  const HashGridConfig cfg = tiny_config();
  HashGrid grid = HashGrid::create(cfg, 7);
  Rng rng(8);
  for (double& v : grid.tables) v = rng.uniform(-1.0, 1.0);

  // vertex (1, 2, 0) of level 0 (resolution 2) lies at x = (0.5, 1.0, 0.0)
  const Vec3 x{0.5, 1.0, 0.0};
  const auto feat = encode(grid, x);
  const std::int64_t entry = cell_index(0, {1, 2, 0}, cfg);
  for (int f = 0; f < 4; ++f)
    CHECK(feat[f] == doctest::Approx(grid.tables[entry * 4 + f]).epsilon(1e-12));
}

TEST_CASE("trilinear stencil weights form a partition of unity") {
  const HashGridConfig cfg = tiny_config();
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const LevelStencil st =
        level_stencil(rng.uniform(), rng.uniform(), rng.uniform(), 1, 9, cfg);
    double sum = 0.0;
    for (double w : st.weight) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("single-cell grid interpolates the corner mean at the center") {
  HashGridConfig cfg;
  cfg.levels = 1;
  cfg.table_size_log2 = 10;
  cfg.n_min = 1;
  cfg.growth = 1.0;
  HashGrid grid = HashGrid::create(cfg, 0);
  Rng rng(5);
  for (double& v : grid.tables) v = rng.uniform(0.0, 1.0);

  const auto feat = encode(grid, {0.5, 0.5, 0.5});
  for (int f = 0; f < 4; ++f) {
    double mean = 0.0;
    for (int corner = 0; corner < 8; ++corner) mean += grid.tables[corner * 4 + f];
    mean /= 8.0;
    CHECK(feat[f] == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("split_features separates the four per-level streams") {
  const std::vector<double> feat{1, 2, 3, 4, 5, 6, 7, 8};  // L = 2
  const auto streams = split_features(feat);
  CHECK(streams[0] == std::vector<double>{1, 5});
  CHECK(streams[1] == std::vector<double>{2, 6});
  CHECK(streams[2] == std::vector<double>{3, 7});
  CHECK(streams[3] == std::vector<double>{4, 8});

  // reassembly is a permutation of the input
  std::vector<double> back(feat.size());
  for (std::size_t l = 0; l < 2; ++l)
    for (int k = 0; k < 4; ++k) back[l * 4 + k] = streams[k][l];
  CHECK(back == feat);

  CHECK_THROWS_AS(split_features(std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("perturbing one feature component moves only its stream") {
  const HashGridConfig cfg = tiny_config();
  HashGrid grid = HashGrid::create(cfg, 3);
  const Vec3 x{0.31, 0.77, 0.12};
  const auto before = split_features(encode(grid, x));

  // bump component 2 (the vb stream) of every entry at level 0
  for (std::int64_t e = 0; e < cfg.level_entries()[0]; ++e) grid.tables[e * 4 + 2] += 0.5;
  const auto after = split_features(encode(grid, x));

  CHECK(after[0] == before[0]);
  CHECK(after[1] == before[1]);
  CHECK(after[3] == before[3]);
  CHECK(after[2] != before[2]);
}

TEST_CASE("encode is continuous across cell boundaries") {
  const HashGridConfig cfg = HashGridConfig::desk_preset();
  const HashGrid grid = HashGrid::create(cfg, 19);
  const double delta = 1e-6;
  // straddle vertices of the finest level (resolution 64)
  for (double boundary : {1.0 / 64, 31.0 / 64, 0.5}) {
    const auto lo = encode(grid, {boundary - delta, 0.4, 0.6});
    const auto hi = encode(grid, {boundary + delta, 0.4, 0.6});
    for (std::size_t i = 0; i < lo.size(); ++i)
      CHECK(std::abs(lo[i] - hi[i]) < 1e-7);
  }
}

TEST_CASE("encode_backward matches finite differences") {
  const HashGridConfig cfg = tiny_config();
  HashGrid grid = HashGrid::create(cfg, 23);
  Rng rng(31);
  for (double& v : grid.tables) v = rng.uniform(-1.0, 1.0);

  const Vec3 x{0.63, 0.24, 0.85};
  std::vector<double> upstream(cfg.levels * 4);
  for (double& u : upstream) u = rng.uniform(-1.0, 1.0);

  std::vector<double> grad(grid.tables.size(), 0.0);
  encode_backward(grid, x, upstream, grad);

  // F(tables) = dot(encode(x), upstream)
  const auto scalar = [&](const HashGrid& g) {
    const auto feat = encode(g, x);
    double s = 0.0;
    for (std::size_t i = 0; i < feat.size(); ++i) s += feat[i] * upstream[i];
    return s;
  };

  int checked = 0;
  const double h = 1e-3;
  for (int trial = 0; trial < 300 && checked < 100; ++trial) {
    const std::size_t i = rng.below(grid.tables.size());
    HashGrid plus = grid;
    plus.tables[i] += h;
    HashGrid minus = grid;
    minus.tables[i] -= h;
    const double fd = (scalar(plus) - scalar(minus)) / (2.0 * h);
    if (std::abs(grad[i]) < 1e-6) {
      CHECK(std::abs(fd) < 1e-6);
    } else {
      CHECK(fd == doctest::Approx(grad[i]).epsilon(1e-3));
      ++checked;
    }
  }
  CHECK(checked >= 20);  // enough touched entries sampled

  // a point exactly at a vertex sends its full gradient to one entry per level
  std::vector<double> vert_grad(grid.tables.size(), 0.0);
  encode_backward(grid, {0.0, 0.0, 0.0}, upstream, vert_grad);
  const std::int64_t level0_entry = cell_index(0, {0, 0, 0}, cfg);
  for (int f = 0; f < 4; ++f)
    CHECK(vert_grad[level0_entry * 4 + f] == doctest::Approx(upstream[f]).epsilon(1e-12));

  std::vector<double> zero_grad(grid.tables.size(), 0.0);
  const std::vector<double> zero_upstream(cfg.levels * 4, 0.0);
  encode_backward(grid, x, zero_upstream, zero_grad);
  for (double gball : zero_grad) CHECK(gball == 0.0);
}

TEST_CASE("grid initialization is small and deterministic") {
  const HashGridConfig cfg = tiny_config();
  const HashGrid a = HashGrid::create(cfg, 77);
  const HashGrid b = HashGrid::create(cfg, 77);
  CHECK(a.tables == b.tables);
  for (double v : a.tables) {
    CHECK(v >= -1e-4);
    CHECK(v <= 1e-4);
  }
}
