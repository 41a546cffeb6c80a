#include "tomo/hash_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tomo/rng.hpp"

namespace tomo {

namespace {
constexpr std::uint32_t kHashP2 = 2654435761u;
constexpr std::uint32_t kHashP3 = 805459861u;
}  // namespace

void HashGridConfig::validate() const {
  if (levels < 1) throw std::invalid_argument("hash grid: levels must be >= 1");
  if (table_size_log2 < 1 || table_size_log2 > 30)
    throw std::invalid_argument("hash grid: table_size_log2 out of range");
  if (n_min < 1) throw std::invalid_argument("hash grid: n_min must be >= 1");
  if (!(growth >= 1.0)) throw std::invalid_argument("hash grid: growth must be >= 1");
}

std::vector<int> HashGridConfig::resolutions() const {
  std::vector<int> res(levels);
  for (int l = 0; l < levels; ++l)
    res[l] = static_cast<int>(std::floor(n_min * std::pow(growth, l)));
  return res;
}

std::vector<std::int64_t> HashGridConfig::level_entries() const {
  const std::int64_t hashed = std::int64_t{1} << table_size_log2;
  std::vector<std::int64_t> entries;
  for (int n : resolutions()) {
    const std::int64_t dense = std::int64_t(n + 1) * (n + 1) * (n + 1);
    entries.push_back(std::min(dense, hashed));
  }
  return entries;
}

std::int64_t HashGridConfig::total_entries() const {
  std::int64_t total = 0;
  for (std::int64_t e : level_entries()) total += e;
  return total;
}

HashGridConfig HashGridConfig::with_max_resolution(int levels, int table_size_log2,
                                                   int n_min, int n_max) {
  HashGridConfig cfg;
  cfg.levels = levels;
  cfg.table_size_log2 = table_size_log2;
  cfg.n_min = n_min;
  // nudge upward so floor() lands exactly on n_max at the last level
  cfg.growth = levels > 1
                   ? std::exp(std::log(static_cast<double>(n_max) / n_min) / (levels - 1)) *
                         (1.0 + 1e-12)
                   : 1.0;
  cfg.validate();
  return cfg;
}

HashGrid HashGrid::create(const HashGridConfig& config, std::uint64_t seed) {
  config.validate();
  HashGrid grid;
  grid.config = config;
  grid.tables.resize(config.total_entries() * HashGridConfig::kFeaturesPerLevel);
  Rng rng(seed);
  for (double& v : grid.tables) v = rng.uniform(-1e-4, 1e-4);
  return grid;
}

std::int64_t cell_index(int level, const std::array<int, 3>& coords,
                        const HashGridConfig& config) {
  const int n = static_cast<int>(std::floor(config.n_min * std::pow(config.growth, level)));
  const std::int64_t dense = std::int64_t(n + 1) * (n + 1) * (n + 1);
  const std::int64_t hashed = std::int64_t{1} << config.table_size_log2;
  if (dense <= hashed)
    return (std::int64_t(coords[2]) * (n + 1) + coords[1]) * (n + 1) + coords[0];
  const std::uint32_t h = static_cast<std::uint32_t>(coords[0]) ^
                          (static_cast<std::uint32_t>(coords[1]) * kHashP2) ^
                          (static_cast<std::uint32_t>(coords[2]) * kHashP3);
  return static_cast<std::int64_t>(h & (static_cast<std::uint32_t>(hashed) - 1));
}

LevelStencil level_stencil(double x, double y, double z, int level, int resolution,
                           const HashGridConfig& config) {
  const int n = resolution;
  const double px = std::clamp(x, 0.0, 1.0) * n;
  const double py = std::clamp(y, 0.0, 1.0) * n;
  const double pz = std::clamp(z, 0.0, 1.0) * n;
  const int x0 = std::min(static_cast<int>(px), n - 1);
  const int y0 = std::min(static_cast<int>(py), n - 1);
  const int z0 = std::min(static_cast<int>(pz), n - 1);
  const double fx = px - x0;
  const double fy = py - y0;
  const double fz = pz - z0;

  const std::int64_t dense = std::int64_t(n + 1) * (n + 1) * (n + 1);
  const std::int64_t hashed = std::int64_t{1} << config.table_size_log2;
  const bool is_dense = dense <= hashed;

  LevelStencil st;
  int c = 0;
  for (int dz = 0; dz < 2; ++dz) {
    const double wz = dz ? fz : 1.0 - fz;
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? fy : 1.0 - fy;
      for (int dx = 0; dx < 2; ++dx) {
        const double wx = dx ? fx : 1.0 - fx;
        const int cx = x0 + dx;
        const int cy = y0 + dy;
        const int cz = z0 + dz;
        if (is_dense) {
          st.entry[c] = (std::int64_t(cz) * (n + 1) + cy) * (n + 1) + cx;
        } else {
          const std::uint32_t h = static_cast<std::uint32_t>(cx) ^
                                  (static_cast<std::uint32_t>(cy) * kHashP2) ^
                                  (static_cast<std::uint32_t>(cz) * kHashP3);
          st.entry[c] = static_cast<std::int64_t>(h & (static_cast<std::uint32_t>(hashed) - 1));
        }
        st.weight[c] = wx * wy * wz;
        ++c;
      }
    }
  }
  return st;
}

std::vector<double> encode(const HashGrid& grid, const Vec3& x) {
  const HashGridConfig& cfg = grid.config;
  constexpr int F = HashGridConfig::kFeaturesPerLevel;
  const std::vector<int> res = cfg.resolutions();
  const std::vector<std::int64_t> entries = cfg.level_entries();

  std::vector<double> out(static_cast<std::size_t>(cfg.levels) * F, 0.0);
  std::int64_t offset = 0;
  for (int l = 0; l < cfg.levels; ++l) {
    const LevelStencil st = level_stencil(x.x, x.y, x.z, l, res[l], cfg);
    for (int c = 0; c < 8; ++c) {
      const double* entry = grid.tables.data() + (offset + st.entry[c]) * F;
      const double w = st.weight[c];
      for (int f = 0; f < F; ++f) out[l * F + f] += w * entry[f];
    }
    offset += entries[l];
  }
  return out;
}

std::array<std::vector<double>, 4> split_features(std::span<const double> feat) {
  constexpr int F = HashGridConfig::kFeaturesPerLevel;
  if (feat.size() % F != 0)
    throw std::invalid_argument("split_features: length must be a multiple of 4");
  const std::size_t levels = feat.size() / F;
  std::array<std::vector<double>, 4> streams;
  for (auto& s : streams) s.resize(levels);
  for (std::size_t l = 0; l < levels; ++l)
    for (int k = 0; k < F; ++k) streams[k][l] = feat[l * F + k];
  return streams;
}

void encode_backward(const HashGrid& grid, const Vec3& x,
                     std::span<const double> upstream, std::span<double> grad_tables) {
  const HashGridConfig& cfg = grid.config;
  constexpr int F = HashGridConfig::kFeaturesPerLevel;
  if (upstream.size() != static_cast<std::size_t>(cfg.levels) * F)
    throw std::invalid_argument("encode_backward: upstream length mismatch");
  if (grad_tables.size() != grid.tables.size())
    throw std::invalid_argument("encode_backward: gradient buffer length mismatch");

  const std::vector<int> res = cfg.resolutions();
  const std::vector<std::int64_t> entries = cfg.level_entries();
  std::int64_t offset = 0;
  for (int l = 0; l < cfg.levels; ++l) {
    const LevelStencil st = level_stencil(x.x, x.y, x.z, l, res[l], cfg);
    for (int c = 0; c < 8; ++c) {
      double* gentry = grad_tables.data() + (offset + st.entry[c]) * F;
      const double w = st.weight[c];
      for (int f = 0; f < F; ++f) gentry[f] += w * upstream[l * F + f];
    }
    offset += entries[l];
  }
}

}  // namespace tomo
