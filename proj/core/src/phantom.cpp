#include "tomo/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tomo/rng.hpp"

namespace tomo {

namespace {

// Low-order 3D cosine series over normalized coordinates, scaled to [-1, 1].
// Gives the smooth intra-tissue variation of the phantom textures.
class CosineTexture {
 public:
  CosineTexture(Rng* rng, int n_terms) {
    double weight_sum = 0.0;
    for (int i = 0; i < n_terms; ++i) {
      Term t;
      do {
        t.hx = static_cast<int>(rng->below(4));
        t.hy = static_cast<int>(rng->below(4));
        t.hz = static_cast<int>(rng->below(4));
      } while (t.hx == 0 && t.hy == 0 && t.hz == 0);
      t.amplitude = rng->uniform(0.3, 1.0);
      t.phase = rng->uniform(0.0, 2.0 * M_PI);
      weight_sum += t.amplitude;
      terms_.push_back(t);
    }
    inv_weight_ = 1.0 / weight_sum;
  }

  // u in [0,1]^3
  double operator()(double ux, double uy, double uz) const {
    double s = 0.0;
    for (const Term& t : terms_)
      s += t.amplitude * std::cos(M_PI * (t.hx * ux + t.hy * uy + t.hz * uz) + t.phase);
    return s * inv_weight_;
  }

 private:
  struct Term {
    int hx, hy, hz;
    double amplitude, phase;
  };
  std::vector<Term> terms_;
  double inv_weight_ = 0.0;
};

struct Ellipsoid {
  Vec3 center;
  Vec3 semi;
  bool contains(const Vec3& q) const {
    const double dx = (q.x - center.x) / semi.x;
    const double dy = (q.y - center.y) / semi.y;
    const double dz = (q.z - center.z) / semi.z;
    return dx * dx + dy * dy + dz * dz <= 1.0;
  }
};

// Box rotated by `angle` about the z axis.
struct RotatedPrism {
  Vec3 center;
  Vec3 half;
  double cos_a = 1.0, sin_a = 0.0;
  bool contains(const Vec3& q) const {
    const double px = q.x - center.x;
    const double py = q.y - center.y;
    const double lx = cos_a * px + sin_a * py;
    const double ly = -sin_a * px + cos_a * py;
    return std::abs(lx) <= half.x && std::abs(ly) <= half.y &&
           std::abs(q.z - center.z) <= half.z;
  }
};

struct TorusSegment {
  Vec3 center;
  double major = 0.4;
  double minor = 0.1;
  double min_y = 0.0;  // keep only the anterior half
  bool contains(const Vec3& q) const {
    if (q.y - center.y < min_y) return false;
    const double px = q.x - center.x;
    const double py = q.y - center.y;
    const double ring = std::sqrt(px * px + py * py) - major;
    const double pz = q.z - center.z;
    return ring * ring + pz * pz <= minor * minor;
  }
};

}  // namespace

void PhantomSpec::validate() const {
  if (size < 16) throw std::invalid_argument("phantom: size must be >= 16");
  if (n_teeth < 0 || n_sinuses < 0)
    throw std::invalid_argument("phantom: counts must be >= 0");
  if (!(soft_level > 0.0 && soft_level < hard_level && hard_level <= 1.0))
    throw std::invalid_argument("phantom: requires 0 < soft_level < hard_level <= 1");
}

std::pair<Volume, TissueMasks> generate_head_phantom(const PhantomSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  VolumeExtent extent;
  extent.nx = extent.ny = extent.nz = spec.size;

  const CosineTexture soft_tex(&rng, 6);
  const CosineTexture hard_tex(&rng, 6);
  const double jitter = 0.03;

  // Anatomy in normalized coordinates q in [-1,1]^3; +y is anterior,
  // +z is superior. Structure centers get a small seeded jitter so distinct
  // seeds produce distinct anatomy. Thin plates, arches and cavities carry
  // most of the shape information; sparse views blur exactly these.
  const Ellipsoid head{{rng.uniform(-jitter, jitter), rng.uniform(-jitter, jitter), -0.02},
                       {0.70, 0.85, 0.80}};
  const Ellipsoid skull_outer{head.center + Vec3{0.0, 0.0, 0.14}, {0.56, 0.68, 0.60}};
  const Ellipsoid skull_inner{skull_outer.center,
                              {0.82 * 0.56, 0.82 * 0.68, 0.82 * 0.60}};

  TorusSegment jaw;
  jaw.center = head.center + Vec3{0.0, 0.10, -0.52};
  jaw.major = 0.40;
  jaw.minor = 0.10;
  jaw.min_y = 0.0;

  // thin curved arches running along the cheeks
  TorusSegment arch_ring;
  arch_ring.center = head.center + Vec3{0.0, 0.02, -0.18};
  arch_ring.major = 0.50;
  arch_ring.minor = 0.05;
  arch_ring.min_y = 0.10;

  std::vector<RotatedPrism> teeth;
  for (int i = 0; i < spec.n_teeth; ++i) {
    // spread across the anterior jaw arc
    const double frac = spec.n_teeth == 1 ? 0.5 : static_cast<double>(i) / (spec.n_teeth - 1);
    const double theta = (-70.0 + 140.0 * frac) * M_PI / 180.0 + rng.uniform(-0.02, 0.02);
    RotatedPrism tooth;
    tooth.center = jaw.center + Vec3{jaw.major * std::sin(theta),
                                     jaw.major * std::cos(theta), 0.16};
    tooth.half = {0.045, 0.045, 0.10};
    tooth.cos_a = std::cos(theta);
    tooth.sin_a = std::sin(theta);
    teeth.push_back(tooth);
  }

  // vertical mid-face plate between the nasal cavities
  RotatedPrism septum;
  septum.center = head.center + Vec3{0.0, 0.42, -0.18};
  septum.half = {0.035, 0.16, 0.22};

  // nasal airways on both sides of the septum
  std::vector<Ellipsoid> airways;
  airways.push_back({septum.center + Vec3{0.14, 0.0, 0.0}, {0.09, 0.13, 0.18}});
  airways.push_back({septum.center + Vec3{-0.14, 0.0, 0.0}, {0.09, 0.13, 0.18}});

  // orbital pockets with a hard rim, high in the face
  std::vector<Ellipsoid> orbits;
  std::vector<Ellipsoid> orbit_rims;
  for (const double side : {-1.0, 1.0}) {
    const Vec3 c = head.center + Vec3{side * 0.28, 0.47, 0.12};
    orbits.push_back({c, {0.10, 0.10, 0.10}});
    orbit_rims.push_back({c, {0.145, 0.145, 0.145}});
  }

  std::vector<Ellipsoid> sinuses;
  for (int i = 0; i < spec.n_sinuses; ++i) {
    // air pockets strictly inside the cranial cavity
    Ellipsoid s;
    s.semi = {rng.uniform(0.08, 0.14), rng.uniform(0.08, 0.14), rng.uniform(0.08, 0.14)};
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const Vec3 c{skull_inner.center.x + rng.uniform(-0.5, 0.5) * skull_inner.semi.x,
                   skull_inner.center.y + rng.uniform(-0.5, 0.5) * skull_inner.semi.y,
                   skull_inner.center.z + rng.uniform(-0.5, 0.5) * skull_inner.semi.z};
      const Vec3 margin = s.semi * 1.05;
      const double dx = (c.x - skull_inner.center.x) / (skull_inner.semi.x - margin.x);
      const double dy = (c.y - skull_inner.center.y) / (skull_inner.semi.y - margin.y);
      const double dz = (c.z - skull_inner.center.z) / (skull_inner.semi.z - margin.z);
      if (dx * dx + dy * dy + dz * dz <= 1.0) {
        s.center = c;
        break;
      }
    }
    sinuses.push_back(s);
  }

  // air pockets carved into the skull shell itself (mastoid-like cells)
  std::vector<Ellipsoid> shell_cells;
  for (int i = 0; i < 6; ++i) {
    const double theta = rng.uniform(-1.1, 1.1) + (i % 2 ? M_PI : 0.0);  // both sides
    const double zf = rng.uniform(-0.2, 0.55);
    const double rim = 0.91;
    shell_cells.push_back(
        {{skull_outer.center.x + rim * skull_outer.semi.x * std::sin(theta),
          skull_outer.center.y + rim * skull_outer.semi.y * std::cos(theta),
          skull_outer.center.z + zf * skull_outer.semi.z},
         {0.055, 0.055, 0.055}});
  }

  Volume vol(extent);
  TissueMasks masks{Volume(extent), Volume(extent)};

  const Vec3 lo = extent.min_corner;
  const Vec3 sz = extent.size();
  for (int iz = 0; iz < extent.nz; ++iz) {
    for (int iy = 0; iy < extent.ny; ++iy) {
      for (int ix = 0; ix < extent.nx; ++ix) {
        const Vec3 p = extent.voxel_center(ix, iy, iz);
        const double ux = (p.x - lo.x) / sz.x;
        const double uy = (p.y - lo.y) / sz.y;
        const double uz = (p.z - lo.z) / sz.z;
        const Vec3 q{2.0 * ux - 1.0, 2.0 * uy - 1.0, 2.0 * uz - 1.0};

        if (!head.contains(q)) continue;

        bool is_air = false;
        for (const Ellipsoid& s : sinuses)
          if (s.contains(q)) {
            is_air = true;
            break;
          }
        if (!is_air)
          for (const Ellipsoid& a : airways)
            if (a.contains(q)) {
              is_air = true;
              break;
            }
        if (!is_air)
          for (const Ellipsoid& o : orbits)
            if (o.contains(q)) {
              is_air = true;
              break;
            }
        if (!is_air)
          for (const Ellipsoid& cell : shell_cells)
            if (cell.contains(q)) {
              is_air = true;
              break;
            }
        if (is_air) continue;  // cavity: no material, masks stay 0

        bool is_hard = (skull_outer.contains(q) && !skull_inner.contains(q)) ||
                       jaw.contains(q) || septum.contains(q);
        if (!is_hard && arch_ring.contains(q) && !skull_inner.contains(q)) is_hard = true;
        if (!is_hard)
          for (const Ellipsoid& rim : orbit_rims)
            if (rim.contains(q)) {
              is_hard = true;
              break;
            }
        if (!is_hard)
          for (const RotatedPrism& tooth : teeth)
            if (tooth.contains(q)) {
              is_hard = true;
              break;
            }

        const std::size_t idx = vol.index(ix, iy, iz);
        masks.alpha.data[idx] = 1.0f;
        if (is_hard) {
          masks.beta.data[idx] = 1.0f;
          // hard band [0.8, 1.0] * hard_level
          vol.data[idx] = static_cast<float>(
              spec.hard_level * (0.9 + 0.1 * hard_tex(ux, uy, uz)));
        } else {
          // soft band +-10% around soft_level
          vol.data[idx] = static_cast<float>(
              spec.soft_level * (1.0 + 0.1 * soft_tex(ux, uy, uz)));
        }
      }
    }
  }
  return {std::move(vol), std::move(masks)};
}

TissueMasks threshold_masks(const Volume& vol, double t_alpha, double t_beta) {
  if (!(t_alpha >= 0.0 && t_alpha < t_beta))
    throw std::invalid_argument("threshold_masks: requires 0 <= t_alpha < t_beta");
  TissueMasks masks{Volume(vol.extent), Volume(vol.extent)};
  for (std::size_t i = 0; i < vol.data.size(); ++i) {
    masks.alpha.data[i] = vol.data[i] >= t_alpha ? 1.0f : 0.0f;
    masks.beta.data[i] = vol.data[i] >= t_beta ? 1.0f : 0.0f;
  }
  return masks;
}

std::pair<Volume, TissueMasks> add_foreign_bodies(const Volume& vol,
                                                  const TissueMasks& masks, int n,
                                                  double radius, double value,
                                                  std::uint64_t seed, double t_beta) {
  if (!(value > 0.0 && value <= 1.0))
    throw std::invalid_argument("add_foreign_bodies: value must be in (0, 1]");
  if (!(radius > 0.0))
    throw std::invalid_argument("add_foreign_bodies: radius must be positive");

  Volume out = vol;
  TissueMasks out_masks = masks;
  if (n == 0) return {std::move(out), std::move(out_masks)};

  const VolumeExtent& extent = vol.extent;
  const Vec3 vs = extent.voxel_size();
  const double voxel_diag = vs.norm();
  Rng rng(seed);

  // A ball fits at center c if every voxel within `radius` is soft tissue
  // (alpha without beta) in the INPUT masks.
  auto ball_fits = [&](const Vec3& c) {
    const int rx = static_cast<int>(std::ceil(radius / vs.x)) + 1;
    const int ry = static_cast<int>(std::ceil(radius / vs.y)) + 1;
    const int rz = static_cast<int>(std::ceil(radius / vs.z)) + 1;
    const int cx = static_cast<int>((c.x - extent.min_corner.x) / vs.x);
    const int cy = static_cast<int>((c.y - extent.min_corner.y) / vs.y);
    const int cz = static_cast<int>((c.z - extent.min_corner.z) / vs.z);
    for (int iz = cz - rz; iz <= cz + rz; ++iz)
      for (int iy = cy - ry; iy <= cy + ry; ++iy)
        for (int ix = cx - rx; ix <= cx + rx; ++ix) {
          if (ix < 0 || iy < 0 || iz < 0 || ix >= extent.nx || iy >= extent.ny ||
              iz >= extent.nz)
            return false;
          const Vec3 p = extent.voxel_center(ix, iy, iz);
          if ((p - c).norm() > radius) continue;
          const std::size_t idx = vol.index(ix, iy, iz);
          if (masks.alpha.data[idx] != 1.0f || masks.beta.data[idx] != 0.0f)
            return false;
        }
    return true;
  };

  std::vector<Vec3> centers;
  for (int placed = 0; placed < n; ++placed) {
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      const int ix = static_cast<int>(rng.below(extent.nx));
      const int iy = static_cast<int>(rng.below(extent.ny));
      const int iz = static_cast<int>(rng.below(extent.nz));
      const Vec3 c = extent.voxel_center(ix, iy, iz);
      if (!ball_fits(c)) continue;
      bool overlaps = false;
      for (const Vec3& prev : centers)
        // keep a one-voxel gap so the balls stay disconnected
        if ((prev - c).norm() < 2.0 * radius + 2.0 * voxel_diag) {
          overlaps = true;
          break;
        }
      if (overlaps) continue;
      centers.push_back(c);
      ok = true;
    }
    if (!ok)
      throw PlacementError("add_foreign_bodies: could not place ball " +
                           std::to_string(placed + 1) + " of " + std::to_string(n) +
                           " after 1000 attempts");
  }

  for (const Vec3& c : centers) {
    for (int iz = 0; iz < extent.nz; ++iz)
      for (int iy = 0; iy < extent.ny; ++iy)
        for (int ix = 0; ix < extent.nx; ++ix) {
          const Vec3 p = extent.voxel_center(ix, iy, iz);
          if ((p - c).norm() > radius) continue;
          const std::size_t idx = out.index(ix, iy, iz);
          out.data[idx] = static_cast<float>(value);
          out_masks.alpha.data[idx] = 1.0f;
          if (value >= t_beta) out_masks.beta.data[idx] = 1.0f;
        }
  }
  return {std::move(out), std::move(out_masks)};
}

Volume clip_hard_tissue(const Volume& vol, double cap) {
  if (!(cap > 0.0)) throw std::invalid_argument("clip_hard_tissue: cap must be positive");
  Volume out = vol;
  const float fcap = static_cast<float>(cap);
  for (float& v : out.data) v = std::min(v, fcap);
  return out;
}

}  // namespace tomo
