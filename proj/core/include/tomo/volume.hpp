#pragma once

#include <cstddef>
#include <vector>

#include "tomo/geometry.hpp"

namespace tomo {

// Dense scalar grid of attenuation per world unit. Storage is float so that
// the f32le on-disk format round-trips bit-exactly; x varies fastest.
struct Volume {
  VolumeExtent extent;
  std::vector<float> data;

  Volume() = default;
  explicit Volume(const VolumeExtent& e)
      : extent(e), data(e.n_voxels(), 0.0f) {}

  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(iz) * extent.ny + iy) * extent.nx + ix;
  }
  float at(int ix, int iy, int iz) const { return data[index(ix, iy, iz)]; }
  float& at(int ix, int iy, int iz) { return data[index(ix, iy, iz)]; }

  float max_value() const;
  float mean_value() const;

  /// Checks shape, finiteness and non-negativity.
  void validate() const;
};

/// Binary object / hard-tissue masks over the same extent; beta <= alpha.
struct TissueMasks {
  Volume alpha;
  Volume beta;

  void validate() const;
};

}  // namespace tomo
