#include "tomo/volume.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tomo {

float Volume::max_value() const {
  float m = 0.0f;
  for (float v : data) m = std::max(m, v);
  return m;
}

float Volume::mean_value() const {
  if (data.empty()) return 0.0f;
  double sum = 0.0;
  for (float v : data) sum += v;
  return static_cast<float>(sum / data.size());
}

void Volume::validate() const {
  extent.validate();
  if (data.size() != extent.n_voxels())
    throw std::invalid_argument("volume: data length does not match extent");
  for (float v : data) {
    if (!std::isfinite(v) || v < 0.0f)
      throw std::invalid_argument("volume: values must be finite and >= 0");
  }
}

void TissueMasks::validate() const {
  alpha.validate();
  beta.validate();
  if (alpha.data.size() != beta.data.size())
    throw std::invalid_argument("masks: alpha/beta shapes differ");
  for (std::size_t i = 0; i < alpha.data.size(); ++i) {
    const float a = alpha.data[i];
    const float b = beta.data[i];
    if ((a != 0.0f && a != 1.0f) || (b != 0.0f && b != 1.0f))
      throw std::invalid_argument("masks: values must be binary");
    if (b > a) throw std::invalid_argument("masks: beta must lie inside alpha");
  }
}

}  // namespace tomo
