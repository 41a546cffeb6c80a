#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tomo {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  AdamState() = default;
  AdamState(const AdamConfig& cfg, std::size_t n_params)
      : config(cfg), m(n_params, 0.0), v(n_params, 0.0) {}
};

/// Bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

}  // namespace tomo
