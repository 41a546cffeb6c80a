#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tomo/volume.hpp"

namespace tomo {

struct PsnrResult {
  std::optional<double> db;  // absent when the volumes are identical
  bool identical = false;
};

/// 10 log10(range^2 / MSE); identical inputs are flagged instead of +inf.
PsnrResult psnr(const Volume& a, const Volume& b, double data_range);

/// Mean local SSIM over a sliding 7x7x7 uniform window (K1=0.01, K2=0.03).
double ssim(const Volume& a, const Volume& b, double data_range);

struct EvalReport {
  std::string method;
  int view_count = 0;
  std::uint64_t seed = 0;
  PsnrResult psnr;
  double ssim = 0.0;
  double seconds = 0.0;
  int iterations = 0;
};

}  // namespace tomo
