#pragma once

#include <string>

#include "tomo/baselines.hpp"
#include "tomo/geometry.hpp"
#include "tomo/phantom.hpp"
#include "tomo/training.hpp"

namespace tomo {

// Everything a run needs, loadable from a strict JSON file (unknown keys are
// rejected at every level). A "scale" preset seeds the defaults; explicit
// keys override them.
struct RunConfig {
  std::string scale = "desk";  // "desk" | "full"
  ScannerGeometry geometry;    // angles left empty; trajectory fills them
  int n_views = 20;
  double range_deg = 180.0;
  PhantomSpec phantom;
  TrainConfig train;
  SartConfig sart;
  FdkConfig fdk;
  std::string out_dir = "out";
  bool deterministic = false;

  void validate() const;

  /// Geometry with angles from make_circular_trajectory(n_views, range_deg).
  ScannerGeometry geometry_with_trajectory() const;
  ScannerGeometry geometry_with_trajectory(int views) const;

  /// Reconstruction grid: phantom.size^3 voxels over the default unit box.
  VolumeExtent recon_extent() const;

  static RunConfig desk_config();
  static RunConfig full_config();
};

RunConfig parse_run_config(const std::string& json_text);
std::string to_json_text(const RunConfig& config);

}  // namespace tomo
