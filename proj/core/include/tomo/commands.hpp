#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tomo/run_config.hpp"

namespace tomo {

// Command implementations backing the CLI. Each throws on failure; the CLI
// turns exceptions into a machine-readable error record and a nonzero exit.
// File outputs are atomic.

/// Writes volume.f32 plus the construction-time masks into out_dir.
void cmd_phantom(const RunConfig& config, const std::filesystem::path& out_dir);

/// Simulates the acquisition of a stored volume: sigma.f32 plus tissue-target
/// stacks alpha.f32 / beta.f32 (thresholded with the configured thresholds).
void cmd_project(const RunConfig& config, const std::filesystem::path& volume_payload,
                 const std::filesystem::path& out_dir);

/// Reconstructs from a projected scene directory. Neural methods also write a
/// checkpoint and a JSONL training log; ground truth is required for their
/// progress metrics.
void cmd_reconstruct(const RunConfig& config, const std::string& method,
                     const std::filesystem::path& projections_dir,
                     const std::optional<std::filesystem::path>& truth_payload,
                     const std::filesystem::path& out_dir);

/// Volume-vs-volume quality report.
void cmd_eval(const std::filesystem::path& recon_payload,
              const std::filesystem::path& truth_payload,
              const std::filesystem::path& out_file);

/// 16-bit PGM slice with window/level mapping.
void cmd_slice(const std::filesystem::path& volume_payload, const std::string& axis,
               int index, double window, double level,
               const std::filesystem::path& out_file);

/// Full comparison grid: phantom -> projections per view count ->
/// reconstruction + evaluation per method and seed. Writes matrix.json and a
/// plain-text table.
void cmd_matrix(const RunConfig& config, const std::vector<int>& view_counts,
                const std::vector<std::string>& methods,
                const std::vector<std::uint64_t>& seeds,
                const std::filesystem::path& out_dir);

}  // namespace tomo
