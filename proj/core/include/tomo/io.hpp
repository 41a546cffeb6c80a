#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "tomo/field.hpp"
#include "tomo/projection.hpp"
#include "tomo/training.hpp"
#include "tomo/volume.hpp"

namespace tomo::io {

// Grids and stacks persist as a raw little-endian float32 payload next to a
// JSON sidecar (same stem, .json extension). All writes are atomic
// (write-to-temp, rename).

void write_volume(const std::filesystem::path& payload_path, const Volume& vol,
                  const std::string& kind = "volume");
Volume read_volume(const std::filesystem::path& payload_path);

void write_stack(const std::filesystem::path& payload_path, const ProjectionStack& stack);
ProjectionStack read_stack(const std::filesystem::path& payload_path);

struct SliceMeta {
  std::string axis;  // "x" | "y" | "z"
  int index = 0;
  double window = 1.0;
  double level = 0.5;
};

/// 16-bit binary PGM with the window/level mapping recorded in a sidecar.
void write_pgm16(const std::filesystem::path& path, std::span<const float> image, int rows,
                 int cols, const SliceMeta& meta);

/// Self-contained checkpoint: magic, JSON header (configs + segment map),
/// float64 parameter blob in segment order.
void write_checkpoint(const std::filesystem::path& path, const FieldVariant& field);
FieldVariant read_checkpoint(const std::filesystem::path& path);

/// One JSON object per eval record. Timing fields are zeroed when
/// include_timing is false so deterministic reruns are byte-identical.
void write_train_log(const std::filesystem::path& path, const TrainLog& log,
                     bool include_timing);

void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace tomo::io
