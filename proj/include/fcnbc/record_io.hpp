#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fcnbc/field.hpp"

namespace fcnbc {

inline constexpr std::uint32_t kRecordFormatVersion = 1;
inline constexpr std::uint32_t kManifestFormatVersion = 1;
inline constexpr std::size_t kRecordHeaderBytes = 16;

/// Record file layout (all little-endian):
///   bytes 0..7   magic "FCNBCREC"
///   bytes 8..11  u32 format version
///   bytes 12..15 u32 metadata block length M
///   M bytes      metadata: a sequence of [u32 length][bytes] fields in the order
///                height, width, frames, physics, bc, dx, dt_frame, c0_or_alpha,
///                pulses (u32 count then 4 f64 per pulse), seed
///   payload      frames x height x width IEEE-754 binary32, frame-major, row-major
void write_record(const SimulationRecord& record, const std::filesystem::path& path);
SimulationRecord read_record(const std::filesystem::path& path);

/// Byte offset of the float payload inside a record file.
std::size_t record_payload_offset(const std::filesystem::path& path);

/// Everything needed to regenerate a dataset (and to extend its ground truth).
struct DatasetSpec {
  Physics physics = Physics::wave;
  BoundaryKind bc = BoundaryKind::reflecting;
  Index count = 60;
  Index train_count = 50;
  Index n = 64;
  Index frames = 74;
  double dx = 0.5;
  double dt = 0.25;          // solver step
  double c0_or_alpha = 1.0;  // wave speed or diffusivity
  Index frame_stride = 1;    // solver steps per stored frame
  Index min_pulses = 1;
  Index max_pulses = 5;
  double amplitude = 0.001;
  double half_width = 8.0;  // grid units
  std::uint64_t seed = 1;

  double dt_frame() const { return dt * static_cast<double>(frame_stride); }
};

enum class Split : std::uint8_t { train, validation };

struct ManifestEntry {
  std::string path;  // relative to the manifest directory
  Split split = Split::train;
  Index frames = 0;
  Index height = 0;
  Index width = 0;
  std::uint64_t seed = 0;
  std::vector<PulseSpec> pulses;
};

struct DatasetManifest {
  std::uint32_t format_version = kManifestFormatVersion;
  DatasetSpec spec;
  std::vector<ManifestEntry> records;
  std::filesystem::path directory;  // not serialized; set on load

  std::vector<Index> indices(Split split) const;
  SimulationRecord load(Index i) const;
  std::vector<SimulationRecord> load_split(Split split) const;
};

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace fcnbc
