#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lsd/data.hpp"
#include "lsd/models.hpp"

namespace lsd {

using Bytes = std::vector<std::uint8_t>;

Bytes read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// VOXB: "VOXB", version 0x01, dx dy dz as u32 LE, then ceil(n / 8) payload
// bytes, bit-packed x-fastest, most significant bit first, zero pad bits.

inline constexpr std::uint8_t kVoxbVersion = 1;
inline constexpr std::size_t kVoxbHeaderSize = 17;

Bytes encode_voxb(const VoxelGrid& grid);
VoxelGrid decode_voxb(std::span<const std::uint8_t> bytes);
void write_voxb(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid read_voxb(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// LSDC checkpoints: "LSDC", version byte, model-kind byte, entry count (u32 LE),
// then per entry, sorted by name: name length (u32 LE), name bytes, rank
// (u32 LE), dims (u32 LE each), float32 LE values.

inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelKind kind = ModelKind::kVae;
  std::map<std::string, Tensor> entries;
};

Bytes encode_checkpoint(const Model& model);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Reads a checkpoint and rebuilds the model. Throws FormatError when the
/// stored kind differs from `expected`.
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path, ModelKind expected, const TrainConfig& base);

// ---------------------------------------------------------------------------
// CSV: comma separated, header row, '.' decimal point, '\n' line endings.

/// Shortest decimal text that parses back to the same double; "nan" for NaN.
std::string format_double(double value);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);
  std::size_t columns() const { return columns_; }

 private:
  std::ofstream out_;
  std::size_t columns_;
  std::filesystem::path path_;
};

/// Parses a CSV file written by CsvWriter (no quoting) into header + rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// P5 montage of `slices` evenly spaced planes perpendicular to `axis`, tiled
// left to right. Values are clamped to [0, 1] and mapped to 0..255.

struct Montage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

Montage slice_montage(std::span<const double> values, GridDims dims, std::size_t slices, int axis = 2);
Bytes encode_pgm(const Montage& montage);
void write_slice_montage(const std::filesystem::path& path, std::span<const double> values, GridDims dims,
                         std::size_t slices = 8, int axis = 2);
void write_slice_montage(const std::filesystem::path& path, const VoxelGrid& grid, std::size_t slices = 8,
                         int axis = 2);

}  // namespace lsd
