#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lsd/rng.hpp"

namespace lsd {

struct GridDims {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t z = 0;

  std::size_t count() const { return x * y * z; }
  bool operator==(const GridDims&) const = default;
};

std::string to_string(const GridDims& dims);

/// Binary occupancy volume, x-fastest: index = x + dx * (y + dy * z).
class VoxelGrid {
 public:
  VoxelGrid() = default;
  explicit VoxelGrid(GridDims dims, bool fill = false);
  VoxelGrid(GridDims dims, std::vector<std::uint8_t> voxels);

  /// Binarizes values at `threshold` (value >= threshold is occupied).
  static VoxelGrid from_values(GridDims dims, std::span<const double> values, double threshold = 0.5);

  const GridDims& dims() const { return dims_; }
  std::size_t size() const { return voxels_.size(); }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return x + dims_.x * (y + dims_.y * z); }

  bool at(std::size_t x, std::size_t y, std::size_t z) const { return voxels_[index(x, y, z)] != 0; }
  bool operator[](std::size_t i) const { return voxels_[i] != 0; }
  void set(std::size_t i, bool value) { voxels_[i] = value ? 1 : 0; }
  void set(std::size_t x, std::size_t y, std::size_t z, bool value) { set(index(x, y, z), value); }

  /// One byte per voxel, each 0 or 1.
  const std::vector<std::uint8_t>& voxels() const { return voxels_; }
  std::size_t occupied() const;
  double occupancy() const { return size() == 0 ? 0.0 : static_cast<double>(occupied()) / static_cast<double>(size()); }
  std::vector<double> values() const;

  bool operator==(const VoxelGrid&) const = default;

 private:
  GridDims dims_;
  std::vector<std::uint8_t> voxels_;
};

/// Number of 6-connected components of occupied voxels.
std::size_t count_components(const VoxelGrid& grid);

// ---------------------------------------------------------------------------
// Pseudo-vertebrae

/// A posterior process: a capped cylinder starting at `start` (relative to the
/// grid centre, in voxels) and running along the unit vector `direction`.
struct Cylinder {
  double start[3] = {0.0, 0.0, 0.0};
  double direction[3] = {0.0, -1.0, 0.0};
  double length = 8.0;
  double radius = 2.0;
};

struct ShapeParams {
  /// Body semi-axes along x, y, z in voxels.
  double a = 10.0;
  double b = 9.0;
  double c = 8.0;
  /// Superellipsoid exponent: |u/a|^e + |v/b|^e + |w/c|^e <= 1; e = 2 is an ellipsoid.
  double exponent = 2.0;
  std::vector<Cylinder> processes;
  /// Relative radial perturbation of the body surface.
  double noise_amplitude = 0.0;
  /// Seeds the surface-noise phases and frequencies.
  std::uint64_t seed = 0;
};

/// Draws parameters from the default distribution, scaled to the grid.
ShapeParams sample_shape_params(Rng& rng, GridDims dims = {32, 32, 32});

/// Superellipsoid body with posterior processes and smooth seeded surface
/// noise, centred in the grid. Throws GenerationError on an empty result.
VoxelGrid gen_pseudo_vertebra(const ShapeParams& params, GridDims dims = {32, 32, 32});

// ---------------------------------------------------------------------------
// Degradation

struct DegradeParams {
  std::size_t slab = 4;
  double threshold = 0.5;
  /// Through-plane axis: 0 = x, 1 = y, 2 = z.
  int axis = 2;
};

/// Averages occupancy over each through-plane slab, writes the average back to
/// every voxel of the slab and binarizes at the threshold.
VoxelGrid degrade_thick_slice(const VoxelGrid& hq, const DegradeParams& params);

// ---------------------------------------------------------------------------
// 2D shapes

enum class Shape2d { kDisc = 0, kCross = 1, kRing = 2 };

struct LabeledImage {
  Shape2d label = Shape2d::kDisc;
  /// size x size x 1 grid.
  VoxelGrid image;
};

/// `n` binary images cycling through discs, crosses and rings with random
/// position and size jitter.
std::vector<LabeledImage> gen_2d_shapes(std::size_t n, std::uint64_t seed, std::size_t size = 28);

// ---------------------------------------------------------------------------

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of {0..n-1} into round(fraction * n) training and the rest
/// test indices. Both sides must be non-empty.
SplitIndices split(std::size_t n, double train_fraction, std::uint64_t seed);

}  // namespace lsd
