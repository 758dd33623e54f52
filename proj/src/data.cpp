#include "lsd/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "lsd/errors.hpp"

namespace lsd {

std::string to_string(const GridDims& dims) {
  return std::to_string(dims.x) + "x" + std::to_string(dims.y) + "x" + std::to_string(dims.z);
}

VoxelGrid::VoxelGrid(GridDims dims, bool fill) : dims_(dims), voxels_(dims.count(), fill ? 1 : 0) {}

VoxelGrid::VoxelGrid(GridDims dims, std::vector<std::uint8_t> voxels) : dims_(dims), voxels_(std::move(voxels)) {
  if (voxels_.size() != dims_.count()) {
    throw ContractError("VoxelGrid: " + std::to_string(voxels_.size()) + " voxels do not match dims " +
                        to_string(dims_));
  }
  for (auto& v : voxels_) {
    if (v > 1) throw ContractError("VoxelGrid: voxel values must be 0 or 1");
  }
}

VoxelGrid VoxelGrid::from_values(GridDims dims, std::span<const double> values, double threshold) {
  if (values.size() != dims.count()) {
    throw ContractError("VoxelGrid::from_values: " + std::to_string(values.size()) + " values do not match dims " +
                        to_string(dims));
  }
  VoxelGrid grid(dims);
  for (std::size_t i = 0; i < values.size(); ++i) grid.voxels_[i] = values[i] >= threshold ? 1 : 0;
  return grid;
}

std::size_t VoxelGrid::occupied() const {
  return static_cast<std::size_t>(std::count(voxels_.begin(), voxels_.end(), std::uint8_t{1}));
}

std::vector<double> VoxelGrid::values() const { return {voxels_.begin(), voxels_.end()}; }

std::size_t count_components(const VoxelGrid& grid) {
  const GridDims d = grid.dims();
  std::vector<std::uint8_t> seen(grid.size(), 0);
  std::vector<std::size_t> stack;
  std::size_t components = 0;
  for (std::size_t start = 0; start < grid.size(); ++start) {
    if (!grid[start] || seen[start]) continue;
    ++components;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const std::size_t x = i % d.x, y = (i / d.x) % d.y, z = i / (d.x * d.y);
      auto visit = [&](std::size_t j) {
        if (grid[j] && !seen[j]) {
          seen[j] = 1;
          stack.push_back(j);
        }
      };
      if (x > 0) visit(i - 1);
      if (x + 1 < d.x) visit(i + 1);
      if (y > 0) visit(i - d.x);
      if (y + 1 < d.y) visit(i + d.x);
      if (z > 0) visit(i - d.x * d.y);
      if (z + 1 < d.z) visit(i + d.x * d.y);
    }
  }
  return components;
}

// ---------------------------------------------------------------------------

namespace {

double lerp(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

// Smooth angular perturbation: mean of three sinusoids of the direction.
struct SurfaceNoise {
  std::array<std::array<double, 3>, 3> axis{};
  std::array<double, 3> freq{};
  std::array<double, 3> phase{};

  explicit SurfaceNoise(std::uint64_t seed) {
    Rng rng(seed, 0x5eed);
    for (int k = 0; k < 3; ++k) {
      double n = 0.0;
      for (auto& v : axis[k]) {
        v = rng.normal();
        n += v * v;
      }
      n = std::sqrt(n);
      for (auto& v : axis[k]) v /= n;
      freq[k] = lerp(rng, 2.0, 5.0);
      phase[k] = lerp(rng, 0.0, 2.0 * std::numbers::pi);
    }
  }

  double operator()(double u, double v, double w) const {
    const double r = std::sqrt(u * u + v * v + w * w);
    if (r == 0.0) return 0.0;
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double proj = (axis[k][0] * u + axis[k][1] * v + axis[k][2] * w) / r;
      s += std::sin(freq[k] * proj + phase[k]);
    }
    return s / 3.0;
  }
};

bool in_cylinder(const Cylinder& cyl, double u, double v, double w) {
  const double p[3] = {u - cyl.start[0], v - cyl.start[1], w - cyl.start[2]};
  const double t = p[0] * cyl.direction[0] + p[1] * cyl.direction[1] + p[2] * cyl.direction[2];
  if (t < 0.0 || t > cyl.length) return false;
  double dist_sq = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double off = p[i] - t * cyl.direction[i];
    dist_sq += off * off;
  }
  return dist_sq <= cyl.radius * cyl.radius;
}

void validate_shape(const ShapeParams& p, GridDims dims) {
  if (!(p.a > 0.0 && p.b > 0.0 && p.c > 0.0)) throw ContractError("shape semi-axes must be positive");
  if (!(p.exponent > 0.0)) throw ContractError("shape exponent must be positive");
  if (!(p.noise_amplitude >= 0.0 && p.noise_amplitude < 1.0)) {
    throw ContractError("shape noise amplitude must lie in [0, 1)");
  }
  const double grow = 1.0 + p.noise_amplitude;
  if (p.a * grow > 0.5 * static_cast<double>(dims.x) || p.b * grow > 0.5 * static_cast<double>(dims.y) ||
      p.c * grow > 0.5 * static_cast<double>(dims.z)) {
    throw ContractError("shape body does not fit grid " + to_string(dims));
  }
  for (const auto& cyl : p.processes) {
    const double n = std::hypot(cyl.direction[0], cyl.direction[1], cyl.direction[2]);
    if (std::abs(n - 1.0) > 1e-9) throw ContractError("process direction must be a unit vector");
    if (!(cyl.length > 0.0 && cyl.radius > 0.0)) throw ContractError("process length and radius must be positive");
  }
}

}  // namespace

ShapeParams sample_shape_params(Rng& rng, GridDims dims) {
  // Ranges are calibrated for 32^3 and scale linearly with the grid.
  const double sx = static_cast<double>(dims.x) / 32.0;
  const double sy = static_cast<double>(dims.y) / 32.0;
  const double sz = static_cast<double>(dims.z) / 32.0;
  ShapeParams p;
  p.a = lerp(rng, 9.0, 12.0) * sx;
  p.b = lerp(rng, 8.0, 11.0) * sy;
  p.c = lerp(rng, 7.0, 10.0) * sz;
  p.exponent = lerp(rng, 2.0, 3.5);
  p.noise_amplitude = lerp(rng, 0.05, 0.15);
  const int count = 1 + static_cast<int>(rng.uniform_index(3));
  for (int i = 0; i < count; ++i) {
    Cylinder cyl;
    const double azimuth = lerp(rng, -0.8, 0.8);
    const double elevation = lerp(rng, -0.35, 0.35);
    cyl.direction[0] = std::sin(azimuth) * std::cos(elevation);
    cyl.direction[1] = -std::cos(azimuth) * std::cos(elevation);
    cyl.direction[2] = std::sin(elevation);
    for (int k = 0; k < 3; ++k) cyl.start[k] = 0.5 * cyl.direction[k] * p.b;
    cyl.length = lerp(rng, 8.0, 13.0) * sy;
    cyl.radius = lerp(rng, 1.5, 2.5) * std::min({sx, sy, sz});
    p.processes.push_back(cyl);
  }
  p.seed = rng.next_u64();
  return p;
}

VoxelGrid gen_pseudo_vertebra(const ShapeParams& params, GridDims dims) {
  validate_shape(params, dims);
  const SurfaceNoise noise(params.seed);
  const double cx = 0.5 * static_cast<double>(dims.x);
  const double cy = 0.5 * static_cast<double>(dims.y);
  const double cz = 0.5 * static_cast<double>(dims.z);
  const double e = params.exponent;
  VoxelGrid grid(dims);
  for (std::size_t z = 0; z < dims.z; ++z) {
    for (std::size_t y = 0; y < dims.y; ++y) {
      for (std::size_t x = 0; x < dims.x; ++x) {
        const double u = static_cast<double>(x) + 0.5 - cx;
        const double v = static_cast<double>(y) + 0.5 - cy;
        const double w = static_cast<double>(z) + 0.5 - cz;
        const double level = std::pow(std::abs(u / params.a), e) + std::pow(std::abs(v / params.b), e) +
                             std::pow(std::abs(w / params.c), e);
        double bound = 1.0;
        if (params.noise_amplitude > 0.0) bound = std::pow(1.0 + params.noise_amplitude * noise(u, v, w), e);
        bool inside = level <= bound;
        for (std::size_t k = 0; !inside && k < params.processes.size(); ++k) {
          inside = in_cylinder(params.processes[k], u, v, w);
        }
        if (inside) grid.set(x, y, z, true);
      }
    }
  }
  if (grid.occupied() == 0) throw GenerationError("shape parameters produced an empty volume");
  return grid;
}

// ---------------------------------------------------------------------------

VoxelGrid degrade_thick_slice(const VoxelGrid& hq, const DegradeParams& p) {
  if (p.axis < 0 || p.axis > 2) throw ContractError("degrade: axis must be 0, 1 or 2");
  if (!(p.threshold > 0.0 && p.threshold < 1.0)) throw ContractError("degrade: threshold must lie in (0, 1)");
  const GridDims d = hq.dims();
  const std::size_t extent[3] = {d.x, d.y, d.z};
  const std::size_t n = extent[p.axis];
  if (p.slab == 0 || p.slab > n || n % p.slab != 0) {
    throw ContractError("degrade: slab thickness " + std::to_string(p.slab) + " must divide the through-plane size " +
                        std::to_string(n));
  }
  const std::size_t stride[3] = {1, d.x, d.x * d.y};
  const std::size_t s = stride[p.axis];
  VoxelGrid out(d);
  for (std::size_t i = 0; i < hq.size(); ++i) {
    const std::size_t pos = (i / s) % n;
    if (pos % p.slab != 0) continue;
    // i is the first voxel of its slab.
    std::size_t count = 0;
    for (std::size_t k = 0; k < p.slab; ++k) count += hq[i + k * s] ? 1 : 0;
    const bool on = static_cast<double>(count) / static_cast<double>(p.slab) >= p.threshold;
    for (std::size_t k = 0; k < p.slab; ++k) out.set(i + k * s, on);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<LabeledImage> gen_2d_shapes(std::size_t n, std::uint64_t seed, std::size_t size) {
  if (size < 8) throw ContractError("gen_2d_shapes: image size must be at least 8");
  const Rng root(seed, 0x2d);
  const double scale = static_cast<double>(size) / 28.0;
  std::vector<LabeledImage> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = root.split(i);
    const auto label = static_cast<Shape2d>(i % 3);
    const double cx = 0.5 * static_cast<double>(size) + lerp(rng, -3.0, 3.0) * scale;
    const double cy = 0.5 * static_cast<double>(size) + lerp(rng, -3.0, 3.0) * scale;
    const double r_outer = lerp(rng, 7.0, 10.0) * scale;
    const double width = lerp(rng, 2.0, 3.0) * scale;
    VoxelGrid img({size, size, 1});
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double u = static_cast<double>(x) + 0.5 - cx;
        const double v = static_cast<double>(y) + 0.5 - cy;
        const double r = std::hypot(u, v);
        bool on = false;
        switch (label) {
          case Shape2d::kDisc:
            on = r <= r_outer;
            break;
          case Shape2d::kCross:
            on = (std::abs(u) <= width && std::abs(v) <= r_outer) || (std::abs(v) <= width && std::abs(u) <= r_outer);
            break;
          case Shape2d::kRing:
            on = r <= r_outer && r >= r_outer - width;
            break;
        }
        img.set(x, y, 0, on);
      }
    }
    out.push_back({label, std::move(img)});
  }
  return out;
}

SplitIndices split(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ContractError("split: fraction must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw ContractError("split: fraction " + std::to_string(train_fraction) + " of " + std::to_string(n) +
                        " items leaves one side empty");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, 0x5b17);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return out;
}

}  // namespace lsd
