#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "lsd/data.hpp"
#include "lsd/errors.hpp"
#include "lsd/metrics.hpp"

using namespace lsd;

namespace {

const GridDims kCube{32, 32, 32};

std::vector<VoxelGrid> default_shapes(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<VoxelGrid> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(gen_pseudo_vertebra(sample_shape_params(rng, kCube), kCube));
  return out;
}

}  // namespace

TEST_CASE("voxel grid basics") {
  VoxelGrid g({3, 4, 5});
  CHECK(g.size() == 60);
  CHECK(g.occupied() == 0);
  g.set(2, 3, 4, true);
  CHECK(g.index(2, 3, 4) == 59);
  CHECK(g.at(2, 3, 4));
  CHECK(g[59]);
  CHECK(g.occupancy() == doctest::Approx(1.0 / 60.0));
  g.set(1, 0, 0, true);
  CHECK(g[1]);  // x-fastest
  CHECK(g.values()[1] == 1.0);
  CHECK(g.values()[0] == 0.0);

  CHECK(VoxelGrid({2, 2, 2}, true).occupied() == 8);
  CHECK_THROWS_AS(VoxelGrid({2, 2, 2}, std::vector<std::uint8_t>(7)), ContractError);
  CHECK_THROWS_AS(VoxelGrid({1, 1, 2}, std::vector<std::uint8_t>{0, 2}), ContractError);

  const std::vector<double> vals = {0.1, 0.5, 0.49, 0.9};
  const VoxelGrid b = VoxelGrid::from_values({4, 1, 1}, vals);
  CHECK(b.voxels() == std::vector<std::uint8_t>{0, 1, 0, 1});
  CHECK(VoxelGrid::from_values({4, 1, 1}, vals, 0.05).occupied() == 4);
  CHECK_THROWS_AS(VoxelGrid::from_values({3, 1, 1}, vals), ContractError);
  CHECK(to_string(GridDims{1, 2, 3}) == "1x2x3");
}

TEST_CASE("component counting") {
  VoxelGrid g({4, 4, 4});
  CHECK(count_components(g) == 0);
  g.set(0, 0, 0, true);
  g.set(1, 0, 0, true);
  CHECK(count_components(g) == 1);
  g.set(3, 3, 3, true);
  CHECK(count_components(g) == 2);
  g.set(2, 1, 0, true);  // diagonal neighbour of (1,0,0) only
  CHECK(count_components(g) == 3);
  CHECK(count_components(VoxelGrid({4, 4, 4}, true)) == 1);
}

TEST_CASE("pseudo-vertebra generation is deterministic") {
  Rng rng(3);
  const ShapeParams p = sample_shape_params(rng);
  CHECK(gen_pseudo_vertebra(p) == gen_pseudo_vertebra(p));
  ShapeParams q = p;
  q.seed += 1;
  CHECK_FALSE(gen_pseudo_vertebra(p) == gen_pseudo_vertebra(q));
}

TEST_CASE("noise-free ellipsoid matches the analytic membership test") {
  ShapeParams p;
  p.a = 10.3;
  p.b = 7.9;
  p.c = 6.2;
  p.exponent = 2.0;
  p.noise_amplitude = 0.0;
  const VoxelGrid g = gen_pseudo_vertebra(p, kCube);
  std::size_t mismatches = 0;
  for (std::size_t z = 0; z < 32; ++z) {
    for (std::size_t y = 0; y < 32; ++y) {
      for (std::size_t x = 0; x < 32; ++x) {
        const double u = (x + 0.5 - 16.0) / p.a, v = (y + 0.5 - 16.0) / p.b, w = (z + 0.5 - 16.0) / p.c;
        mismatches += (u * u + v * v + w * w <= 1.0) != g.at(x, y, z) ? 1 : 0;
      }
    }
  }
  CHECK(mismatches == 0);
  // Symmetric about the grid centre.
  for (std::size_t z = 0; z < 32; ++z) CHECK(g.at(16, 16, z) == g.at(15, 15, 31 - z));
}

TEST_CASE("shape validation") {
  ShapeParams p;
  CHECK_NOTHROW(gen_pseudo_vertebra(p));
  ShapeParams big = p;
  big.a = 17.0;
  CHECK_THROWS_AS(gen_pseudo_vertebra(big), ContractError);
  ShapeParams neg = p;
  neg.exponent = 0.0;
  CHECK_THROWS_AS(gen_pseudo_vertebra(neg), ContractError);
  ShapeParams bad_dir = p;
  bad_dir.processes.push_back(Cylinder{{0, 0, 0}, {1, 1, 0}, 5, 1});
  CHECK_THROWS_AS(gen_pseudo_vertebra(bad_dir), ContractError);
  // A body thinner than a voxel lands between voxel centres.
  ShapeParams tiny = p;
  tiny.a = tiny.b = tiny.c = 0.2;
  CHECK_THROWS_AS(gen_pseudo_vertebra(tiny), GenerationError);
}

TEST_CASE("default shape distribution: occupancy and connectivity over 100 samples") {
  const auto shapes = default_shapes(100, 77);
  std::size_t single = 0;
  for (const auto& g : shapes) {
    CHECK(g.occupancy() >= 0.05);
    CHECK(g.occupancy() <= 0.5);
    single += count_components(g) == 1 ? 1 : 0;
  }
  CHECK(single >= 99);
}

TEST_CASE("thick-slice degradation") {
  const auto shapes = default_shapes(100, 5);
  for (const auto& hq : shapes) {
    CHECK(degrade_thick_slice(hq, {1, 0.5, 2}) == hq);
    const VoxelGrid lq = degrade_thick_slice(hq, {});
    const double d = dice(confusion(lq, hq));
    CHECK(d < 1.0);
    CHECK(d > 0.5);
    // Per-slab constancy along the through-plane axis.
    bool constant = true;
    for (std::size_t z = 0; z < 32; ++z) {
      for (std::size_t y = 0; y < 32; ++y) {
        for (std::size_t x = 0; x < 32; ++x) constant = constant && lq.at(x, y, z) == lq.at(x, y, z - z % 4);
      }
    }
    CHECK(constant);
    CHECK(degrade_thick_slice(lq, {}) == lq);
  }

  const VoxelGrid ones({4, 4, 8}, true);
  for (double thr : {0.1, 0.5, 0.99}) CHECK(degrade_thick_slice(ones, {4, thr, 2}) == ones);

  // One column of length 8 with 3 of 4 voxels on in the first slab and 1 of 4 in the second.
  VoxelGrid col({1, 1, 8});
  for (std::size_t z : {0, 1, 2, 5}) col.set(0, 0, z, true);
  const VoxelGrid half = degrade_thick_slice(col, {4, 0.5, 2});
  CHECK(half.voxels() == std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0, 0, 0});
  CHECK(degrade_thick_slice(col, {4, 0.25, 2}).occupied() == 8);

  // Other axes.
  VoxelGrid row({8, 1, 1});
  row.set(0, 0, 0, true);
  row.set(1, 0, 0, true);
  CHECK(degrade_thick_slice(row, {4, 0.5, 0}).occupied() == 4);
  CHECK(degrade_thick_slice(row, {4, 0.75, 0}).occupied() == 0);

  CHECK_THROWS_AS(degrade_thick_slice(col, {3, 0.5, 2}), ContractError);
  CHECK_THROWS_AS(degrade_thick_slice(col, {0, 0.5, 2}), ContractError);
  CHECK_THROWS_AS(degrade_thick_slice(col, {16, 0.5, 2}), ContractError);
  CHECK_THROWS_AS(degrade_thick_slice(col, {4, 1.0, 2}), ContractError);
  CHECK_THROWS_AS(degrade_thick_slice(col, {4, 0.5, 3}), ContractError);
}

TEST_CASE("2D shapes") {
  const auto a = gen_2d_shapes(30, 4);
  const auto b = gen_2d_shapes(30, 4);
  REQUIRE(a.size() == 30);
  double means[3][28 * 28] = {};
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image == b[i].image);
    CHECK(a[i].label == static_cast<Shape2d>(i % 3));
    CHECK(a[i].image.dims() == GridDims{28, 28, 1});
    CHECK(a[i].image.occupied() > 0);
    const auto v = a[i].image.values();
    for (std::size_t k = 0; k < v.size(); ++k) {
      CHECK((v[k] == 0.0 || v[k] == 1.0));
      means[i % 3][k] += v[k] / 10.0;
    }
  }
  for (int p = 0; p < 3; ++p) {
    for (int q = p + 1; q < 3; ++q) {
      double d2 = 0.0;
      for (int k = 0; k < 28 * 28; ++k) d2 += (means[p][k] - means[q][k]) * (means[p][k] - means[q][k]);
      CHECK(std::sqrt(d2) > 1.0);
    }
  }
  CHECK_FALSE(gen_2d_shapes(3, 5)[0].image == a[0].image);
  CHECK(gen_2d_shapes(2, 1, 14)[0].image.dims() == GridDims{14, 14, 1});
}

TEST_CASE("dataset split") {
  const SplitIndices s = split(100, 0.8, 3);
  CHECK(s.train.size() == 80);
  CHECK(s.test.size() == 20);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 100);
  CHECK(*all.rbegin() == 99);
  const SplitIndices t = split(100, 0.8, 3);
  CHECK(t.train == s.train);
  CHECK(split(100, 0.8, 4).train != s.train);
  CHECK_THROWS_AS(split(3, 0.1, 1), ContractError);
  CHECK_THROWS_AS(split(3, 0.95, 1), ContractError);
  CHECK_THROWS_AS(split(10, 0.0, 1), ContractError);
  CHECK_THROWS_AS(split(10, 1.0, 1), ContractError);
}
