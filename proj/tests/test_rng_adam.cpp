#include <doctest.h>

#include <cmath>
#include <set>

#include "lsd/adam.hpp"
#include "lsd/errors.hpp"
#include "lsd/rng.hpp"
#include "test_util.hpp"

using namespace lsd;

TEST_CASE("gaussian draws are deterministic per (seed, stream)") {
  const Rng base(42, 7);
  Rng r1 = base, r2 = base;
  const Tensor a = gaussian(r1, {2, 3});
  const Tensor b = gaussian(r2, {2, 3});
  CHECK(a.size() == 6);
  CHECK(testing::to_vector(a) == testing::to_vector(b));

  Rng other(42, 8);
  CHECK(testing::to_vector(gaussian(other, {2, 3})) != testing::to_vector(a));
  Rng other_seed(43, 7);
  CHECK(testing::to_vector(gaussian(other_seed, {2, 3})) != testing::to_vector(a));
}

TEST_CASE("standard normal moments over 1e6 draws") {
  Rng rng(1);
  const Tensor x = gaussian(rng, {1000000});
  double mean = 0.0, sq = 0.0;
  for (double v : x.data()) {
    mean += v;
    sq += v * v;
  }
  mean /= 1e6;
  const double var = sq / 1e6 - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("uniform draws and split streams") {
  Rng rng(5);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(lo < 1e-3);
  CHECK(hi > 1.0 - 1e-3);

  std::set<std::size_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(rng.uniform_index(7));
  CHECK(seen.size() == 7);
  CHECK(*seen.rbegin() == 6);

  // Substreams: identical ids agree, different ids are uncorrelated.
  const Rng root(9);
  Rng s1 = root.split(1), s1b = root.split(1), s2 = root.split(2);
  const auto a = testing::to_vector(gaussian(s1, {20000}));
  const auto a2 = testing::to_vector(gaussian(s1b, {20000}));
  const auto b = testing::to_vector(gaussian(s2, {20000}));
  CHECK(a == a2);
  double corr = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) corr += a[i] * b[i];
  corr /= static_cast<double>(a.size());
  CHECK(std::abs(corr) < 0.03);
}

TEST_CASE("Adam update rule") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::from({3}, {1, 2, 3}, true);
    Adam opt({p}, {});
    scale(sum(p), 0.0).backward();
    opt.step();
    CHECK(testing::to_vector(p) == std::vector<double>{1, 2, 3});
    CHECK(opt.step_count() == 1);
  }
  SUBCASE("first bias-corrected step") {
    Tensor p = Tensor::from({1}, {0.0}, true);
    Adam opt({p}, {.lr = 0.1, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8});
    sum(p).backward();  // g = 1
    opt.step();
    CHECK(p[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-14));
  }
  SUBCASE("lr = 0 leaves parameters unchanged") {
    Rng rng(3);
    Tensor p = testing::random_leaf(rng, {4});
    const auto before = testing::to_vector(p);
    Adam opt({p}, {.lr = 0.0});
    for (int i = 0; i < 3; ++i) {
      opt.zero_grad();
      sq_norm(exp(p)).backward();
      opt.step();
    }
    CHECK(testing::to_vector(p) == before);
    CHECK(opt.step_count() == 3);
  }
  SUBCASE("missing gradient is a contract error") {
    Tensor p = Tensor::from({1}, {0.0}, true);
    Adam opt({p}, {});
    CHECK_THROWS_AS(opt.step(), ContractError);
    CHECK(opt.step_count() == 0);
  }
  SUBCASE("converges on a quadratic") {
    Tensor p = Tensor::from({2}, {3, -2}, true);
    Adam opt({p}, {.lr = 0.05});
    for (int i = 0; i < 2000; ++i) {
      opt.zero_grad();
      sq_norm(add_scalar(p, -1.0)).backward();
      opt.step();
    }
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(p[1] == doctest::Approx(1.0).epsilon(1e-3));
  }
}
