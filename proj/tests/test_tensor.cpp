#include <doctest.h>

#include <cmath>

#include "lsd/errors.hpp"
#include "lsd/tensor.hpp"
#include "test_util.hpp"

using namespace lsd;
using lsd::testing::gradient_error;
using lsd::testing::random_leaf;

TEST_CASE("forward ops match their definitions") {
  Rng rng(3);
  const Tensor a = uniform(rng, {3, 3});
  const Tensor eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor prod = matmul(eye, a);
  for (std::size_t i = 0; i < 9; ++i) CHECK(prod[i] == a[i]);

  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(mean(Tensor::from({4}, {1, 2, 3, 4})).item() == 2.5);
  CHECK(sum(Tensor::from({2, 2}, {1, 2, 3, 4})).item() == 10.0);
  CHECK(sq_norm(Tensor::from({2}, {3, 4})).item() == 25.0);

  const Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4});
  const Tensor w = Tensor::from({2, 1}, {1, -1});
  const Tensor b = Tensor::from({1}, {0.5});
  const Tensor y = affine(x, w, b);
  CHECK(y.shape() == Shape{2, 1});
  CHECK(y[0] == -0.5);
  CHECK(y[1] == -0.5);

  const Tensor c = concat(Tensor::from({2, 1}, {1, 2}), Tensor::from({2, 2}, {3, 4, 5, 6}));
  CHECK(c.shape() == Shape{2, 3});
  CHECK(testing::to_vector(c) == std::vector<double>{1, 3, 4, 2, 5, 6});

  const Tensor g = gather_rows(Tensor::from({2, 2}, {1, 2, 3, 4}), {1, 1, 0});
  CHECK(testing::to_vector(g) == std::vector<double>{3, 4, 3, 4, 1, 2});
  CHECK(testing::to_vector(row_sum(x)) == std::vector<double>{3, 7});
  CHECK(silu(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(softplus(Tensor::scalar(0.0)).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(clamp(Tensor::from({3}, {-5, 0.5, 5}), -1, 1)[0] == -1.0);
}

TEST_CASE("shape mismatches name both shapes") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({3, 2});
  try {
    add(a, b);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2, 3)") != std::string::npos);
    CHECK(msg.find("(3, 2)") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(a, a), ContractError);
  CHECK_THROWS_AS(mul(a, b), ContractError);
  CHECK_THROWS_AS(reshape(a, {4}), ContractError);
  CHECK_THROWS_AS(Tensor::from({2}, {1, 2, 3}), ContractError);
}

TEST_CASE("backward basics") {
  Tensor w = Tensor::from({3}, {1, -2, 3}, true);
  sum(w).backward();
  for (double g : w.grad()) CHECK(g == 1.0);

  w.zero_grad();
  scale(sq_norm(w), 0.5).backward();
  for (std::size_t i = 0; i < 3; ++i) CHECK(w.grad()[i] == w[i]);

  CHECK_THROWS_AS(w.backward(), ContractError);
}

TEST_CASE("gradients accumulate additively and linearly") {
  Rng rng(11);
  Tensor w = random_leaf(rng, {4, 3});
  auto l1 = [&] { return sum(silu(w)); };
  auto l2 = [&] { return sq_norm(sigmoid(w)); };
  const double a = 0.7, b = -1.3;

  w.zero_grad();
  (scale(l1(), a) + scale(l2(), b)).backward();
  const auto combined = testing::to_vector(Tensor::from(w.shape(), {w.grad().begin(), w.grad().end()}));

  w.zero_grad();
  scale(l1(), a).backward();
  scale(l2(), b).backward();
  for (std::size_t i = 0; i < combined.size(); ++i) CHECK(w.grad()[i] == doctest::Approx(combined[i]).epsilon(1e-12));
}

TEST_CASE("every op passes a finite-difference gradient check") {
  Rng rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor a = random_leaf(rng, {3, 4});
    Tensor b = random_leaf(rng, {3, 4});
    Tensor w = random_leaf(rng, {4, 2});
    Tensor bias = random_leaf(rng, {2});
    Tensor pos = random_leaf(rng, {3, 4}, 0.5, 2.0);
    const Tensor r = uniform(rng, {3, 4}, -1, 1);
    const Tensor r2 = uniform(rng, {3, 2}, -1, 1);
    const Tensor rows = uniform(rng, {3}, -1, 1);
    auto weighted = [&](const Tensor& t) { return sum(t * r); };
    CHECK(gradient_error([&] { return weighted(a + b); }, {a, b}) < 1e-5);
    CHECK(gradient_error([&] { return weighted(a - b); }, {a, b}) < 1e-5);
    CHECK(gradient_error([&] { return weighted(a * b); }, {a, b}) < 1e-5);
    CHECK(gradient_error([&] { return weighted(scale(a, -2.5)); }, {a}) < 1e-5);
    CHECK(gradient_error([&] { return weighted(add_scalar(a, 0.3) * a); }, {a}) < 1e-5);
    CHECK(gradient_error([&] { return sum(matmul(a, w) * r2); }, {a, w}) < 1e-5);
    CHECK(gradient_error([&] { return sum(affine(a, w, bias) * r2); }, {a, w, bias}) < 1e-5);
    CHECK(gradient_error([&] { return weighted(silu(a)); }, {a}) < 1e-5);
    CHECK(gradient_error([&] { return weighted(sigmoid(a)); }, {a}) < 1e-5);
    CHECK(gradient_error([&] { return weighted(softplus(a)); }, {a}) < 1e-5);
    CHECK(gradient_error([&] { return weighted(exp(a)); }, {a}) < 1e-5);
    CHECK(gradient_error([&] { return weighted(log(pos)); }, {pos}) < 1e-5);
    CHECK(gradient_error([&] { return weighted(clamp(scale(a, 0.5), -0.9, 0.9)); }, {a}) < 1e-5);
    CHECK(gradient_error([&] { return sum(reshape(a, {12}) * reshape(r, {12})); }, {a}) < 1e-5);
    CHECK(gradient_error([&] { return sum(concat(a, b) * concat(r, r)); }, {a, b}) < 1e-5);
    CHECK(gradient_error([&] { return sum(gather_rows(a, {2, 0, 2}) * gather_rows(r, {0, 1, 2})); }, {a}) < 1e-5);
    CHECK(gradient_error([&] { return mean(a * b); }, {a, b}) < 1e-5);
    CHECK(gradient_error([&] { return sum(row_sum(a * a) * rows); }, {a}) < 1e-5);
    CHECK(gradient_error([&] { return sq_norm(a); }, {a}) < 1e-5);
  }
}

TEST_CASE("detach and requires_grad") {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  const Tensor y = scale(w, 2.0);
  CHECK(y.requires_grad());
  const Tensor d = y.detach();
  CHECK_FALSE(d.requires_grad());
  CHECK(d[1] == 4.0);
  Tensor y_copy = y;
  CHECK_THROWS_AS(y_copy.set_requires_grad(false), ContractError);
  const Tensor c = scale(Tensor::from({2}, {1, 2}), 2.0);
  CHECK_FALSE(c.requires_grad());
}

TEST_CASE("non-finite detection when enabled") {
  const bool previous = finite_checks();
  set_finite_checks(true);
  CHECK_THROWS_AS(log(Tensor::from({1}, {-1.0})), ContractError);
  set_finite_checks(previous);
}
