#include <doctest.h>

#include <cmath>

#include "lsd/errors.hpp"
#include "lsd/schedule.hpp"
#include "test_util.hpp"

using namespace lsd;

namespace {

struct Moments {
  std::vector<double> mean;
  std::vector<double> cov;  // d x d
};

Moments moments(const Tensor& x) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  Moments m{std::vector<double>(d, 0.0), std::vector<double>(d * d, 0.0)};
  const auto v = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += v[i * d + j] / static_cast<double>(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < d; ++k) {
        m.cov[j * d + k] += (v[i * d + j] - m.mean[j]) * (v[i * d + k] - m.mean[k]) / static_cast<double>(n - 1);
      }
    }
  }
  return m;
}

Tensor repeat_row(const std::vector<double>& row, std::size_t n) {
  std::vector<double> out;
  out.reserve(n * row.size());
  for (std::size_t i = 0; i < n; ++i) out.insert(out.end(), row.begin(), row.end());
  return Tensor::from({n, row.size()}, std::move(out));
}

}  // namespace

TEST_CASE("linear schedule") {
  const NoiseSchedule one = linear_schedule(1, 0.04, 0.04);
  CHECK(one.sigma_sq_values() == std::vector<double>{0.04});
  CHECK(one.gamma(1) == doctest::Approx(0.96).epsilon(1e-15));
  CHECK(one.gamma(0) == 1.0);

  const NoiseSchedule s = linear_schedule(20, 1e-4, 0.02);
  double product = 1.0;
  for (int t = 1; t <= 20; ++t) {
    const double expected = 1e-4 + (0.02 - 1e-4) * (t - 1) / 19.0;
    CHECK(s.sigma_sq(t) == doctest::Approx(expected).epsilon(1e-14));
    product *= 1.0 - s.sigma_sq(t);
    CHECK(s.gamma(t) == product);
    CHECK(s.gamma(t) <= s.gamma(t - 1));
  }
  CHECK(s.sigma_sq(1) == 1e-4);
  CHECK(s.sigma_sq(20) == doctest::Approx(0.02).epsilon(1e-15));

  const NoiseSchedule zero = linear_schedule(5, 0.0, 0.0);
  for (int t = 0; t <= 5; ++t) CHECK(zero.gamma(t) == 1.0);

  CHECK_THROWS_AS(linear_schedule(0, 0.1, 0.2), ContractError);
  CHECK_THROWS_AS(linear_schedule(5, 0.3, 0.2), ContractError);
  CHECK_THROWS_AS(linear_schedule(5, -0.1, 0.2), ContractError);
  CHECK_THROWS_AS(linear_schedule(5, 0.1, 1.2), ContractError);
  CHECK_THROWS_AS(s.sigma_sq(0), ContractError);
  CHECK_THROWS_AS(s.gamma(21), ContractError);
}

TEST_CASE("forward_step") {
  Rng rng(1);
  const Tensor z = gaussian(rng, {3, 4});

  const NoiseSchedule zero = linear_schedule(3, 0.0, 0.0);
  CHECK(testing::to_vector(forward_step(z, 1, zero, rng)) == testing::to_vector(z));

  // sigma^2 = 1: the output does not depend on z_t.
  const NoiseSchedule full = linear_schedule(1, 1.0, 1.0);
  Rng a(5), b(5);
  const Tensor out1 = forward_step(z, 0, full, a);
  const Tensor out2 = forward_step(scale(z, 100.0), 0, full, b);
  CHECK(testing::to_vector(out1) == testing::to_vector(out2));

  const NoiseSchedule s = linear_schedule(4, 0.05, 0.2);
  const Tensor zeros = Tensor::zeros({100000, 1});
  const Moments m = moments(forward_step(zeros, 2, s, rng));
  CHECK(std::abs(m.mean[0]) < 0.01 * std::sqrt(s.sigma_sq(3)) * 3.0);
  CHECK(m.cov[0] == doctest::Approx(s.sigma_sq(3)).epsilon(0.01));

  CHECK_THROWS_AS(forward_step(z, 4, s, rng), ContractError);
  CHECK_THROWS_AS(forward_step(z, -1, s, rng), ContractError);
}

TEST_CASE("forward_marginal agrees with composed steps") {
  const NoiseSchedule s = linear_schedule(20, 1e-4, 0.02);
  Rng rng(7);
  const Tensor z = gaussian(rng, {2, 4});
  CHECK(testing::to_vector(forward_marginal(z, 0, s, rng)) == testing::to_vector(z));
  const NoiseSchedule zero = linear_schedule(20, 0.0, 0.0);
  for (int t : {1, 7, 20}) CHECK(testing::to_vector(forward_marginal(z, t, zero, rng)) == testing::to_vector(z));
  CHECK_THROWS_AS(forward_marginal(z, 21, s, rng), ContractError);

  const std::vector<double> z0 = {1.0, -0.5, 2.0, 0.0};
  const std::size_t n = 100000;
  const Tensor start = repeat_row(z0, n);
  const Moments direct = moments(forward_marginal(start, 20, s, rng));
  Tensor composed = start;
  for (int t = 0; t < 20; ++t) composed = forward_step(composed, t, s, rng);
  const Moments steps = moments(composed);
  for (std::size_t j = 0; j < 4; ++j) {
    const double sd = std::sqrt(1.0 - s.gamma(20));
    // Means compared on the scale of the noise so a zero mean is meaningful.
    CHECK(std::abs(direct.mean[j] - steps.mean[j]) < 0.01 * std::max(std::abs(steps.mean[j]), sd) + 4.0 * sd / std::sqrt(n / 2.0));
    CHECK(direct.cov[j * 4 + j] == doctest::Approx(steps.cov[j * 4 + j]).epsilon(0.02));
  }
}

TEST_CASE("large-T marginal is standard normal") {
  const NoiseSchedule s = linear_schedule(50, 0.2, 0.6);
  CHECK(s.gamma(50) < 1e-6);
  Rng rng(8);
  const Tensor start = repeat_row({5.0, -5.0}, 100000);
  const Moments m = moments(forward_marginal(start, 50, s, rng));
  CHECK(std::abs(m.mean[0]) < 0.01);
  CHECK(std::abs(m.mean[1]) < 0.01);
  CHECK(m.cov[0] == doctest::Approx(1.0).epsilon(0.01));
  CHECK(m.cov[3] == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("shifted_mean") {
  const NoiseSchedule s = linear_schedule(3, 0.1, 0.3);
  Rng rng(2);
  const Tensor z = gaussian(rng, {1, 5});
  const Tensor m = shifted_mean(z, 1, s);
  CHECK(std::sqrt(sq_norm(m).item()) == doctest::Approx(std::sqrt(1.0 - s.sigma_sq(2)) * std::sqrt(sq_norm(z).item())).epsilon(1e-14));
  const NoiseSchedule zero = linear_schedule(3, 0.0, 0.0);
  CHECK(testing::to_vector(shifted_mean(z, 0, zero)) == testing::to_vector(z));
  const Tensor origin = shifted_mean(Tensor::zeros({1, 5}), 2, s);
  for (double v : origin.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(shifted_mean(z, 3, s), ContractError);

  // Sample average of forward steps approaches the shifted mean.
  const std::vector<double> row = {1.5, -2.0};
  const Moments mc = moments(forward_step(repeat_row(row, 100000), 0, s, rng));
  const Tensor expected = shifted_mean(Tensor::from({1, 2}, row), 0, s);
  for (std::size_t j = 0; j < 2; ++j) CHECK(mc.mean[j] == doctest::Approx(expected[j]).epsilon(0.01));
}
