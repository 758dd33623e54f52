#include "lsd/schedule.hpp"

#include <cmath>
#include <string>

#include "lsd/errors.hpp"

namespace lsd {

namespace {

void check_step(int t, int lo, int hi, const char* op) {
  if (t < lo || t > hi) {
    throw ContractError(std::string(op) + ": step " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
  }
}

Tensor noisy_scale(const Tensor& z, double signal, double noise, Rng* rng) {
  const auto in = z.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = signal * in[i];
  if (rng != nullptr && noise > 0.0) {
    for (double& v : out) v += noise * rng->normal();
  }
  return Tensor::from(z.shape(), std::move(out));
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> sigma_sq) : sigma_sq_(std::move(sigma_sq)) {
  if (sigma_sq_.empty()) throw ContractError("noise schedule needs at least one step");
  gamma_.reserve(sigma_sq_.size() + 1);
  gamma_.push_back(1.0);
  for (double s : sigma_sq_) {
    if (!(s >= 0.0 && s <= 1.0)) throw ContractError("schedule variance " + std::to_string(s) + " outside [0, 1]");
    gamma_.push_back(gamma_.back() * (1.0 - s));
  }
}

double NoiseSchedule::sigma_sq(int t) const {
  check_step(t, 1, steps(), "sigma_sq");
  return sigma_sq_[t - 1];
}

double NoiseSchedule::gamma(int t) const {
  check_step(t, 0, steps(), "gamma");
  return gamma_[t];
}

NoiseSchedule linear_schedule(int steps, double sigma_sq_min, double sigma_sq_max) {
  if (steps < 1) throw ContractError("linear_schedule: T must be >= 1, got " + std::to_string(steps));
  if (!(0.0 <= sigma_sq_min && sigma_sq_min <= sigma_sq_max && sigma_sq_max <= 1.0)) {
    throw ContractError("linear_schedule: require 0 <= min <= max <= 1, got min=" + std::to_string(sigma_sq_min) +
                        " max=" + std::to_string(sigma_sq_max));
  }
  std::vector<double> sigma_sq(steps);
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    sigma_sq[i] = sigma_sq_min + frac * (sigma_sq_max - sigma_sq_min);
  }
  return NoiseSchedule(std::move(sigma_sq));
}

Tensor forward_step(const Tensor& z_t, int t, const NoiseSchedule& schedule, Rng& rng) {
  check_step(t, 0, schedule.steps() - 1, "forward_step");
  const double s = schedule.sigma_sq(t + 1);
  return noisy_scale(z_t, std::sqrt(1.0 - s), std::sqrt(s), &rng);
}

Tensor forward_marginal(const Tensor& z0, int t, const NoiseSchedule& schedule, Rng& rng) {
  check_step(t, 0, schedule.steps(), "forward_marginal");
  if (t == 0) return z0.detach();
  const double g = schedule.gamma(t);
  return noisy_scale(z0, std::sqrt(g), std::sqrt(1.0 - g), &rng);
}

Tensor shifted_mean(const Tensor& z_t, int t, const NoiseSchedule& schedule) {
  check_step(t, 0, schedule.steps() - 1, "shifted_mean");
  return noisy_scale(z_t, std::sqrt(1.0 - schedule.sigma_sq(t + 1)), 0.0, nullptr);
}

}  // namespace lsd
