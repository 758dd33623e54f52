#pragma once

#include <vector>

#include "lsd/rng.hpp"
#include "lsd/tensor.hpp"

namespace lsd {

/// Variance schedule of the latent forward diffusion
///   q(z_{t+1} | z_t) = N(sqrt(1 - s_{t+1}) z_t, s_{t+1} I)
/// with cumulative signal fraction gamma_t = prod_{i<=t} (1 - s_i).
class NoiseSchedule {
 public:
  /// sigma_sq[i] is the variance of step i+1.
  explicit NoiseSchedule(std::vector<double> sigma_sq);

  int steps() const { return static_cast<int>(sigma_sq_.size()); }
  /// Variance added by step t (1-based, 1 <= t <= T).
  double sigma_sq(int t) const;
  /// gamma_t for 0 <= t <= T; gamma_0 = 1.
  double gamma(int t) const;

  const std::vector<double>& sigma_sq_values() const { return sigma_sq_; }
  const std::vector<double>& gamma_values() const { return gamma_; }

 private:
  std::vector<double> sigma_sq_;
  std::vector<double> gamma_;
};

/// sigma_sq linear from lo (t=1) to hi (t=T).
NoiseSchedule linear_schedule(int steps, double sigma_sq_min, double sigma_sq_max);

/// One forward step: sqrt(1 - s_{t+1}) z_t + sqrt(s_{t+1}) eps, for 0 <= t < T.
Tensor forward_step(const Tensor& z_t, int t, const NoiseSchedule& schedule, Rng& rng);

/// Draw from q(z_t | z_0) = N(sqrt(gamma_t) z_0, (1 - gamma_t) I), for 0 <= t <= T.
Tensor forward_marginal(const Tensor& z0, int t, const NoiseSchedule& schedule, Rng& rng);

/// sqrt(1 - s_{t+1}) z_t, the conditional mean of z_{t+1}.
Tensor shifted_mean(const Tensor& z_t, int t, const NoiseSchedule& schedule);

}  // namespace lsd
