#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lsd/networks.hpp"
#include "lsd/rng.hpp"
#include "lsd/schedule.hpp"
#include "lsd/tensor.hpp"

namespace lsd {

/// Gradient of the summed per-sample energy with respect to a batch of states.
/// The second argument is the diffusion step (ignored by unconditioned energies).
using EnergyGrad = std::function<Tensor(const Tensor& z, int t)>;

/// Autodiff gradient of an EnergyNet; parameters are frozen while it runs.
EnergyGrad energy_grad(const EnergyNet& net);
EnergyGrad zero_energy_grad();

struct LangevinConfig {
  int steps = 20;
  double step_size = 0.1;
  bool noise = true;
};

void validate(const LangevinConfig& cfg);

/// Mean over dimensions of the per-dimension sample variance across the batch.
double batch_variance(const Tensor& states);

struct VarianceTrace {
  enum class Direction { kNoising, kDenoising, kMcmc };

  Direction direction = Direction::kDenoising;
  std::vector<double> values;

  /// Appends batch_variance(states); the batch must have at least two rows.
  void record(const Tensor& states);
};

std::string to_string(VarianceTrace::Direction direction);

/// grad_z log p(z_t | z_{t+1}) = -grad E(z_t, t) + (z_{t+1} - z_t) / s_{t+1}.
Tensor cond_logp_grad(const Tensor& z_t, const Tensor& z_next, int t, const EnergyGrad& energy,
                      const NoiseSchedule& schedule);

/// Samples z_t ~ p(z_t | z_{t+1}) with `cfg.steps` unadjusted Langevin updates
/// started at z_{t+1}. The update ascends the log-density:
///   z <- z + (h/2) cond_logp_grad + sqrt(h) xi,   h = step_size * s_{t+1},
/// so the quadratic tether stays stable for every step of the schedule.
Tensor langevin_denoise_step(const Tensor& z_next, int t, const EnergyGrad& energy, const NoiseSchedule& schedule,
                             const LangevinConfig& cfg, Rng& rng);

/// Data-space EBM chain: x <- x - (step/2) grad E(x) + sqrt(step) xi.
Tensor langevin_image_ebm(const Tensor& x_init, const EnergyGrad& energy, const LangevinConfig& cfg, Rng& rng);

/// Prior chain of the latent EBM, started from N(0, I), ascending
/// grad[-E(z) - |z|^2 / 2]. A trace, if given, receives one entry per step.
Tensor lebm_prior_sample(const EnergyGrad& energy, std::size_t batch, std::size_t latent_dim,
                         const LangevinConfig& cfg, Rng& rng, VarianceTrace* trace = nullptr);

/// grad_z of log p(x | z) - E(z) - |z|^2 / 2 (constants dropped).
Tensor lebm_log_posterior_grad(const Tensor& x, const Tensor& z, const Decoder& decoder, const EnergyGrad& energy);

/// Posterior chain of the latent EBM started from `init` (N(0, I) if undefined).
Tensor lebm_posterior_sample(const Tensor& x, const Decoder& decoder, const EnergyGrad& energy,
                             const LangevinConfig& cfg, Rng& rng, const Tensor& init = Tensor(),
                             VarianceTrace* trace = nullptr);

}  // namespace lsd
