#include "lsd/samplers.hpp"

#include <cmath>

#include "lsd/errors.hpp"

namespace lsd {

namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// z + (h/2) g + sqrt(h) xi, checked for divergence.
std::vector<double> langevin_update(std::span<const double> z, std::span<const double> g, double h, bool noise,
                                    Rng& rng) {
  std::vector<double> out(z.size());
  const double noise_scale = std::sqrt(h);
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = z[i] + 0.5 * h * g[i];
    if (noise) out[i] += noise_scale * rng.normal();
  }
  return out;
}

Tensor leaf_with_grad(const Tensor& z) {
  Tensor leaf = z.detach();
  leaf.set_requires_grad(true);
  return leaf;
}

}  // namespace

EnergyGrad energy_grad(const EnergyNet& net) {
  return [&net](const Tensor& z, int t) {
    FrozenParams frozen(net.parameters());
    Tensor leaf = leaf_with_grad(z);
    sum(net.energy(leaf, t)).backward();
    return Tensor::from(z.shape(), std::vector<double>(leaf.grad().begin(), leaf.grad().end()));
  };
}

EnergyGrad zero_energy_grad() {
  return [](const Tensor& z, int) { return Tensor::zeros(z.shape()); };
}

void validate(const LangevinConfig& cfg) {
  if (cfg.steps < 0) throw ContractError("Langevin steps must be >= 0");
  if (!(cfg.step_size >= 0.0)) throw ContractError("Langevin step size must be >= 0");
}

double batch_variance(const Tensor& states) {
  if (states.rank() != 2) throw ContractError("batch_variance expects a (B, d) batch, got " + to_string(states.shape()));
  const std::size_t n = states.dim(0), d = states.dim(1);
  if (n < 2) throw ContractError("batch_variance needs at least 2 samples, got " + std::to_string(n));
  const auto x = states.data();
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i * d + j];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dev = x[i * d + j] - mean;
      ss += dev * dev;
    }
    total += ss / static_cast<double>(n - 1);
  }
  return total / static_cast<double>(d);
}

void VarianceTrace::record(const Tensor& states) { values.push_back(batch_variance(states)); }

std::string to_string(VarianceTrace::Direction direction) {
  switch (direction) {
    case VarianceTrace::Direction::kNoising:
      return "noising";
    case VarianceTrace::Direction::kDenoising:
      return "denoising";
    case VarianceTrace::Direction::kMcmc:
      return "mcmc";
  }
  return "unknown";
}

Tensor cond_logp_grad(const Tensor& z_t, const Tensor& z_next, int t, const EnergyGrad& energy,
                      const NoiseSchedule& schedule) {
  if (t < 0 || t >= schedule.steps()) {
    throw ContractError("cond_logp_grad: step " + std::to_string(t) + " outside [0, " +
                        std::to_string(schedule.steps() - 1) + "]");
  }
  if (z_t.shape() != z_next.shape()) {
    throw ContractError("cond_logp_grad: shape mismatch " + to_string(z_t.shape()) + " vs " +
                        to_string(z_next.shape()));
  }
  const double s = schedule.sigma_sq(t + 1);
  if (s == 0.0) throw ContractError("cond_logp_grad: schedule variance at step " + std::to_string(t + 1) + " is zero");
  const Tensor grad_e = energy(z_t, t);
  const auto ge = grad_e.data();
  const auto a = z_t.data();
  const auto b = z_next.data();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -ge[i] + (b[i] - a[i]) / s;
  return Tensor::from(z_t.shape(), std::move(out));
}

Tensor langevin_denoise_step(const Tensor& z_next, int t, const EnergyGrad& energy, const NoiseSchedule& schedule,
                             const LangevinConfig& cfg, Rng& rng) {
  validate(cfg);
  if (t < 0 || t >= schedule.steps()) {
    throw ContractError("langevin_denoise_step: step " + std::to_string(t) + " outside schedule");
  }
  const double h = cfg.step_size * schedule.sigma_sq(t + 1);
  Tensor z = z_next.detach();
  for (int k = 0; k < cfg.steps; ++k) {
    const Tensor g = cond_logp_grad(z, z_next, t, energy, schedule);
    auto next = langevin_update(z.data(), g.data(), h, cfg.noise, rng);
    if (!all_finite(next)) throw SamplerDivergenceError("langevin_denoise_step", t, k);
    z = Tensor::from(z_next.shape(), std::move(next));
  }
  return z;
}

Tensor langevin_image_ebm(const Tensor& x_init, const EnergyGrad& energy, const LangevinConfig& cfg, Rng& rng) {
  validate(cfg);
  Tensor x = x_init.detach();
  for (int k = 0; k < cfg.steps; ++k) {
    const Tensor ge = energy(x, 0);
    std::vector<double> g(ge.data().begin(), ge.data().end());
    for (double& v : g) v = -v;
    auto next = langevin_update(x.data(), g, cfg.step_size, cfg.noise, rng);
    if (!all_finite(next)) throw SamplerDivergenceError("langevin_image_ebm", 0, k);
    x = Tensor::from(x_init.shape(), std::move(next));
  }
  return x;
}

Tensor lebm_prior_sample(const EnergyGrad& energy, std::size_t batch, std::size_t latent_dim,
                         const LangevinConfig& cfg, Rng& rng, VarianceTrace* trace) {
  validate(cfg);
  Tensor z = gaussian(rng, {batch, latent_dim});
  for (int k = 0; k < cfg.steps; ++k) {
    const Tensor ge = energy(z, 0);
    const auto e = ge.data();
    const auto zz = z.data();
    std::vector<double> g(zz.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = -e[i] - zz[i];
    auto next = langevin_update(zz, g, cfg.step_size, cfg.noise, rng);
    if (!all_finite(next)) throw SamplerDivergenceError("lebm_prior_sample", 0, k);
    z = Tensor::from(z.shape(), std::move(next));
    if (trace != nullptr) trace->record(z);
  }
  return z;
}

Tensor lebm_log_posterior_grad(const Tensor& x, const Tensor& z, const Decoder& decoder, const EnergyGrad& energy) {
  Tensor leaf = leaf_with_grad(z);
  {
    FrozenParams frozen(decoder.parameters());
    sum(recon_loss_per_sample(x, decoder.forward(leaf), decoder.mode(), decoder.sigma())).backward();
  }
  const auto recon_grad = leaf.grad();
  const Tensor ge = energy(z, 0);
  const auto e = ge.data();
  const auto zz = z.data();
  std::vector<double> g(zz.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -recon_grad[i] - e[i] - zz[i];
  return Tensor::from(z.shape(), std::move(g));
}

Tensor lebm_posterior_sample(const Tensor& x, const Decoder& decoder, const EnergyGrad& energy,
                             const LangevinConfig& cfg, Rng& rng, const Tensor& init, VarianceTrace* trace) {
  validate(cfg);
  Tensor z = init.defined() ? init.detach() : gaussian(rng, {x.dim(0), decoder.latent_dim()});
  for (int k = 0; k < cfg.steps; ++k) {
    const Tensor g = lebm_log_posterior_grad(x, z, decoder, energy);
    auto next = langevin_update(z.data(), g.data(), cfg.step_size, cfg.noise, rng);
    if (!all_finite(next)) throw SamplerDivergenceError("lebm_posterior_sample", 0, k);
    z = Tensor::from(z.shape(), std::move(next));
    if (trace != nullptr) trace->record(z);
  }
  return z;
}

}  // namespace lsd
