#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lsd/rng.hpp"
#include "lsd/tensor.hpp"

namespace lsd {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

std::vector<Tensor> tensors_of(const ParamList& params);

/// Disables gradient tracking on a set of parameters for its lifetime.
/// Used while sampling so Langevin chains only differentiate w.r.t. their state.
class FrozenParams {
 public:
  explicit FrozenParams(ParamList params);
  ~FrozenParams();
  FrozenParams(const FrozenParams&) = delete;
  FrozenParams& operator=(const FrozenParams&) = delete;

 private:
  ParamList params_;
  std::vector<bool> previous_;
};

class Linear {
 public:
  /// Weights uniform on +-1/sqrt(in), zero bias.
  Linear(std::size_t in, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x) const { return affine(x, weight_, bias_); }
  void append_params(const std::string& prefix, ParamList& out) const;

  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }

 private:
  Tensor weight_;
  Tensor bias_;
};

/// Stack of affine layers with SiLU between them (and after the last one when
/// activate_last is set).
class Mlp {
 public:
  Mlp(const std::vector<std::size_t>& widths, Rng& rng, bool activate_last = false);

  Tensor forward(const Tensor& x) const;
  void append_params(const std::string& prefix, ParamList& out) const;

  std::size_t in_features() const { return layers_.front().in_features(); }
  std::size_t out_features() const { return layers_.back().out_features(); }

 private:
  std::vector<Linear> layers_;
  bool activate_last_;
};

struct Encoding {
  Tensor z0;
  Tensor mu;
  Tensor log_sigma;
};

/// Inference network q(z0 | x) = N(mu(x), diag(exp(log_sigma(x))^2)).
class Encoder {
 public:
  static constexpr double kLogSigmaBound = 10.0;

  Encoder(std::size_t input_dim, std::size_t latent_dim, std::size_t hidden1, std::size_t hidden2, Rng& rng);

  /// With rng == nullptr the encoding is deterministic (z0 = mu); otherwise
  /// z0 = mu + exp(log_sigma) * eps, differentiable in the parameters.
  Encoding encode(const Tensor& x, Rng* rng) const;

  ParamList parameters() const;
  std::size_t input_dim() const { return input_dim_; }
  std::size_t latent_dim() const { return latent_dim_; }

 private:
  std::size_t input_dim_;
  std::size_t latent_dim_;
  Mlp trunk_;
  Linear mu_head_;
  Linear log_sigma_head_;
};

enum class Likelihood { kBernoulli, kGaussian };

Likelihood parse_likelihood(const std::string& name);
std::string to_string(Likelihood mode);

/// Generation network p(x | z0).
class Decoder {
 public:
  Decoder(std::size_t latent_dim, std::size_t output_dim, std::size_t hidden1, std::size_t hidden2, Rng& rng,
          Likelihood mode = Likelihood::kBernoulli, double sigma = 1.0);

  /// Logits in Bernoulli mode, means in Gaussian mode.
  Tensor forward(const Tensor& z) const;
  /// Probabilities in Bernoulli mode, means in Gaussian mode.
  Tensor decode(const Tensor& z) const;

  ParamList parameters() const;
  std::size_t latent_dim() const { return latent_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  Likelihood mode() const { return mode_; }
  double sigma() const { return sigma_; }

 private:
  std::size_t latent_dim_;
  std::size_t output_dim_;
  Mlp net_;
  Likelihood mode_;
  double sigma_;
};

/// Negative log-likelihood -log p(x | z) with constants dropped, summed over
/// entries and averaged over the batch. `raw` is Decoder::forward output.
Tensor recon_loss(const Tensor& x, const Tensor& raw, Likelihood mode, double sigma = 1.0);

/// Per-sample variant of recon_loss, shape [B].
Tensor recon_loss_per_sample(const Tensor& x, const Tensor& raw, Likelihood mode, double sigma = 1.0);

/// Time-conditioned scalar energy E(z, t). A learned embedding row for t is
/// concatenated to z before the MLP. With time_steps = 0 the net has a single
/// embedding row and behaves as an unconditioned energy.
class EnergyNet {
 public:
  static constexpr std::size_t kEmbedDim = 16;

  EnergyNet(std::size_t input_dim, int time_steps, std::size_t hidden, Rng& rng);

  /// Per-sample energies, shape [B].
  Tensor energy(const Tensor& z, int t) const;

  ParamList parameters() const;
  std::size_t input_dim() const { return input_dim_; }
  int time_steps() const { return time_steps_; }

 private:
  std::size_t input_dim_;
  int time_steps_;
  Tensor embedding_;
  Mlp net_;
};

}  // namespace lsd
