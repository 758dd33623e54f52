#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "lsd/adam.hpp"
#include "lsd/networks.hpp"
#include "lsd/rng.hpp"
#include "lsd/samplers.hpp"
#include "lsd/schedule.hpp"
#include "lsd/tensor.hpp"

namespace lsd {

enum class ModelKind : std::uint8_t { kVae = 0, kEbm2d = 1, kLebm = 2, kLsdEbm = 3 };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// Everything needed to build, train and run one model.
struct TrainConfig {
  // Optimisation.
  int epochs = 200;
  std::size_t batch_size = 4;
  double lr = 2e-5;
  std::uint64_t seed = 1;
  /// Weight of the (E_pos^2 + E_neg^2) penalty in contrastive energy updates.
  double energy_reg = 0.0;

  // Architecture.
  std::size_t input_dim = 32 * 32 * 32;
  std::size_t latent_dim = 64;
  std::size_t hidden1 = 1024;
  std::size_t hidden2 = 256;
  std::size_t energy_hidden = 256;
  Likelihood likelihood = Likelihood::kBernoulli;
  double decoder_sigma = 1.0;

  // Latent diffusion.
  int T = 20;
  double sigma_sq_min = 1e-4;
  double sigma_sq_max = 0.02;

  // Langevin chains. K / lambda drive training negatives (LSD-EBM denoising,
  // LEBM prior, image EBM); K_inference is the per-step chain length of
  // LSD-EBM inference and the posterior chain length of LEBM reconstruction.
  int K = 20;
  double lambda = 0.1;
  int K_inference = 50;
  int K_posterior = 20;
  double lambda_posterior = 1e-3;
};

/// Defaults per model kind (learning rates and batch sizes follow the
/// published training setup; chain settings are shared).
TrainConfig default_config(ModelKind kind);
void validate(const TrainConfig& cfg);

struct LossReport {
  double objective = 0.0;
  double recon = 0.0;
  double kl_or_entropy = 0.0;
  double e_pos = 0.0;
  double e_neg = 0.0;
  /// Diffusion step used by the update, -1 when not applicable.
  int t = -1;
};

struct Reconstruction {
  /// Bernoulli probabilities (or Gaussian means), shape [B, input_dim].
  Tensor output;
  std::optional<VarianceTrace> trace;
};

class Model {
 public:
  explicit Model(TrainConfig cfg) : cfg_(std::move(cfg)) {}
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  virtual ModelKind kind() const = 0;
  /// Trainable parameters with stable names.
  virtual ParamList parameters() const = 0;
  /// Parameters plus metadata tensors that a checkpoint must carry.
  virtual ParamList state() const { return parameters(); }

  virtual LossReport train_step(const Tensor& batch, Rng& rng) = 0;
  virtual Tensor generate(std::size_t n, Rng& rng) const = 0;

  virtual bool can_reconstruct() const { return false; }
  /// `steps` is the diffusion depth (LSD-EBM) or chain length (LEBM); ignored by the VAE.
  virtual Reconstruction reconstruct(const Tensor& x, int steps, Rng& rng, bool trace) const;
  virtual int default_reconstruct_steps() const { return 0; }

  const TrainConfig& config() const { return cfg_; }
  void set_learning_rate(double lr);

 protected:
  virtual std::vector<Adam*> optimizers() = 0;

  TrainConfig cfg_;
};

/// Closed-form KL(N(mu, sigma^2) || N(0, I)) summed over dimensions, averaged over the batch.
Tensor gaussian_kl(const Tensor& mu, const Tensor& log_sigma);
/// Entropy of N(mu, sigma^2) summed over dimensions, averaged over the batch.
Tensor gaussian_entropy(const Tensor& log_sigma);

class VaeModel : public Model {
 public:
  explicit VaeModel(TrainConfig cfg);

  ModelKind kind() const override { return ModelKind::kVae; }
  ParamList parameters() const override;
  ParamList state() const override;
  LossReport train_step(const Tensor& batch, Rng& rng) override;
  Tensor generate(std::size_t n, Rng& rng) const override;
  bool can_reconstruct() const override { return true; }
  /// Deterministic encode (z0 = mu) followed by decode.
  Reconstruction reconstruct(const Tensor& x, int steps, Rng& rng, bool trace) const override;

  const Encoder& encoder() const { return encoder_; }
  const Decoder& decoder() const { return decoder_; }

 protected:
  std::vector<Adam*> optimizers() override { return {&opt_}; }

 private:
  Encoder encoder_;
  Decoder decoder_;
  Adam opt_;
};

/// Data-space energy model sampled with Langevin dynamics from uniform noise.
class EbmModel : public Model {
 public:
  explicit EbmModel(TrainConfig cfg);

  ModelKind kind() const override { return ModelKind::kEbm2d; }
  ParamList parameters() const override { return energy_.parameters(); }
  LossReport train_step(const Tensor& batch, Rng& rng) override;
  /// Langevin samples clipped to [0, 1].
  Tensor generate(std::size_t n, Rng& rng) const override;

  const EnergyNet& energy() const { return energy_; }

 protected:
  std::vector<Adam*> optimizers() override { return {&opt_}; }

 private:
  EnergyNet energy_;
  Adam opt_;
};

/// Decoder with an energy-based latent prior exp(-E(z)) N(z; 0, I); no encoder.
class LebmModel : public Model {
 public:
  explicit LebmModel(TrainConfig cfg);

  ModelKind kind() const override { return ModelKind::kLebm; }
  ParamList parameters() const override;
  ParamList state() const override;
  LossReport train_step(const Tensor& batch, Rng& rng) override;
  Tensor generate(std::size_t n, Rng& rng) const override;
  bool can_reconstruct() const override { return true; }
  /// Posterior Langevin chain of `steps` updates from N(0, I), then decode.
  Reconstruction reconstruct(const Tensor& x, int steps, Rng& rng, bool trace) const override;
  int default_reconstruct_steps() const override { return cfg_.K_inference; }

  const Decoder& decoder() const { return decoder_; }
  const EnergyNet& energy() const { return energy_; }
  LangevinConfig prior_chain() const;
  LangevinConfig posterior_chain(int steps) const;

 protected:
  std::vector<Adam*> optimizers() override { return {&decoder_opt_, &energy_opt_}; }

 private:
  Decoder decoder_;
  EnergyNet energy_;
  Adam decoder_opt_;
  Adam energy_opt_;
};

/// Latent-space diffusion with a time-conditioned energy prior on the reverse
/// process: encoder, decoder, energy E(z, t) and the forward noise schedule.
class LsdEbmModel : public Model {
 public:
  explicit LsdEbmModel(TrainConfig cfg);

  ModelKind kind() const override { return ModelKind::kLsdEbm; }
  ParamList parameters() const override;
  ParamList state() const override;
  LossReport train_step(const Tensor& batch, Rng& rng) override;
  /// z_T ~ N(0, I), denoise T-1..0, decode.
  Tensor generate(std::size_t n, Rng& rng) const override;
  bool can_reconstruct() const override { return true; }
  /// Encode (z0 = mu), diffuse to z_steps, denoise steps-1..0, decode.
  /// steps = 0 is the plain encode/decode path.
  Reconstruction reconstruct(const Tensor& x, int steps, Rng& rng, bool trace) const override;
  int default_reconstruct_steps() const override { return cfg_.T; }

  /// Runs the reverse process from z_{from} down to z_0.
  Tensor denoise(Tensor z, int from, Rng& rng, VarianceTrace* trace) const;

  const Encoder& encoder() const { return encoder_; }
  const Decoder& decoder() const { return decoder_; }
  const EnergyNet& energy() const { return energy_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  LangevinConfig train_chain() const { return {cfg_.K, cfg_.lambda, true}; }
  LangevinConfig inference_chain() const { return {cfg_.K_inference, cfg_.lambda, true}; }

 protected:
  std::vector<Adam*> optimizers() override { return {&ae_opt_, &energy_opt_}; }

 private:
  Encoder encoder_;
  Decoder decoder_;
  EnergyNet energy_;
  NoiseSchedule schedule_;
  Adam ae_opt_;
  Adam energy_opt_;
};

std::unique_ptr<Model> make_model(ModelKind kind, const TrainConfig& cfg);

/// Rebuilds a model whose architecture is inferred from checkpoint tensors and
/// copies the values in. Chain settings and learning rates come from `base`.
std::unique_ptr<Model> model_from_state(ModelKind kind, const std::map<std::string, Tensor>& entries,
                                        TrainConfig base);

/// Copies values into an existing model; throws FormatError naming the first
/// missing or mis-shaped entry.
void load_state(Model& model, const std::map<std::string, Tensor>& entries);

}  // namespace lsd
