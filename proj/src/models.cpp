#include "lsd/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "lsd/errors.hpp"

namespace lsd {

namespace {

// Stream ids for parameter initialisation, one per network.
constexpr std::uint64_t kEncoderStream = 101;
constexpr std::uint64_t kDecoderStream = 102;
constexpr std::uint64_t kEnergyStream = 103;

Rng init_rng(const TrainConfig& cfg, std::uint64_t stream) { return Rng(cfg.seed).split(stream); }

Encoder make_encoder(const TrainConfig& cfg) {
  Rng rng = init_rng(cfg, kEncoderStream);
  return Encoder(cfg.input_dim, cfg.latent_dim, cfg.hidden1, cfg.hidden2, rng);
}

Decoder make_decoder(const TrainConfig& cfg) {
  Rng rng = init_rng(cfg, kDecoderStream);
  return Decoder(cfg.latent_dim, cfg.input_dim, cfg.hidden1, cfg.hidden2, rng, cfg.likelihood, cfg.decoder_sigma);
}

EnergyNet make_energy(const TrainConfig& cfg, std::size_t input_dim, int time_steps) {
  Rng rng = init_rng(cfg, kEnergyStream);
  return EnergyNet(input_dim, time_steps, cfg.energy_hidden, rng);
}

ParamList concat_params(std::initializer_list<ParamList> lists) {
  ParamList out;
  for (const auto& l : lists) out.insert(out.end(), l.begin(), l.end());
  return out;
}

NamedTensor decoder_meta(const Decoder& decoder) {
  return {"meta.decoder",
          Tensor::from({2}, {decoder.mode() == Likelihood::kBernoulli ? 0.0 : 1.0, decoder.sigma()})};
}

void require_finite(double value, const char* what, int t) {
  if (!std::isfinite(value)) {
    throw TrainingDivergedError(std::string("non-finite ") + what + (t >= 0 ? " (t=" + std::to_string(t) + ")" : ""));
  }
}

/// Contrastive energy loss mean E(pos) - mean E(neg) plus optional magnitude penalty.
Tensor contrastive_loss(const Tensor& e_pos, const Tensor& e_neg, double reg) {
  Tensor loss = mean(e_pos) - mean(e_neg);
  if (reg > 0.0) loss = loss + scale(mean(e_pos * e_pos) + mean(e_neg * e_neg), reg);
  return loss;
}

void check_batch(const Tensor& batch, std::size_t input_dim) {
  if (batch.rank() != 2 || batch.dim(1) != input_dim) {
    throw ContractError("training batch must have shape (B, " + std::to_string(input_dim) + "), got " +
                        to_string(batch.shape()));
  }
  for (double v : batch.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("training batch values must lie in [0, 1]");
  }
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kVae:
      return "vae";
    case ModelKind::kEbm2d:
      return "ebm2d";
    case ModelKind::kLebm:
      return "lebm";
    case ModelKind::kLsdEbm:
      return "lsdebm";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "vae") return ModelKind::kVae;
  if (name == "ebm2d") return ModelKind::kEbm2d;
  if (name == "lebm") return ModelKind::kLebm;
  if (name == "lsdebm") return ModelKind::kLsdEbm;
  throw ContractError("unknown model '" + name + "' (expected vae, ebm2d, lebm or lsdebm)");
}

TrainConfig default_config(ModelKind kind) {
  TrainConfig cfg;
  switch (kind) {
    case ModelKind::kVae:
      cfg.lr = 2e-5;
      cfg.batch_size = 4;
      break;
    case ModelKind::kLebm:
      cfg.lr = 1e-4;
      cfg.batch_size = 2;
      cfg.K_inference = 100;
      break;
    case ModelKind::kLsdEbm:
      cfg.lr = 2e-5;
      cfg.batch_size = 4;
      break;
    case ModelKind::kEbm2d:
      cfg.lr = 1e-4;
      cfg.batch_size = 4;
      cfg.input_dim = 28 * 28;
      break;
  }
  return cfg;
}

void validate(const TrainConfig& cfg) {
  auto fail = [](const std::string& what) { throw ContractError("invalid config: " + what); };
  if (cfg.epochs < 0) fail("epochs must be >= 0");
  if (cfg.batch_size == 0) fail("batch_size must be positive");
  if (!(cfg.lr >= 0.0)) fail("lr must be >= 0");
  if (!(cfg.energy_reg >= 0.0)) fail("energy_reg must be >= 0");
  if (cfg.input_dim == 0 || cfg.latent_dim == 0 || cfg.hidden1 == 0 || cfg.hidden2 == 0 || cfg.energy_hidden == 0) {
    fail("network widths must be positive");
  }
  if (!(cfg.decoder_sigma > 0.0)) fail("decoder_sigma must be positive");
  if (cfg.T < 1) fail("T must be >= 1");
  if (cfg.K < 0 || cfg.K_inference < 0 || cfg.K_posterior < 0) fail("chain lengths must be >= 0");
  if (!(cfg.lambda > 0.0) || !(cfg.lambda_posterior > 0.0)) fail("Langevin step sizes must be positive");
}

void Model::set_learning_rate(double lr) {
  cfg_.lr = lr;
  for (Adam* opt : optimizers()) opt->set_lr(lr);
}

Reconstruction Model::reconstruct(const Tensor&, int, Rng&, bool) const {
  throw ContractError("model '" + to_string(kind()) + "' does not support reconstruction");
}

Tensor gaussian_kl(const Tensor& mu, const Tensor& log_sigma) {
  // 0.5 * sum(mu^2 + sigma^2 - 1 - 2 log sigma)
  const Tensor var = exp(scale(log_sigma, 2.0));
  const Tensor terms = mu * mu + var - scale(log_sigma, 2.0);
  const double batch = static_cast<double>(mu.dim(0));
  return add_scalar(scale(sum(terms), 0.5 / batch), -0.5 * static_cast<double>(mu.dim(1)));
}

Tensor gaussian_entropy(const Tensor& log_sigma) {
  const double batch = static_cast<double>(log_sigma.dim(0));
  const double per_dim = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  return add_scalar(scale(sum(log_sigma), 1.0 / batch), per_dim * static_cast<double>(log_sigma.dim(1)));
}

// ---------------------------------------------------------------------------
// VAE

VaeModel::VaeModel(TrainConfig cfg) : Model(std::move(cfg)), encoder_(make_encoder(cfg_)), decoder_(make_decoder(cfg_)) {
  validate(cfg_);
  opt_ = Adam(tensors_of(parameters()), {.lr = cfg_.lr});
}

ParamList VaeModel::parameters() const { return concat_params({encoder_.parameters(), decoder_.parameters()}); }

ParamList VaeModel::state() const {
  ParamList out = parameters();
  out.push_back(decoder_meta(decoder_));
  return out;
}

LossReport VaeModel::train_step(const Tensor& batch, Rng& rng) {
  check_batch(batch, cfg_.input_dim);
  const Encoding enc = encoder_.encode(batch, &rng);
  const Tensor recon = recon_loss(batch, decoder_.forward(enc.z0), decoder_.mode(), decoder_.sigma());
  const Tensor kl = gaussian_kl(enc.mu, enc.log_sigma);
  const Tensor loss = recon + kl;
  require_finite(loss.item(), "VAE loss", -1);
  opt_.zero_grad();
  loss.backward();
  opt_.step();
  return {.objective = loss.item(), .recon = recon.item(), .kl_or_entropy = kl.item()};
}

Tensor VaeModel::generate(std::size_t n, Rng& rng) const {
  FrozenParams frozen(parameters());
  return decoder_.decode(gaussian(rng, {n, cfg_.latent_dim})).detach();
}

Reconstruction VaeModel::reconstruct(const Tensor& x, int, Rng&, bool) const {
  FrozenParams frozen(parameters());
  const Encoding enc = encoder_.encode(x, nullptr);
  return {decoder_.decode(enc.mu).detach(), std::nullopt};
}

// ---------------------------------------------------------------------------
// Image-space EBM

EbmModel::EbmModel(TrainConfig cfg) : Model(std::move(cfg)), energy_(make_energy(cfg_, cfg_.input_dim, 0)) {
  validate(cfg_);
  opt_ = Adam(tensors_of(parameters()), {.lr = cfg_.lr});
}

LossReport EbmModel::train_step(const Tensor& batch, Rng& rng) {
  check_batch(batch, cfg_.input_dim);
  const Tensor init = uniform(rng, batch.shape());
  const Tensor negatives = langevin_image_ebm(init, energy_grad(energy_), {cfg_.K, cfg_.lambda, true}, rng);
  const Tensor e_pos = energy_.energy(batch, 0);
  const Tensor e_neg = energy_.energy(negatives, 0);
  const Tensor loss = contrastive_loss(e_pos, e_neg, cfg_.energy_reg);
  require_finite(loss.item(), "EBM energy loss", -1);
  opt_.zero_grad();
  loss.backward();
  opt_.step();
  return {.objective = loss.item(), .e_pos = mean(e_pos).item(), .e_neg = mean(e_neg).item()};
}

Tensor EbmModel::generate(std::size_t n, Rng& rng) const {
  const Tensor init = uniform(rng, {n, cfg_.input_dim});
  Tensor samples = langevin_image_ebm(init, energy_grad(energy_), {cfg_.K, cfg_.lambda, true}, rng);
  std::vector<double> clipped(samples.data().begin(), samples.data().end());
  for (double& v : clipped) v = std::clamp(v, 0.0, 1.0);
  return Tensor::from(samples.shape(), std::move(clipped));
}

// ---------------------------------------------------------------------------
// LEBM

LebmModel::LebmModel(TrainConfig cfg)
    : Model(std::move(cfg)), decoder_(make_decoder(cfg_)), energy_(make_energy(cfg_, cfg_.latent_dim, 0)) {
  validate(cfg_);
  decoder_opt_ = Adam(tensors_of(decoder_.parameters()), {.lr = cfg_.lr});
  energy_opt_ = Adam(tensors_of(energy_.parameters()), {.lr = cfg_.lr});
}

ParamList LebmModel::parameters() const { return concat_params({decoder_.parameters(), energy_.parameters()}); }

ParamList LebmModel::state() const {
  ParamList out = parameters();
  out.push_back(decoder_meta(decoder_));
  return out;
}

LangevinConfig LebmModel::prior_chain() const { return {cfg_.K, cfg_.lambda, true}; }

LangevinConfig LebmModel::posterior_chain(int steps) const { return {steps, cfg_.lambda_posterior, true}; }

LossReport LebmModel::train_step(const Tensor& batch, Rng& rng) {
  check_batch(batch, cfg_.input_dim);
  const EnergyGrad eg = energy_grad(energy_);
  const Tensor z_pos = lebm_posterior_sample(batch, decoder_, eg, posterior_chain(cfg_.K_posterior), rng);
  const Tensor z_neg = lebm_prior_sample(eg, batch.dim(0), cfg_.latent_dim, prior_chain(), rng);

  const Tensor recon = recon_loss(batch, decoder_.forward(z_pos), decoder_.mode(), decoder_.sigma());
  require_finite(recon.item(), "LEBM reconstruction loss", -1);
  decoder_opt_.zero_grad();
  recon.backward();
  decoder_opt_.step();

  const Tensor e_pos = energy_.energy(z_pos, 0);
  const Tensor e_neg = energy_.energy(z_neg, 0);
  const Tensor e_loss = contrastive_loss(e_pos, e_neg, cfg_.energy_reg);
  require_finite(e_loss.item(), "LEBM energy loss", -1);
  energy_opt_.zero_grad();
  e_loss.backward();
  energy_opt_.step();

  return {.objective = recon.item(), .recon = recon.item(), .e_pos = mean(e_pos).item(), .e_neg = mean(e_neg).item()};
}

Tensor LebmModel::generate(std::size_t n, Rng& rng) const {
  const Tensor z = lebm_prior_sample(energy_grad(energy_), n, cfg_.latent_dim, prior_chain(), rng);
  FrozenParams frozen(parameters());
  return decoder_.decode(z).detach();
}

Reconstruction LebmModel::reconstruct(const Tensor& x, int steps, Rng& rng, bool trace) const {
  if (steps < 0) throw ContractError("LEBM reconstruction needs a non-negative chain length");
  std::optional<VarianceTrace> tr;
  if (trace) tr = VarianceTrace{VarianceTrace::Direction::kMcmc, {}};
  const Tensor z = lebm_posterior_sample(x, decoder_, energy_grad(energy_), posterior_chain(steps), rng, Tensor(),
                                         tr ? &*tr : nullptr);
  FrozenParams frozen(parameters());
  return {decoder_.decode(z).detach(), std::move(tr)};
}

// ---------------------------------------------------------------------------
// LSD-EBM

LsdEbmModel::LsdEbmModel(TrainConfig cfg)
    : Model(std::move(cfg)),
      encoder_(make_encoder(cfg_)),
      decoder_(make_decoder(cfg_)),
      energy_(make_energy(cfg_, cfg_.latent_dim, cfg_.T)),
      schedule_(linear_schedule(cfg_.T, cfg_.sigma_sq_min, cfg_.sigma_sq_max)) {
  validate(cfg_);
  if (cfg_.sigma_sq_min <= 0.0) throw ContractError("LSD-EBM sampling needs a strictly positive schedule");
  ae_opt_ = Adam(tensors_of(concat_params({encoder_.parameters(), decoder_.parameters()})), {.lr = cfg_.lr});
  energy_opt_ = Adam(tensors_of(energy_.parameters()), {.lr = cfg_.lr});
}

ParamList LsdEbmModel::parameters() const {
  return concat_params({encoder_.parameters(), decoder_.parameters(), energy_.parameters()});
}

ParamList LsdEbmModel::state() const {
  ParamList out = parameters();
  out.push_back(decoder_meta(decoder_));
  out.push_back({"meta.schedule", Tensor::from({2}, {cfg_.sigma_sq_min, cfg_.sigma_sq_max})});
  return out;
}

LossReport LsdEbmModel::train_step(const Tensor& batch, Rng& rng) {
  check_batch(batch, cfg_.input_dim);
  LossReport report;

  // Encoder/decoder: reconstruction minus posterior entropy, pathwise gradients.
  const Encoding enc = encoder_.encode(batch, &rng);
  const Tensor recon = recon_loss(batch, decoder_.forward(enc.z0), decoder_.mode(), decoder_.sigma());
  const Tensor entropy = gaussian_entropy(enc.log_sigma);
  const Tensor ae_loss = recon - entropy;
  require_finite(ae_loss.item(), "LSD-EBM reconstruction objective", -1);
  ae_opt_.zero_grad();
  ae_loss.backward();
  ae_opt_.step();

  // Energy: positives from the forward diffusion, negatives from the
  // conditional Langevin chain started at z_{t+1}.
  const int t = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(cfg_.T)));
  const Tensor z0 = enc.z0.detach();
  const Tensor z_t = forward_marginal(z0, t, schedule_, rng);
  const Tensor z_next = forward_step(z_t, t, schedule_, rng);
  const Tensor z_neg = langevin_denoise_step(z_next, t, energy_grad(energy_), schedule_, train_chain(), rng);

  const Tensor e_pos = energy_.energy(z_t, t);
  const Tensor e_neg = energy_.energy(z_neg, t);
  const Tensor e_loss = contrastive_loss(e_pos, e_neg, cfg_.energy_reg);
  require_finite(e_loss.item(), "LSD-EBM energy loss", t);
  energy_opt_.zero_grad();
  e_loss.backward();
  energy_opt_.step();

  report.objective = ae_loss.item();
  report.recon = recon.item();
  report.kl_or_entropy = entropy.item();
  report.e_pos = mean(e_pos).item();
  report.e_neg = mean(e_neg).item();
  report.t = t;
  return report;
}

Tensor LsdEbmModel::denoise(Tensor z, int from, Rng& rng, VarianceTrace* trace) const {
  if (from < 0 || from > cfg_.T) {
    throw ContractError("denoise: start step " + std::to_string(from) + " outside [0, " + std::to_string(cfg_.T) + "]");
  }
  const EnergyGrad eg = energy_grad(energy_);
  const LangevinConfig chain = inference_chain();
  for (int t = from - 1; t >= 0; --t) {
    z = langevin_denoise_step(z, t, eg, schedule_, chain, rng);
    if (trace != nullptr) trace->record(z);
  }
  return z;
}

Tensor LsdEbmModel::generate(std::size_t n, Rng& rng) const {
  const Tensor z0 = denoise(gaussian(rng, {n, cfg_.latent_dim}), cfg_.T, rng, nullptr);
  FrozenParams frozen(parameters());
  return decoder_.decode(z0).detach();
}

Reconstruction LsdEbmModel::reconstruct(const Tensor& x, int steps, Rng& rng, bool trace) const {
  if (steps < 0 || steps > cfg_.T) {
    throw ContractError("LSD-EBM reconstruction steps " + std::to_string(steps) + " outside [0, " +
                        std::to_string(cfg_.T) + "]");
  }
  Tensor mu;
  {
    FrozenParams frozen(parameters());
    mu = encoder_.encode(x, nullptr).mu.detach();
  }
  std::optional<VarianceTrace> tr;
  if (trace) tr = VarianceTrace{VarianceTrace::Direction::kDenoising, {}};
  const Tensor z_start = forward_marginal(mu, steps, schedule_, rng);
  const Tensor z0 = denoise(z_start, steps, rng, tr ? &*tr : nullptr);
  FrozenParams frozen(parameters());
  return {decoder_.decode(z0).detach(), std::move(tr)};
}

// ---------------------------------------------------------------------------
// Construction and state loading

std::unique_ptr<Model> make_model(ModelKind kind, const TrainConfig& cfg) {
  switch (kind) {
    case ModelKind::kVae:
      return std::make_unique<VaeModel>(cfg);
    case ModelKind::kEbm2d:
      return std::make_unique<EbmModel>(cfg);
    case ModelKind::kLebm:
      return std::make_unique<LebmModel>(cfg);
    case ModelKind::kLsdEbm:
      return std::make_unique<LsdEbmModel>(cfg);
  }
  throw ContractError("unknown model kind");
}

namespace {

const Tensor& entry(const std::map<std::string, Tensor>& entries, const std::string& name) {
  const auto it = entries.find(name);
  if (it == entries.end()) throw FormatError("checkpoint is missing entry '" + name + "'");
  return it->second;
}

std::size_t entry_dim(const std::map<std::string, Tensor>& entries, const std::string& name, std::size_t axis) {
  const Tensor& t = entry(entries, name);
  if (axis >= t.rank()) throw FormatError("checkpoint entry '" + name + "' has unexpected shape " + to_string(t.shape()));
  return t.dim(axis);
}

void apply_decoder_meta(const std::map<std::string, Tensor>& entries, TrainConfig& cfg) {
  const Tensor& meta = entry(entries, "meta.decoder");
  if (meta.size() != 2) throw FormatError("checkpoint entry 'meta.decoder' must hold 2 values");
  cfg.likelihood = meta[0] == 0.0 ? Likelihood::kBernoulli : Likelihood::kGaussian;
  cfg.decoder_sigma = meta[1];
}

}  // namespace

std::unique_ptr<Model> model_from_state(ModelKind kind, const std::map<std::string, Tensor>& entries,
                                        TrainConfig cfg) {
  switch (kind) {
    case ModelKind::kVae:
    case ModelKind::kLsdEbm:
      cfg.input_dim = entry_dim(entries, "encoder.trunk.0.weight", 0);
      cfg.hidden1 = entry_dim(entries, "encoder.trunk.0.weight", 1);
      cfg.hidden2 = entry_dim(entries, "encoder.trunk.1.weight", 1);
      cfg.latent_dim = entry_dim(entries, "encoder.mu.weight", 1);
      apply_decoder_meta(entries, cfg);
      if (kind == ModelKind::kLsdEbm) {
        cfg.T = static_cast<int>(entry_dim(entries, "energy.embedding", 0)) - 1;
        cfg.energy_hidden = entry_dim(entries, "energy.net.0.weight", 1);
        const Tensor& sched = entry(entries, "meta.schedule");
        if (sched.size() != 2) throw FormatError("checkpoint entry 'meta.schedule' must hold 2 values");
        cfg.sigma_sq_min = sched[0];
        cfg.sigma_sq_max = sched[1];
      }
      break;
    case ModelKind::kLebm:
      cfg.latent_dim = entry_dim(entries, "decoder.net.0.weight", 0);
      cfg.hidden2 = entry_dim(entries, "decoder.net.0.weight", 1);
      cfg.hidden1 = entry_dim(entries, "decoder.net.1.weight", 1);
      cfg.input_dim = entry_dim(entries, "decoder.net.2.weight", 1);
      cfg.energy_hidden = entry_dim(entries, "energy.net.0.weight", 1);
      apply_decoder_meta(entries, cfg);
      break;
    case ModelKind::kEbm2d:
      cfg.input_dim = entry_dim(entries, "energy.net.0.weight", 0) - EnergyNet::kEmbedDim;
      cfg.energy_hidden = entry_dim(entries, "energy.net.0.weight", 1);
      break;
  }
  auto model = make_model(kind, cfg);
  load_state(*model, entries);
  return model;
}

void load_state(Model& model, const std::map<std::string, Tensor>& entries) {
  std::set<std::string> expected;
  for (const auto& p : model.state()) expected.insert(p.name);
  for (const auto& [name, value] : entries) {
    if (!expected.count(name)) throw FormatError("checkpoint has unexpected entry '" + name + "'");
  }
  for (auto& p : model.parameters()) {
    const Tensor& src = entry(entries, p.name);
    if (src.shape() != p.tensor.shape()) {
      throw FormatError("checkpoint entry '" + p.name + "' has shape " + to_string(src.shape()) + ", model expects " +
                        to_string(p.tensor.shape()));
    }
    Tensor dst = p.tensor;
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  }
  for (const auto& p : model.state()) entry(entries, p.name);
}

}  // namespace lsd
