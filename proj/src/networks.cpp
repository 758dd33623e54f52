#include "lsd/networks.hpp"

#include <cmath>

#include "lsd/errors.hpp"

namespace lsd {

namespace {

void require_features(const char* who, const Tensor& x, std::size_t expected) {
  if (x.rank() != 2 || x.dim(1) != expected) {
    throw ContractError(std::string(who) + ": expected input of shape (B, " + std::to_string(expected) + "), got " +
                        to_string(x.shape()));
  }
}

}  // namespace

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

FrozenParams::FrozenParams(ParamList params) : params_(std::move(params)) {
  previous_.reserve(params_.size());
  for (auto& p : params_) {
    previous_.push_back(p.tensor.requires_grad());
    p.tensor.set_requires_grad(false);
  }
}

FrozenParams::~FrozenParams() {
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].tensor.set_requires_grad(previous_[i]);
}

// ---------------------------------------------------------------------------

Linear::Linear(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = uniform(rng, {in, out}, -bound, bound);
  weight_.set_requires_grad(true);
  bias_ = Tensor::zeros({out}, true);
}

void Linear::append_params(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + "weight", weight_});
  out.push_back({prefix + "bias", bias_});
}

Mlp::Mlp(const std::vector<std::size_t>& widths, Rng& rng, bool activate_last) : activate_last_(activate_last) {
  if (widths.size() < 2) throw ContractError("Mlp needs at least an input and an output width");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers_.emplace_back(widths[i], widths[i + 1], rng);
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size() || activate_last_) h = silu(h);
  }
  return h;
}

void Mlp::append_params(const std::string& prefix, ParamList& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].append_params(prefix + std::to_string(i) + ".", out);
}

// ---------------------------------------------------------------------------

Encoder::Encoder(std::size_t input_dim, std::size_t latent_dim, std::size_t hidden1, std::size_t hidden2, Rng& rng)
    : input_dim_(input_dim),
      latent_dim_(latent_dim),
      trunk_({input_dim, hidden1, hidden2}, rng, /*activate_last=*/true),
      mu_head_(hidden2, latent_dim, rng),
      log_sigma_head_(hidden2, latent_dim, rng) {}

Encoding Encoder::encode(const Tensor& x, Rng* rng) const {
  require_features("Encoder::encode", x, input_dim_);
  const Tensor h = trunk_.forward(x);
  Encoding out;
  out.mu = mu_head_.forward(h);
  out.log_sigma = clamp(log_sigma_head_.forward(h), -kLogSigmaBound, kLogSigmaBound);
  if (rng == nullptr) {
    out.z0 = out.mu;
  } else {
    const Tensor eps = gaussian(*rng, out.mu.shape());
    out.z0 = out.mu + exp(out.log_sigma) * eps;
  }
  return out;
}

ParamList Encoder::parameters() const {
  ParamList out;
  trunk_.append_params("encoder.trunk.", out);
  mu_head_.append_params("encoder.mu.", out);
  log_sigma_head_.append_params("encoder.log_sigma.", out);
  return out;
}

// ---------------------------------------------------------------------------

Likelihood parse_likelihood(const std::string& name) {
  if (name == "bernoulli") return Likelihood::kBernoulli;
  if (name == "gaussian") return Likelihood::kGaussian;
  throw ContractError("unknown likelihood '" + name + "' (expected bernoulli or gaussian)");
}

std::string to_string(Likelihood mode) { return mode == Likelihood::kBernoulli ? "bernoulli" : "gaussian"; }

Decoder::Decoder(std::size_t latent_dim, std::size_t output_dim, std::size_t hidden1, std::size_t hidden2, Rng& rng,
                 Likelihood mode, double sigma)
    : latent_dim_(latent_dim),
      output_dim_(output_dim),
      net_({latent_dim, hidden2, hidden1, output_dim}, rng),
      mode_(mode),
      sigma_(sigma) {
  if (!(sigma > 0.0)) throw ContractError("decoder sigma must be positive");
}

Tensor Decoder::forward(const Tensor& z) const {
  require_features("Decoder", z, latent_dim_);
  return net_.forward(z);
}

Tensor Decoder::decode(const Tensor& z) const {
  const Tensor raw = forward(z);
  return mode_ == Likelihood::kBernoulli ? sigmoid(raw) : raw;
}

ParamList Decoder::parameters() const {
  ParamList out;
  net_.append_params("decoder.net.", out);
  return out;
}

Tensor recon_loss_per_sample(const Tensor& x, const Tensor& raw, Likelihood mode, double sigma) {
  if (x.shape() != raw.shape() || x.rank() != 2) {
    throw ContractError("recon_loss: shape mismatch " + to_string(x.shape()) + " vs " + to_string(raw.shape()));
  }
  if (mode == Likelihood::kBernoulli) {
    for (double v : x.data()) {
      if (!(v >= 0.0 && v <= 1.0)) throw ContractError("recon_loss: Bernoulli targets must lie in [0, 1]");
    }
    // -[x log p + (1-x) log(1-p)] with p = sigmoid(l) equals softplus(l) - x l.
    return row_sum(softplus(raw) - x * raw);
  }
  const Tensor diff = x - raw;
  return scale(row_sum(diff * diff), 0.5 / (sigma * sigma));
}

Tensor recon_loss(const Tensor& x, const Tensor& raw, Likelihood mode, double sigma) {
  return mean(recon_loss_per_sample(x, raw, mode, sigma));
}

// ---------------------------------------------------------------------------

EnergyNet::EnergyNet(std::size_t input_dim, int time_steps, std::size_t hidden, Rng& rng)
    : input_dim_(input_dim),
      time_steps_(time_steps),
      embedding_(gaussian(rng, {static_cast<std::size_t>(time_steps) + 1, kEmbedDim})),
      net_({input_dim + kEmbedDim, hidden, hidden, 1}, rng) {
  if (time_steps < 0) throw ContractError("EnergyNet: time_steps must be >= 0");
  embedding_.set_requires_grad(true);
}

Tensor EnergyNet::energy(const Tensor& z, int t) const {
  require_features("EnergyNet", z, input_dim_);
  if (t < 0 || t > time_steps_) {
    throw ContractError("EnergyNet: time step " + std::to_string(t) + " outside embedding range [0, " +
                        std::to_string(time_steps_) + "]");
  }
  const std::vector<std::size_t> rows(z.dim(0), static_cast<std::size_t>(t));
  const Tensor input = concat(z, gather_rows(embedding_, rows));
  return reshape(net_.forward(input), {z.dim(0)});
}

ParamList EnergyNet::parameters() const {
  ParamList out;
  out.push_back({"energy.embedding", embedding_});
  net_.append_params("energy.net.", out);
  return out;
}

}  // namespace lsd
