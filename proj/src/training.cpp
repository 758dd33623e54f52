#include "lsd/training.hpp"

#include <numeric>
#include <string>
#include <utility>

#include "lsd/errors.hpp"

namespace lsd {

Tensor make_batch(const Samples& data, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ContractError("make_batch: empty index list");
  for (std::size_t i : indices) {
    if (i >= data.size()) {
      throw ContractError("make_batch: index " + std::to_string(i) + " outside dataset of " +
                          std::to_string(data.size()));
    }
  }
  const std::size_t d = data[indices.front()].size();
  std::vector<double> values;
  values.reserve(indices.size() * d);
  for (std::size_t i : indices) {
    const auto& row = data[i];
    if (row.size() != d) throw ContractError("make_batch: samples differ in length");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor::from({indices.size(), d}, std::move(values));
}

namespace {

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
}

void accumulate(LossReport& acc, const LossReport& r) {
  acc.objective += r.objective;
  acc.recon += r.recon;
  acc.kl_or_entropy += r.kl_or_entropy;
  acc.e_pos += r.e_pos;
  acc.e_neg += r.e_neg;
}

}  // namespace

std::vector<EpochSummary> train(Model& model, const Samples& data, Rng& rng, const StepCallback& on_step,
                                const EpochCallback& on_epoch) {
  const TrainConfig& cfg = model.config();
  if (data.empty()) throw ContractError("train: empty dataset");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<EpochSummary> history;
  std::size_t global_step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    EpochSummary summary;
    summary.epoch = epoch;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const Tensor batch = make_batch(data, {order.begin() + static_cast<std::ptrdiff_t>(start),
                                             order.begin() + static_cast<std::ptrdiff_t>(stop)});
      LossReport report;
      try {
        report = model.train_step(batch, rng);
      } catch (const TrainingDivergedError& e) {
        throw TrainingDivergedError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index));
      } catch (const SamplerDivergenceError& e) {
        throw TrainingDivergedError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index));
      }
      accumulate(summary.mean, report);
      ++summary.steps;
      ++global_step;
      if (on_step) on_step(epoch, global_step, report);
    }
    const double n = static_cast<double>(summary.steps);
    summary.mean.objective /= n;
    summary.mean.recon /= n;
    summary.mean.kl_or_entropy /= n;
    summary.mean.e_pos /= n;
    summary.mean.e_neg /= n;
    if (on_epoch) on_epoch(summary);
    history.push_back(summary);
  }
  return history;
}

}  // namespace lsd
