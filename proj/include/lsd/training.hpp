#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "lsd/models.hpp"
#include "lsd/rng.hpp"

namespace lsd {

/// Flattened training samples, all of the same length.
using Samples = std::vector<std::vector<double>>;

/// Stacks the selected samples into a (B, d) tensor.
Tensor make_batch(const Samples& data, const std::vector<std::size_t>& indices);

struct EpochSummary {
  int epoch = 0;
  std::size_t steps = 0;
  /// Per-field mean over the epoch's steps (t is left at -1).
  LossReport mean;
};

/// Called after every optimizer step with the 1-based epoch and the global step index.
using StepCallback = std::function<void(int epoch, std::size_t step, const LossReport& report)>;
using EpochCallback = std::function<void(const EpochSummary& summary)>;

/// Runs cfg.epochs epochs of shuffled mini-batch training. The last batch of an
/// epoch may be smaller than batch_size. Non-finite losses are rethrown as
/// TrainingDivergedError carrying epoch, batch and diffusion step.
std::vector<EpochSummary> train(Model& model, const Samples& data, Rng& rng, const StepCallback& on_step = {},
                                const EpochCallback& on_epoch = {});

}  // namespace lsd
