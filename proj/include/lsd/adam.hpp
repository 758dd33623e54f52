#pragma once

#include <cstdint>
#include <vector>

#include "lsd/tensor.hpp"

namespace lsd {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Owns moment buffers mirroring each parameter.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor> params, AdamOptions options);

  /// Applies one update from the parameters' accumulated gradients.
  /// Throws ContractError if any parameter has no gradient.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return t_; }
  const AdamOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamOptions options_;
  std::uint64_t t_ = 0;
};

}  // namespace lsd
