#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "lsd/data.hpp"

namespace lsd {

/// Voxel agreement between a prediction S_A and a reference S_B.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(const VoxelGrid& prediction, const VoxelGrid& reference);

// Each metric throws UndefinedMetricError when its denominator vanishes.
double dice(const ConfusionCounts& c);
double volumetric_similarity(const ConfusionCounts& c);
double sensitivity(const ConfusionCounts& c);
double specificity(const ConfusionCounts& c);
/// 2 I(A;B) / (H(A) + H(B)) over the 2x2 joint histogram, natural logs.
double nmi(const ConfusionCounts& c);
double cohen_kappa(const ConfusionCounts& c);

struct MetricsReport {
  double dice = 0.0;
  double vs = 0.0;
  double sen = 0.0;
  double spec = 0.0;
  double nmi = 0.0;
  double ck = 0.0;
  ConfusionCounts counts;
};

/// All six metrics; an undefined metric is reported as NaN here so a batch
/// report can carry it, while the scalar functions above throw.
MetricsReport evaluate(const VoxelGrid& prediction, const VoxelGrid& reference);

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Mean and unbiased (n-1) covariance of the rows of `features`; needs n >= 2.
GaussianFit fit_gaussian(const Eigen::MatrixXd& features);
GaussianFit fit_gaussian(const std::vector<std::vector<double>>& features);

/// |mu_r - mu_g|^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2}). The trace of the
/// square root is taken from the eigenvalues of S_r^{1/2} S_g S_r^{1/2}.
double frechet_distance(const GaussianFit& real, const GaussianFit& generated);

}  // namespace lsd
