#include "lsd/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lsd/errors.hpp"

namespace lsd {

ConfusionCounts confusion(const VoxelGrid& prediction, const VoxelGrid& reference) {
  if (prediction.dims() != reference.dims()) {
    throw ContractError("confusion: grid dims differ (" + to_string(prediction.dims()) + " vs " +
                        to_string(reference.dims()) + ")");
  }
  ConfusionCounts c;
  const auto& a = prediction.voxels();
  const auto& b = reference.voxels();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]) {
      b[i] ? ++c.tp : ++c.fp;
    } else {
      b[i] ? ++c.fn : ++c.tn;
    }
  }
  return c;
}

namespace {

double ratio(double num, double den, const char* metric) {
  if (den == 0.0) throw UndefinedMetricError(std::string(metric) + " is undefined (zero denominator)");
  return num / den;
}

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

double binary_entropy(double p) { return -(xlogx(p) + xlogx(1.0 - p)); }

template <typename F>
double or_nan(F&& f) {
  try {
    return f();
  } catch (const UndefinedMetricError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

double dice(const ConfusionCounts& c) {
  return ratio(2.0 * static_cast<double>(c.tp), static_cast<double>(2 * c.tp + c.fp + c.fn), "Dice");
}

double volumetric_similarity(const ConfusionCounts& c) {
  const double a = static_cast<double>(c.tp + c.fp);
  const double b = static_cast<double>(c.tp + c.fn);
  return 1.0 - ratio(std::abs(a - b), a + b, "volumetric similarity");
}

double sensitivity(const ConfusionCounts& c) {
  return ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn), "sensitivity");
}

double specificity(const ConfusionCounts& c) {
  return ratio(static_cast<double>(c.tn), static_cast<double>(c.tn + c.fp), "specificity");
}

double nmi(const ConfusionCounts& c) {
  const double n = static_cast<double>(c.total());
  if (n == 0.0) throw UndefinedMetricError("NMI is undefined for empty volumes");
  const double p11 = static_cast<double>(c.tp) / n, p10 = static_cast<double>(c.fp) / n;
  const double p01 = static_cast<double>(c.fn) / n, p00 = static_cast<double>(c.tn) / n;
  const double pa = p11 + p10, pb = p11 + p01;
  const double ha = binary_entropy(pa), hb = binary_entropy(pb);
  if (ha == 0.0 || hb == 0.0) throw UndefinedMetricError("NMI is undefined for a constant volume");
  const double h_joint = -(xlogx(p11) + xlogx(p10) + xlogx(p01) + xlogx(p00));
  const double mi = ha + hb - h_joint;
  return 2.0 * mi / (ha + hb);
}

double cohen_kappa(const ConfusionCounts& c) {
  const double n = static_cast<double>(c.total());
  if (n == 0.0) throw UndefinedMetricError("Cohen's kappa is undefined for empty volumes");
  const double po = static_cast<double>(c.tp + c.tn) / n;
  const double pa = static_cast<double>(c.tp + c.fp) / n, pb = static_cast<double>(c.tp + c.fn) / n;
  const double pe = pa * pb + (1.0 - pa) * (1.0 - pb);
  return ratio(po - pe, 1.0 - pe, "Cohen's kappa");
}

MetricsReport evaluate(const VoxelGrid& prediction, const VoxelGrid& reference) {
  MetricsReport r;
  r.counts = confusion(prediction, reference);
  const ConfusionCounts& c = r.counts;
  r.dice = or_nan([&] { return dice(c); });
  r.vs = or_nan([&] { return volumetric_similarity(c); });
  r.sen = or_nan([&] { return sensitivity(c); });
  r.spec = or_nan([&] { return specificity(c); });
  r.nmi = or_nan([&] { return nmi(c); });
  r.ck = or_nan([&] { return cohen_kappa(c); });
  return r;
}

GaussianFit fit_gaussian(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) throw ContractError("fit_gaussian needs at least 2 samples");
  GaussianFit fit;
  fit.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - fit.mean.transpose();
  fit.cov = (centered.transpose() * centered) / static_cast<double>(features.rows() - 1);
  return fit;
}

GaussianFit fit_gaussian(const std::vector<std::vector<double>>& features) {
  if (features.empty()) throw ContractError("fit_gaussian needs at least 2 samples");
  const auto cols = static_cast<Eigen::Index>(features.front().size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(features.size()), cols);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (static_cast<Eigen::Index>(features[i].size()) != cols) {
      throw ContractError("fit_gaussian: feature vectors differ in length");
    }
    for (Eigen::Index j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), j) = features[i][static_cast<std::size_t>(j)];
  }
  return fit_gaussian(m);
}

namespace {

constexpr double kPsdTolerance = 1e-10;

// Symmetric square root, rejecting matrices with eigenvalues below -tolerance.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  if (eig.info() != Eigen::Success) throw ContractError(std::string(what) + ": eigendecomposition failed");
  Eigen::VectorXd ev = eig.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -kPsdTolerance * scale) {
      throw ContractError(std::string(what) + " is not positive semidefinite (eigenvalue " + std::to_string(ev(i)) + ")");
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

void check_fit(const GaussianFit& f, Eigen::Index dim, const char* what) {
  if (f.mean.size() != dim || f.cov.rows() != dim || f.cov.cols() != dim) {
    throw ContractError(std::string("frechet_distance: ") + what + " has inconsistent dimensions");
  }
}

}  // namespace

double frechet_distance(const GaussianFit& real, const GaussianFit& generated) {
  const Eigen::Index d = real.mean.size();
  check_fit(real, d, "real fit");
  check_fit(generated, d, "generated fit");
  const Eigen::MatrixXd root_r = psd_sqrt(real.cov, "real covariance");
  psd_sqrt(generated.cov, "generated covariance");
  const Eigen::MatrixXd inner = root_r * generated.cov * root_r;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  double trace_sqrt = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) trace_sqrt += std::sqrt(std::max(eig.eigenvalues()(i), 0.0));
  const double mean_term = (real.mean - generated.mean).squaredNorm();
  const double value = mean_term + real.cov.trace() + generated.cov.trace() - 2.0 * trace_sqrt;
  return std::max(value, 0.0);
}

}  // namespace lsd
