#include <doctest.h>

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "lsd/errors.hpp"
#include "lsd/metrics.hpp"
#include "lsd/rng.hpp"

using namespace lsd;

namespace {

VoxelGrid random_grid(Rng& rng, GridDims dims, double p) {
  std::vector<std::uint8_t> v(dims.count());
  for (auto& b : v) b = rng.uniform() < p ? 1 : 0;
  return VoxelGrid(dims, std::move(v));
}

VoxelGrid complement(const VoxelGrid& g) {
  std::vector<std::uint8_t> v(g.voxels().begin(), g.voxels().end());
  for (auto& b : v) b = 1 - b;
  return VoxelGrid(g.dims(), std::move(v));
}

// Independent oracle: works from the two voxel arrays directly, using set
// sizes and marginals rather than the confusion counts.
struct Oracle {
  double dice, vs, sen, spec, nmi, ck;
};

Oracle brute_force(const VoxelGrid& a, const VoxelGrid& b) {
  const std::size_t n = a.dims().count();
  double size_a = 0, size_b = 0, inter = 0, both_zero = 0;
  double joint[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < n; ++i) {
    const int va = a[i], vb = b[i];
    size_a += va;
    size_b += vb;
    inter += va * vb;
    both_zero += (1 - va) * (1 - vb);
    joint[va][vb] += 1.0;
  }
  const double total = static_cast<double>(n);
  Oracle o{};
  o.dice = 2.0 * inter / (size_a + size_b);
  o.vs = 1.0 - std::abs(size_a - size_b) / (size_a + size_b);
  o.sen = inter / size_b;
  o.spec = both_zero / (total - size_b);

  double h_a = 0, h_b = 0, mi = 0;
  const double pa[2] = {1.0 - size_a / total, size_a / total};
  const double pb[2] = {1.0 - size_b / total, size_b / total};
  for (int i = 0; i < 2; ++i) {
    if (pa[i] > 0) h_a -= pa[i] * std::log(pa[i]);
    if (pb[i] > 0) h_b -= pb[i] * std::log(pb[i]);
    for (int j = 0; j < 2; ++j) {
      const double pij = joint[i][j] / total;
      if (pij > 0) mi += pij * std::log(pij / (pa[i] * pb[j]));
    }
  }
  o.nmi = 2.0 * mi / (h_a + h_b);

  const double po = (inter + both_zero) / total;
  const double pe = pa[1] * pb[1] + pa[0] * pb[0];
  o.ck = (po - pe) / (1.0 - pe);
  return o;
}

ConfusionCounts counts(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn) {
  return {tp, tn, fp, fn};
}

// Fréchet distance through a different route: the trace of (S_r S_g)^{1/2}
// from the (real, non-negative) eigenvalues of the non-symmetric product.
double frechet_oracle(const GaussianFit& r, const GaussianFit& g) {
  const Eigen::MatrixXd prod = r.cov * g.cov;
  Eigen::EigenSolver<Eigen::MatrixXd> es(prod);
  double tr_sqrt = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) tr_sqrt += std::sqrt(std::max(es.eigenvalues()[i].real(), 0.0));
  return (r.mean - g.mean).squaredNorm() + r.cov.trace() + g.cov.trace() - 2.0 * tr_sqrt;
}

GaussianFit random_fit(Rng& rng, int d, int samples) {
  Eigen::MatrixXd x(samples, d);
  const double shift = rng.normal();
  for (int i = 0; i < samples; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = rng.normal() * (1.0 + j % 3) + shift;
  }
  return fit_gaussian(x);
}

}  // namespace

TEST_CASE("confusion counts") {
  const GridDims d{2, 2, 2};
  const VoxelGrid a(d, std::vector<std::uint8_t>{1, 1, 1, 0, 0, 0, 0, 0});
  CHECK(confusion(a, a) == counts(3, 5, 0, 0));
  const ConfusionCounts inv = confusion(a, complement(a));
  CHECK(inv.tp == 0);
  CHECK(inv.tn == 0);
  CHECK(inv.fp == 3);
  CHECK(inv.fn == 5);
  CHECK(inv.total() == 8);
  CHECK_THROWS_AS(confusion(a, VoxelGrid(GridDims{2, 2, 3}, 0)), ContractError);
}

TEST_CASE("hand-evaluated metric values") {
  // Dice
  CHECK(dice(counts(5, 10, 0, 0)) == 1.0);
  CHECK(dice(counts(0, 10, 4, 4)) == 0.0);
  CHECK(dice(counts(4, 10, 4, 4)) == 0.5);  // |A| = |B| = 8, |A n B| = 4
  CHECK_THROWS_AS(dice(counts(0, 10, 0, 0)), UndefinedMetricError);

  // Volumetric similarity
  CHECK(volumetric_similarity(counts(3, 0, 5, 5)) == 1.0);
  CHECK(volumetric_similarity(counts(10, 0, 0, 20)) == 0.5);  // |A| = 10, |B| = 30
  CHECK(volumetric_similarity(counts(0, 10, 0, 7)) == 0.0);
  CHECK_THROWS_AS(volumetric_similarity(counts(0, 10, 0, 0)), UndefinedMetricError);

  // Sensitivity / specificity with S_A as prediction
  CHECK(sensitivity(counts(4, 4, 0, 0)) == 1.0);
  CHECK(specificity(counts(4, 4, 0, 0)) == 1.0);
  CHECK(sensitivity(counts(4, 0, 4, 0)) == 1.0);  // all-ones prediction, half-ones reference
  CHECK(specificity(counts(4, 0, 4, 0)) == 0.0);
  CHECK_THROWS_AS(sensitivity(counts(0, 4, 4, 0)), UndefinedMetricError);
  CHECK_THROWS_AS(specificity(counts(4, 0, 0, 4)), UndefinedMetricError);

  // NMI
  CHECK(nmi(counts(3, 5, 0, 0)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(nmi(counts(0, 0, 3, 5)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(nmi(counts(2, 2, 2, 2)) == doctest::Approx(0.0));
  CHECK_THROWS_AS(nmi(counts(0, 8, 0, 0)), UndefinedMetricError);
  CHECK_THROWS_AS(nmi(counts(4, 0, 0, 4)), UndefinedMetricError);

  // Cohen's kappa
  CHECK(cohen_kappa(counts(3, 5, 0, 0)) == 1.0);
  CHECK(cohen_kappa(counts(7, 7, 7, 7)) == 0.0);
  CHECK(cohen_kappa(counts(0, 0, 4, 4)) == -1.0);
  CHECK_THROWS_AS(cohen_kappa(counts(0, 8, 0, 0)), UndefinedMetricError);
  CHECK_THROWS_AS(cohen_kappa(counts(8, 0, 0, 0)), UndefinedMetricError);
}

TEST_CASE("all metrics match the brute-force oracle on 200 random 8^3 pairs") {
  Rng rng(2024);
  const GridDims d{8, 8, 8};
  for (int trial = 0; trial < 200; ++trial) {
    const double pa = 0.05 + 0.9 * rng.uniform();
    const double pb = 0.05 + 0.9 * rng.uniform();
    const VoxelGrid a = random_grid(rng, d, pa);
    const VoxelGrid b = random_grid(rng, d, pb);
    const Oracle o = brute_force(a, b);
    const MetricsReport r = evaluate(a, b);
    CAPTURE(trial);
    CHECK(std::abs(r.dice - o.dice) <= 1e-12);
    CHECK(std::abs(r.vs - o.vs) <= 1e-12);
    CHECK(std::abs(r.sen - o.sen) <= 1e-12);
    CHECK(std::abs(r.spec - o.spec) <= 1e-12);
    CHECK(std::abs(r.nmi - o.nmi) <= 1e-12);
    CHECK(std::abs(r.ck - o.ck) <= 1e-12);
    CHECK(r.counts.total() == 512);

    // Symmetries
    const MetricsReport s = evaluate(b, a);
    CHECK(std::abs(s.dice - r.dice) <= 1e-15);
    CHECK(std::abs(s.vs - r.vs) <= 1e-15);
    CHECK(std::abs(s.nmi - r.nmi) <= 1e-12);
    CHECK(std::abs(s.ck - r.ck) <= 1e-12);
    // Swapping roles and complementing both exchanges sensitivity and specificity.
    const MetricsReport c = evaluate(complement(a), complement(b));
    CHECK(std::abs(c.sen - r.spec) <= 1e-15);
    CHECK(std::abs(c.spec - r.sen) <= 1e-15);

    for (double v : {r.dice, r.vs, r.sen, r.spec}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(r.nmi >= -1e-12);
    CHECK(r.nmi <= 1.0 + 1e-12);
    CHECK(r.ck <= 1.0);
  }
}

TEST_CASE("independent 16^3 volumes have near-zero NMI") {
  Rng rng(5);
  const GridDims d{16, 16, 16};
  CHECK(evaluate(random_grid(rng, d, 0.5), random_grid(rng, d, 0.3)).nmi < 0.01);
}

TEST_CASE("evaluate reports undefined metrics as NaN") {
  const GridDims d{2, 2, 2};
  const VoxelGrid empty(d, 0);
  const MetricsReport r = evaluate(empty, empty);
  CHECK(std::isnan(r.dice));
  CHECK(std::isnan(r.vs));
  CHECK(std::isnan(r.sen));
  CHECK(r.spec == 1.0);
  CHECK(std::isnan(r.nmi));
  CHECK(std::isnan(r.ck));
}

TEST_CASE("Gaussian fit") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 3, 2, 5, 6, 7, 6;
  const GaussianFit f = fit_gaussian(x);
  CHECK(f.mean(0) == 4.0);
  CHECK(f.mean(1) == 4.0);
  CHECK(f.cov(0, 0) == doctest::Approx(20.0 / 3.0));
  CHECK(f.cov(1, 1) == doctest::Approx(16.0 / 3.0));
  CHECK(f.cov(0, 1) == doctest::Approx(16.0 / 3.0));
  CHECK(f.cov(1, 0) == f.cov(0, 1));

  const GaussianFit g = fit_gaussian(std::vector<std::vector<double>>{{1, 2}, {3, 2}, {5, 6}, {7, 6}});
  CHECK(g.mean == f.mean);
  CHECK(g.cov.isApprox(f.cov, 1e-15));
  CHECK_THROWS_AS(fit_gaussian(Eigen::MatrixXd(1, 3)), ContractError);
  CHECK_THROWS_AS(fit_gaussian(std::vector<std::vector<double>>{{1, 2}, {3}}), ContractError);
}

TEST_CASE("Frechet distance") {
  auto fit1d = [](double m, double v) {
    GaussianFit f;
    f.mean = Eigen::VectorXd::Constant(1, m);
    f.cov = Eigen::MatrixXd::Constant(1, 1, v);
    return f;
  };
  CHECK(frechet_distance(fit1d(0, 1), fit1d(1, 1)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(frechet_distance(fit1d(0, 1), fit1d(0, 4)) == doctest::Approx(1.0).epsilon(1e-14));

  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 6;
    const GaussianFit r = random_fit(rng, d, 3 + d * 4);
    const GaussianFit g = random_fit(rng, d, 3 + d * 4);
    CAPTURE(trial);
    CHECK(frechet_distance(r, r) == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
    const double fd = frechet_distance(r, g);
    CHECK(fd >= 0.0);
    CHECK(fd == doctest::Approx(frechet_oracle(r, g)).epsilon(1e-9));
    CHECK(fd == doctest::Approx(frechet_distance(g, r)).epsilon(1e-9));
  }

  // Rank-deficient (PSD, not PD) covariances are accepted.
  GaussianFit singular;
  singular.mean = Eigen::VectorXd::Zero(2);
  singular.cov = Eigen::MatrixXd::Zero(2, 2);
  singular.cov(0, 0) = 1.0;
  CHECK(frechet_distance(singular, singular) == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));

  GaussianFit bad = singular;
  bad.cov(1, 1) = -1.0;
  CHECK_THROWS_AS(frechet_distance(bad, singular), ContractError);
  CHECK_THROWS_AS(frechet_distance(fit1d(0, 1), singular), ContractError);
}
