#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lsm/mixture.hpp"

using namespace lsm;

namespace {

// Mixture log-likelihood written out density by density.
double brute_loglik(const Eigen::MatrixXd& x, const MixtureParams& p) {
  const double d = static_cast<double>(x.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mix = 0.0;
    for (Eigen::Index g = 0; g < p.weights.size(); ++g) {
      const double v = p.variances(g);
      const double sq = (x.row(i) - p.means.row(g)).squaredNorm();
      mix += p.weights(g) * std::pow(2.0 * std::numbers::pi * v, -d / 2.0) * std::exp(-sq / (2.0 * v));
    }
    total += std::log(mix);
  }
  return total;
}

Eigen::MatrixXd two_blobs(std::mt19937_64& rng, int per, double sep) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x(2 * per, 2);
  for (int i = 0; i < 2 * per; ++i) {
    x(i, 0) = z(rng) + (i < per ? -sep / 2 : sep / 2);
    x(i, 1) = z(rng);
  }
  return x;
}

}  // namespace

TEST_CASE("kmeans separates two blobs and is seed-deterministic") {
  std::mt19937_64 rng(1);
  auto x = two_blobs(rng, 20, 12.0);
  auto a = kmeans(x, 2, 99);
  auto b = kmeans(x, 2, 99);
  CHECK(a.labels == b.labels);
  for (int i = 1; i < 20; ++i) CHECK(a.labels[i] == a.labels[0]);
  for (int i = 21; i < 40; ++i) CHECK(a.labels[i] == a.labels[20]);
  CHECK(a.labels[0] != a.labels[20]);

  double sse = 0.0;
  for (int i = 0; i < 40; ++i) sse += (x.row(i) - a.centers.row(a.labels[i])).squaredNorm();
  CHECK(a.sse == doctest::Approx(sse).epsilon(1e-12));
}

TEST_CASE("mixture log-likelihood matches direct densities") {
  std::mt19937_64 rng(2);
  auto x = two_blobs(rng, 10, 3.0);
  MixtureParams p;
  p.weights = Eigen::Vector3d(0.2, 0.5, 0.3);
  p.means = Eigen::MatrixXd::Random(3, 2);
  p.variances = Eigen::Vector3d(0.5, 1.5, 3.0);
  CHECK(spherical_mixture_loglik(x, p) == doctest::Approx(brute_loglik(x, p)).epsilon(1e-12));
}

TEST_CASE("K=1 fit is the closed-form Gaussian MLE") {
  std::mt19937_64 rng(3);
  auto x = two_blobs(rng, 15, 2.0);
  const double n = 30.0, d = 2.0;
  Eigen::RowVectorXd mu = x.colwise().mean();
  const double var = (x.rowwise() - mu).squaredNorm() / (n * d);
  const double closed = -n * d / 2.0 * (std::log(2.0 * std::numbers::pi * var) + 1.0);
  auto fit = fit_spherical_mixture(x, 1, 1);
  CHECK(fit.log_likelihood == doctest::Approx(closed).epsilon(1e-12));
  CHECK(fit.params.variances(0) == doctest::Approx(var).epsilon(1e-12));

  // every point on one center: variance sits at the floor
  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(7, 2, 3.0);
  auto degenerate = fit_spherical_mixture(same, 1, 1);
  const double floor_ll = -7.0 * 2.0 / 2.0 * std::log(2.0 * std::numbers::pi * kMinMixtureVariance);
  CHECK(degenerate.log_likelihood == doctest::Approx(floor_ll).epsilon(1e-12));
}

TEST_CASE("EM improves on the partition it starts from") {
  std::mt19937_64 rng(4);
  auto x = two_blobs(rng, 25, 5.0);
  auto km = kmeans(x, 2, 7);
  auto start = mixture_from_partition(x, km.labels, 2);
  auto fit = fit_spherical_mixture(x, 2, 7);
  CHECK(fit.log_likelihood >= spherical_mixture_loglik(x, start) - 1e-9);
  CHECK(fit.params.weights.sum() == doctest::Approx(1.0));
  CHECK(fit_spherical_mixture(x, 2, 7).log_likelihood == fit.log_likelihood);
}

TEST_CASE("partition with an empty component") {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  auto p = mixture_from_partition(x, {0, 0, 0, 0}, 2);
  CHECK(p.weights(1) == 0.0);
  CHECK(p.means(1, 0) == doctest::Approx(1.5));
}

TEST_CASE("parameter count") {
  CHECK(spherical_mixture_parameter_count(1, 2) == 3);
  CHECK(spherical_mixture_parameter_count(2, 2) == 7);
  CHECK(spherical_mixture_parameter_count(3, 1) == 8);
  for (int k = 1; k < 8; ++k) CHECK(spherical_mixture_parameter_count(k + 1, 2) > spherical_mixture_parameter_count(k, 2));
}
