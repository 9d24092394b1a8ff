#include "lsm/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "lsm/errors.hpp"
#include "lsm/seeds.hpp"

namespace lsm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

std::vector<int> assign(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centers, double& sse) {
  std::vector<int> labels(static_cast<std::size_t>(x.rows()));
  sse = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index g = 0; g < centers.rows(); ++g) {
      const double d = (x.row(i) - centers.row(g)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(g);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    sse += best_d;
  }
  return labels;
}

KMeansResult lloyd(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng, int max_iterations) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());

  // k-means++ seeding
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = x.row(pick(rng));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = (x.row(i) - centers.row(0)).squaredNorm();
  for (int g = 1; g < k; ++g) {
    const double total = d2.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (chosen = 0; chosen < n - 1; ++chosen) {
        r -= d2(chosen);
        if (r <= 0.0) break;
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(g) = x.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2(i) = std::min(d2(i), (x.row(i) - centers.row(g)).squaredNorm());
    }
  }

  KMeansResult r;
  r.labels = assign(x, centers, r.sse);
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int g = r.labels[static_cast<std::size_t>(i)];
      sums.row(g) += x.row(i);
      ++counts[static_cast<std::size_t>(g)];
    }
    for (int g = 0; g < k; ++g) {
      if (counts[static_cast<std::size_t>(g)] > 0) {
        centers.row(g) = sums.row(g) / counts[static_cast<std::size_t>(g)];
        continue;
      }
      // Empty cluster: move its center onto the point farthest from its own center.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (x.row(i) - centers.row(r.labels[static_cast<std::size_t>(i)])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centers.row(g) = x.row(far);
    }
    double sse = 0.0;
    auto labels = assign(x, centers, sse);
    const bool stable = labels == r.labels;
    r.labels = std::move(labels);
    r.sse = sse;
    if (stable) break;
  }
  r.centers = centers;
  return r;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts,
                    int max_iterations) {
  if (k < 1) throw DomainError("kmeans: k must be >= 1");
  if (points.rows() < k) throw DomainError("kmeans: fewer points than clusters");
  KMeansResult best;
  best.sse = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    std::mt19937_64 rng(derive_seed(seed, "kmeans", static_cast<std::uint64_t>(r)));
    auto candidate = lloyd(points, k, rng, max_iterations);
    if (candidate.sse < best.sse) best = std::move(candidate);
  }
  return best;
}

double spherical_mixture_loglik(const Eigen::MatrixXd& points, const MixtureParams& params) {
  const Eigen::Index k = params.weights.size();
  const double d = static_cast<double>(points.cols());
  double total = 0.0;
  std::vector<double> terms(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index g = 0; g < k; ++g) {
      const double w = params.weights(g);
      const double var = params.variances(g);
      double t = -std::numeric_limits<double>::infinity();
      if (w > 0.0) {
        t = std::log(w) - 0.5 * d * (kLog2Pi + std::log(var)) -
            0.5 * (points.row(i) - params.means.row(g)).squaredNorm() / var;
      }
      terms[static_cast<std::size_t>(g)] = t;
      mx = std::max(mx, t);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    total += mx + std::log(s);
  }
  return total;
}

MixtureParams mixture_from_partition(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                                     int k) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  MixtureParams p;
  p.weights = Eigen::VectorXd::Zero(k);
  p.means = Eigen::MatrixXd::Zero(k, d);
  p.variances = Eigen::VectorXd::Zero(k);
  const Eigen::RowVectorXd centroid = points.colwise().mean();
  const double pooled =
      std::max(kMinMixtureVariance, (points.rowwise() - centroid).squaredNorm() / double(n * d));
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = labels[static_cast<std::size_t>(i)];
    p.means.row(g) += points.row(i);
    ++counts[static_cast<std::size_t>(g)];
  }
  for (int g = 0; g < k; ++g) {
    const int c = counts[static_cast<std::size_t>(g)];
    p.weights(g) = static_cast<double>(c) / static_cast<double>(n);
    if (c > 0) {
      p.means.row(g) /= c;
    } else {
      p.means.row(g) = centroid;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = labels[static_cast<std::size_t>(i)];
    p.variances(g) += (points.row(i) - p.means.row(g)).squaredNorm();
  }
  for (int g = 0; g < k; ++g) {
    const int c = counts[static_cast<std::size_t>(g)];
    p.variances(g) = c > 0 ? std::max(kMinMixtureVariance, p.variances(g) / double(c * d)) : pooled;
  }
  return p;
}

namespace {

SphericalMixtureFit run_em(const Eigen::MatrixXd& x, MixtureParams p) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k = p.weights.size();
  const double d = static_cast<double>(x.cols());
  Eigen::MatrixXd resp(n, k);
  double prev = -std::numeric_limits<double>::infinity();
  SphericalMixtureFit fit;
  int it = 0;
  for (; it < 1000; ++it) {
    // E-step
    double llk = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index g = 0; g < k; ++g) {
        double t = -std::numeric_limits<double>::infinity();
        if (p.weights(g) > 0.0) {
          t = std::log(p.weights(g)) - 0.5 * d * (kLog2Pi + std::log(p.variances(g))) -
              0.5 * (x.row(i) - p.means.row(g)).squaredNorm() / p.variances(g);
        }
        resp(i, g) = t;
        mx = std::max(mx, t);
      }
      double s = 0.0;
      for (Eigen::Index g = 0; g < k; ++g) {
        resp(i, g) = std::exp(resp(i, g) - mx);
        s += resp(i, g);
      }
      resp.row(i) /= s;
      llk += mx + std::log(s);
    }
    const bool done = std::abs(llk - prev) <= 1e-10 * std::max(1.0, std::abs(llk));
    prev = llk;
    if (done) break;
    // M-step
    for (Eigen::Index g = 0; g < k; ++g) {
      const double ng = resp.col(g).sum();
      if (ng < 1e-10) {
        p.weights(g) = 0.0;
        continue;
      }
      p.weights(g) = ng / static_cast<double>(n);
      p.means.row(g) = (resp.col(g).transpose() * x) / ng;
      double ss = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) ss += resp(i, g) * (x.row(i) - p.means.row(g)).squaredNorm();
      p.variances(g) = std::max(kMinMixtureVariance, ss / (d * ng));
    }
    p.weights /= p.weights.sum();
  }
  fit.params = std::move(p);
  fit.log_likelihood = spherical_mixture_loglik(x, fit.params);
  fit.iterations = it;
  return fit;
}

}  // namespace

SphericalMixtureFit fit_spherical_mixture(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                                          const std::vector<std::vector<int>>& extra_starts) {
  if (k < 1) throw DomainError("mixture: k must be >= 1");
  if (points.rows() < 1) throw DomainError("mixture: no points");
  if (k == 1) {
    SphericalMixtureFit fit;
    fit.params = mixture_from_partition(points, std::vector<int>(static_cast<std::size_t>(points.rows()), 0), 1);
    fit.log_likelihood = spherical_mixture_loglik(points, fit.params);
    return fit;
  }
  if (points.rows() < k) throw DomainError("mixture: fewer points than components");

  std::vector<std::vector<int>> starts = extra_starts;
  for (int r = 0; r < 5; ++r) {
    starts.push_back(kmeans(points, k, derive_seed(seed, "mixture-start", static_cast<std::uint64_t>(r)), 1).labels);
  }
  SphericalMixtureFit best;
  best.log_likelihood = -std::numeric_limits<double>::infinity();
  for (const auto& labels : starts) {
    if (labels.size() != static_cast<std::size_t>(points.rows())) continue;
    auto fit = run_em(points, mixture_from_partition(points, labels, k));
    if (fit.log_likelihood > best.log_likelihood) best = std::move(fit);
  }
  return best;
}

int spherical_mixture_parameter_count(int k, int d) { return (k - 1) + k * d + k; }

}  // namespace lsm
