#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "lsm/model.hpp"

namespace lsm {

struct KMeansResult {
  std::vector<int> labels;  // 0-based
  Eigen::MatrixXd centers;  // k x d
  double sse = 0.0;         // within-cluster sum of squares
};

// Lloyd's algorithm from k-means++ seeds; the best of `restarts` runs by SSE.
// Each restart draws from its own stream derived from `seed`, so the result is a
// pure function of the inputs.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts = 10,
                    int max_iterations = 200);

// Lower bound applied to fitted component variances so a component collapsing
// onto coincident points keeps a finite likelihood.
inline constexpr double kMinMixtureVariance = 1e-6;

struct SphericalMixtureFit {
  MixtureParams params;
  double log_likelihood = 0.0;
  int iterations = 0;
};

double spherical_mixture_loglik(const Eigen::MatrixXd& points, const MixtureParams& params);

// Component parameters from a hard partition (empty components get zero weight,
// the global centroid and the pooled variance).
MixtureParams mixture_from_partition(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                                     int k);

// Maximum-likelihood spherical Gaussian mixture by EM. K = 1 is solved in
// closed form; otherwise EM starts from k-means partitions (and from any extra
// partitions supplied) and the best local optimum is kept.
SphericalMixtureFit fit_spherical_mixture(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                                          const std::vector<std::vector<int>>& extra_starts = {});

// Free parameters of a K-component spherical mixture in d dimensions:
// (K - 1) weights + K*d means + K variances.
int spherical_mixture_parameter_count(int k, int d);

}  // namespace lsm
