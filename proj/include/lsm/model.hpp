#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lsm/graph.hpp"

namespace lsm {

// Hyperparameters of the latent cluster random effects model.
//
//   logit P(i -> j) = beta0 - |z_i - z_j| + sender_i + receiver_j
//   z_i | K_i = g       ~ N_d(mu_g, sigma2_g I)
//   K_i                 ~ Categorical(lambda),  lambda ~ Dirichlet(alpha, ..., alpha)
//   mu_g | sigma2_g     ~ N_d(0, mean_prior_scale * sigma2_g I)
//   sigma2_g            ~ InvGamma(cluster_var_shape, cluster_var_scale)
//   sender_i            ~ N(0, sigma2_sender),   sigma2_sender   ~ InvGamma(...)
//   receiver_j          ~ N(0, sigma2_receiver), sigma2_receiver ~ InvGamma(...)
//   beta0               ~ N(beta0_prior_mean, beta0_prior_var)
//
// Default values are weakly informative implementation choices; every one of
// them can be overridden from the fit config.
struct ModelConfig {
  int dimensions = 2;
  int clusters = 2;

  double beta0_prior_mean = 0.0;
  double beta0_prior_var = 9.0;

  double sender_var_shape = 1.5;
  double sender_var_scale = 1.5;
  double receiver_var_shape = 1.5;
  double receiver_var_scale = 1.5;

  double cluster_var_shape = 2.0;
  double cluster_var_scale = 1.0;
  double mean_prior_scale = 100.0;
  double dirichlet_concentration = 3.0;

  // Every violated constraint, empty when valid.
  std::vector<std::string> problems() const;
  void validate() const;  // throws ValidationError
};

// Spherical Gaussian mixture over latent positions.
struct MixtureParams {
  Eigen::VectorXd weights;    // K, on the simplex
  Eigen::MatrixXd means;      // K x d
  Eigen::VectorXd variances;  // K
};

// One full model state. Component indices in `memberships` are 0-based in
// memory; serialized forms use 1-based indices.
struct ParameterState {
  double beta0 = 0.0;
  Eigen::MatrixXd positions;  // n x d
  Eigen::VectorXd sender;     // n
  Eigen::VectorXd receiver;   // n
  double sender_var = 1.0;
  double receiver_var = 1.0;
  MixtureParams mixture;
  std::vector<int> memberships;

  std::size_t node_count() const { return static_cast<std::size_t>(positions.rows()); }
  int dimensions() const { return static_cast<int>(positions.cols()); }
  int clusters() const { return static_cast<int>(mixture.weights.size()); }

  // Shapes agree, weights sum to 1 within 1e-12, variances positive,
  // memberships within range. Throws ShapeError / DomainError.
  void check() const;
};

// Zero effects, origin positions, one equally weighted unit-variance component
// per cluster placed at the origin.
ParameterState make_state(std::size_t n, int d, int k);

double softplus(double x);  // log(1 + exp(x)), stable for any finite x
double logistic(double x);

double edge_logit(const ParameterState& s, NodeId i, NodeId j);

// Bernoulli log-likelihood over all ordered dyads.
double log_likelihood(const ParameterState& s, const DirectedGraph& g);
// Same, with a row-major n*n 0/1 adjacency matrix.
double log_likelihood(const ParameterState& s, std::span<const unsigned char> adjacency);

// Log prior density. Returns -infinity when an occupied component has zero
// weight. Throws DomainError for a nonpositive variance.
double log_prior(const ParameterState& s, const ModelConfig& c);

double log_posterior(const ParameterState& s, const DirectedGraph& g, const ModelConfig& c);

// Independent Bernoulli(logistic(eta_ij)) draws for every ordered dyad, in
// row-major order. Nodes are labelled by `labels` or "v1".."vn".
DirectedGraph sample_network(const ParameterState& s, std::uint64_t seed,
                             const std::vector<std::string>& labels = {});

inline constexpr int kStateSchemaVersion = 1;

nlohmann::json to_json(const ParameterState& s);
ParameterState state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelConfig& c);
// Missing keys keep defaults; unknown keys and type errors are collected into
// `problems` rather than thrown.
ModelConfig model_config_from_json(const nlohmann::json& j, std::vector<std::string>& problems);

}  // namespace lsm
