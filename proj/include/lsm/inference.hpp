#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lsm/graph.hpp"
#include "lsm/model.hpp"

namespace lsm {

struct McmcConfig {
  int iterations = 20000;
  int burn_in = 5000;
  int thinning = 10;
  int chains = 1;
  double position_proposal_sd = 0.5;
  double beta0_proposal_sd = 0.2;
  double sender_proposal_sd = 0.5;
  double receiver_proposal_sd = 0.5;
  int adapt_window = 50;
  std::uint64_t seed = 1;

  std::vector<std::string> problems() const;
  void validate() const;  // throws ValidationError

  // Retained draws per chain.
  int draws_per_chain() const { return iterations > burn_in ? (iterations - burn_in) / thinning : 0; }
};

nlohmann::json to_json(const McmcConfig& m);
McmcConfig mcmc_config_from_json(const nlohmann::json& j, std::vector<std::string>& problems);

// Metropolis-Hastings blocks, in the order used by the sampler.
enum class Block { Position = 0, Beta0 = 1, Sender = 2, Receiver = 3 };
inline constexpr std::array<const char*, 4> kBlockNames = {"position", "beta0", "sender",
                                                           "receiver"};
// Robbins-Monro targets: 0.234 for the d-vector position moves, 0.44 for scalars.
inline constexpr std::array<double, 4> kTargetAcceptance = {0.234, 0.44, 0.44, 0.44};

struct BlockCounts {
  std::array<std::uint64_t, 4> proposed{};
  std::array<std::uint64_t, 4> accepted{};

  double rate(Block b) const;
};

struct Draw {
  ParameterState state;
  double log_likelihood = 0.0;
  double log_posterior = 0.0;
};

struct ChainResult {
  std::vector<Draw> draws;
  BlockCounts post_burn_in;          // acceptance after adaptation was frozen
  std::array<double, 4> final_scales{};  // proposal sds in Block order
};

// Classical (Torgerson) scaling: top-d eigenvectors of -J D^2 J / 2 scaled by
// the square roots of their (clamped nonnegative) eigenvalues. Each axis is
// oriented so its largest-magnitude coordinate is positive.
Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& distances, int d);

// Starting state: MDS of the geodesic matrix, k-means memberships (best of 10
// seeded restarts), zero effects, beta0 matching the observed density at the
// mean latent distance, mixture from the k-means partition.
ParameterState initialize(const DirectedGraph& g, const ModelConfig& c, std::uint64_t seed);

// Single-chain sampler state. Exposes the incremental log-posterior changes it
// uses for each Metropolis-Hastings block so they can be checked against full
// evaluations.
class ChainSampler {
 public:
  ChainSampler(const DirectedGraph& g, const ModelConfig& c, ParameterState init);

  const ParameterState& state() const { return s_; }

  double delta_position(NodeId i, const Eigen::RowVectorXd& z) const;
  double delta_sender(NodeId i, double value) const;
  double delta_receiver(NodeId j, double value) const;
  double delta_beta0(double value) const;

  void set_position(NodeId i, const Eigen::RowVectorXd& z);

  // One full sweep: MH for positions, sender, receiver and beta0; a Gibbs shift along each (beta0, effects) likelihood
  // ridge; then Gibbs updates for memberships, weights, component means and
  // variances and effect variances.
  void sweep(std::mt19937_64& rng, const std::array<double, 4>& scales, BlockCounts& counts);

  double log_likelihood() const;
  double log_posterior() const;

 private:
  double position_loglik_delta(NodeId i, const Eigen::RowVectorXd& z) const;
  double dyad_delta_row(NodeId i, double shift) const;
  double dyad_delta_col(NodeId j, double shift) const;
  void gibbs_effect_shift(std::mt19937_64& rng, bool sender);
  void gibbs_mixture(std::mt19937_64& rng);

  const DirectedGraph& graph_;
  ModelConfig config_;
  ParameterState s_;
  std::size_t n_;
  std::vector<unsigned char> y_;
  Eigen::MatrixXd dist_;  // cached |z_i - z_j|
};

// Runs `m.iterations` sweeps from `init` seeded with `m.seed`. Proposal scales
// are adapted during burn-in only. Throws InitializationError when the
// starting log posterior is not finite.
ChainResult run_chain(const DirectedGraph& g, const ModelConfig& c, const McmcConfig& m,
                      const ParameterState& init);

struct Alignment {
  std::vector<ParameterState> states;
  std::vector<bool> skipped;  // rank-0 draw (or reference): left unaligned
};

// Orthogonal Procrustes with translation: each draw's positions (and component
// means) are mapped by the rotation/reflection plus shift that minimises the
// Frobenius distance to `reference`.
Alignment align_draws(const std::vector<ParameterState>& draws, const Eigen::MatrixXd& reference);

// Permutation perm (old index -> new index) maximising agreement between
// `labels` and `reference`; exhaustive over K! orders, first maximum in
// lexicographic order wins. Requires K <= 10.
std::vector<int> best_permutation(const std::vector<int>& labels, const std::vector<int>& reference,
                                  int k);
ParameterState permute_components(const ParameterState& s, const std::vector<int>& perm);
// Per draw, the permutation with maximal agreement with `reference`. Among tied
// permutations the lexicographically smallest relabelled state wins, so the
// result does not depend on how the draw's components were numbered.
std::vector<ParameterState> relabel_components(const std::vector<ParameterState>& draws,
                                               const std::vector<int>& reference);

// Relabels a partition so components are numbered by first appearance.
std::vector<int> canonical_partition(const std::vector<int>& labels, int k);

struct BicResult {
  double logit_loglik = 0.0;
  int logit_parameters = 0;
  double logit_term = 0.0;
  double mixture_loglik = 0.0;
  int mixture_parameters = 0;
  double mixture_term = 0.0;
  double total = 0.0;  // smaller is better
};

struct PosteriorSummary {
  std::vector<std::string> labels;
  int clusters = 0;
  int dimensions = 0;
  Eigen::MatrixXd point_positions;   // n x d
  Eigen::MatrixXd membership_probs;  // n x K
  double beta0_mean = 0.0;
  std::array<double, 2> beta0_interval{};  // central 95%
  Eigen::VectorXd sender_mean;
  Eigen::VectorXd receiver_mean;
  Eigen::VectorXd weights_mean;
  Eigen::MatrixXd component_means;  // K x d
  std::size_t draw_count = 0;
  std::array<double, 4> acceptance{};
  std::optional<BicResult> bic;

  std::vector<int> map_memberships() const;  // 0-based
};

// Throws DomainError for an empty draw set.
PosteriorSummary summarize(const std::vector<ParameterState>& aligned);

nlohmann::json to_json(const PosteriorSummary& s);
PosteriorSummary summary_from_json(const nlohmann::json& j);

// Two-stage approximated BIC, smaller is better:
//   -2 * max_beta0 loglik(Y | point positions, mean effects) + 1 * log(n(n-1))
//   -2 * max loglik(point positions | K-component spherical mixture) + p_K * log(n)
BicResult bic_for(const DirectedGraph& g, const PosteriorSummary& s, std::uint64_t seed);

struct FitResult {
  ParameterState initial;
  std::vector<ChainResult> chains;
  std::vector<ParameterState> processed;  // aligned and relabelled, chain-major order
  std::size_t alignment_skipped = 0;
  PosteriorSummary summary;
};

// initialize -> run chains (concurrently, up to `threads`) -> align to the
// highest-posterior draw -> relabel to its canonical partition -> summarize
// -> BIC. Results do not depend on `threads`.
FitResult fit(const DirectedGraph& g, const ModelConfig& c, const McmcConfig& m, int threads = 1);

struct SelectionRow {
  int clusters = 0;
  BicResult bic;
};

struct Selection {
  int best_k = 0;
  std::vector<SelectionRow> table;
  std::vector<PosteriorSummary> summaries;
};

// Fits every K with the same master seed; argmin BIC, ties to the smaller K.
Selection select_k(const DirectedGraph& g, const ModelConfig& base, const std::vector<int>& k_range,
                   const McmcConfig& m, int threads = 1);

}  // namespace lsm
