#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lsm/elites.hpp"
#include "lsm/graph.hpp"
#include "lsm/inference.hpp"
#include "lsm/model.hpp"

namespace lsm {

// Node label -> component. Components are 0-based in memory, 1-based on disk.
struct Labeling {
  std::map<std::string, int> components;
  int clusters = 0;
};

// MAP component per node.
Labeling labeling_from(const PosteriorSummary& s);

// CSV `label,component` with 1-based components. `clusters` = 0 infers K from
// the largest index present.
Labeling read_labeling_csv(const std::string& path, int clusters = 0);
Labeling parse_labeling_csv(std::string_view text, int clusters = 0);
void write_labeling_csv(const Labeling& l, const std::string& path);

struct ConfusionMatrix {
  // fractions(r, c): share of common nodes with b-component r (after the
  // permutation) and a-component c.
  Eigen::MatrixXd fractions;
  std::vector<std::vector<std::size_t>> counts;
  std::size_t common_node_count = 0;
  // permutation[g] = index b's component g was mapped to.
  std::vector<int> permutation;
};

// Restricted to nodes present in both labelings. b's components are permuted
// (exhaustively) to maximise the diagonal. Throws DomainError when K differs or
// no node is shared.
ConfusionMatrix confusion_matrix(const Labeling& a, const Labeling& b);

void write_confusion_csv(const ConfusionMatrix& m, const std::string& path);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

struct NetworkStats {
  std::size_t elite_users = 0;
  std::size_t qualifying_tweets = 0;
  std::size_t nodes_before_isolates = 0;
  std::size_t isolates_removed = 0;
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double density = 0.0;  // 0 when fewer than two nodes remain
};

nlohmann::json to_json(const NetworkStats& s);

struct ElitesNetwork {
  EliteSelection selection;
  NetworkStats stats;
  DirectedGraph graph;  // induced on the elites, isolates removed
  std::vector<std::string> isolates;
};

// extract -> induce on the follow graph -> drop isolates.
ElitesNetwork elite_network(const std::vector<TweetRecord>& records, const DirectedGraph& follows,
                            const EliteCriterion& criterion);

struct SweepOptions {
  ModelConfig model;
  McmcConfig mcmc;
  std::string baseline = "main";
  bool fit = true;
  int threads = 1;
  // Labelings to use instead of fitting, keyed by criterion id.
  std::map<std::string, Labeling> provided;
};

struct SweepResult {
  std::string id;
  EliteCriterion criterion;
  ElitesNetwork network;
  std::optional<PosteriorSummary> summary;
  std::optional<Labeling> labeling;
  std::optional<ConfusionMatrix> confusion;  // against the baseline; absent for the baseline itself
  std::size_t overlap_with_baseline = 0;     // |elites ∩ baseline elites|
};

// Runs every criterion (concurrently, up to `threads`) and compares each
// labeling with the baseline's. Results keep the order of `criteria`. Stage
// errors are rethrown as std::runtime_error prefixed with the criterion id.
std::vector<SweepResult> robustness_sweep(
    const std::vector<TweetRecord>& records, const DirectedGraph& follows,
    const std::vector<std::pair<std::string, EliteCriterion>>& criteria, const SweepOptions& options);

}  // namespace lsm
