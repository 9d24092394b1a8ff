#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace lsm {

using NodeId = std::size_t;

// Directed follow network. Nodes keep the order in which their labels first
// appeared; edges are unique ordered pairs without self-loops. Immutable once
// built, so it can be shared read-only across worker threads.
class DirectedGraph {
 public:
  DirectedGraph() = default;

  std::size_t node_count() const { return labels_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(NodeId i) const { return labels_.at(i); }

  // Sorted by (source, target).
  const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }

  std::optional<NodeId> find(std::string_view label) const;
  NodeId index_of(std::string_view label) const;  // throws LookupError

  bool has_edge(NodeId from, NodeId to) const;
  const std::vector<NodeId>& successors(NodeId i) const { return out_.at(i); }
  const std::vector<NodeId>& predecessors(NodeId i) const { return in_.at(i); }

  std::size_t in_degree(NodeId i) const { return in_.at(i).size(); }
  std::size_t out_degree(NodeId i) const { return out_.at(i).size(); }

  // Row-major n*n 0/1 matrix, entry (i, j) = 1 iff i -> j.
  std::vector<unsigned char> adjacency() const;

  // Subgraph on the given labels (in the given order); labels absent from this
  // graph become isolated nodes.
  DirectedGraph induced(const std::vector<std::string>& labels) const;

  friend class GraphBuilder;

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<std::vector<NodeId>> out_;
  std::vector<std::vector<NodeId>> in_;
};

class GraphBuilder {
 public:
  NodeId add_node(std::string_view label);
  // Returns false for self-loops (dropped) and duplicates.
  bool add_edge(std::string_view from, std::string_view to);

  std::size_t dropped_self_loops() const { return self_loops_; }
  std::size_t duplicate_edges() const { return duplicates_; }

  DirectedGraph build() &&;

 private:
  DirectedGraph g_;
  std::vector<std::pair<NodeId, NodeId>> pending_;
  std::size_t self_loops_ = 0;
  std::size_t duplicates_ = 0;
};

struct EdgeListBuild {
  DirectedGraph graph;
  std::size_t dropped_self_loops = 0;
  std::size_t duplicate_edges = 0;
};

// Each row must hold exactly two non-empty labels (follower, followed); a row of
// any other arity raises ParseError carrying its 1-based row number.
EdgeListBuild build_from_edge_list(const std::vector<std::vector<std::string>>& rows);
EdgeListBuild build_from_edge_list(const std::vector<std::pair<std::string, std::string>>& rows);

// Reads the `follower,followed` CSV format.
EdgeListBuild read_edge_csv(const std::string& path);
EdgeListBuild parse_edge_csv(std::string_view text);
void write_edge_csv(const DirectedGraph& g, const std::string& path);

struct IsolateRemoval {
  DirectedGraph graph;
  std::vector<std::string> removed;
};

IsolateRemoval remove_isolates(const DirectedGraph& g);

double density(const DirectedGraph& g);
std::size_t total_degree(const DirectedGraph& g, std::string_view label);
std::size_t total_degree(const DirectedGraph& g, NodeId i);

// Hop distances on the symmetrised graph. Unreachable pairs are set to one more
// than the largest finite distance (1 when the graph has no edges).
Eigen::MatrixXd geodesic_matrix(const DirectedGraph& g);

}  // namespace lsm
