#include "lsm/graph.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <queue>
#include <unordered_set>

#include "lsm/csv.hpp"
#include "lsm/errors.hpp"

namespace lsm {

std::optional<NodeId> DirectedGraph::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeId DirectedGraph::index_of(std::string_view label) const {
  if (auto id = find(label)) return *id;
  throw LookupError("unknown node '" + std::string(label) + "'");
}

bool DirectedGraph::has_edge(NodeId from, NodeId to) const {
  const auto& succ = out_.at(from);
  return std::binary_search(succ.begin(), succ.end(), to);
}

std::vector<unsigned char> DirectedGraph::adjacency() const {
  const std::size_t n = node_count();
  std::vector<unsigned char> a(n * n, 0);
  for (const auto& [i, j] : edges_) a[i * n + j] = 1;
  return a;
}

DirectedGraph DirectedGraph::induced(const std::vector<std::string>& labels) const {
  GraphBuilder b;
  for (const auto& l : labels) b.add_node(l);
  const std::unordered_set<std::string> keep(labels.begin(), labels.end());
  for (const auto& l : labels) {
    auto src = find(l);
    if (!src) continue;
    for (NodeId t : out_[*src]) {
      if (keep.count(labels_[t])) b.add_edge(l, labels_[t]);
    }
  }
  return std::move(b).build();
}

NodeId GraphBuilder::add_node(std::string_view label) {
  std::string key(label);
  auto it = g_.index_.find(key);
  if (it != g_.index_.end()) return it->second;
  const NodeId id = g_.labels_.size();
  g_.index_.emplace(key, id);
  g_.labels_.push_back(std::move(key));
  return id;
}

bool GraphBuilder::add_edge(std::string_view from, std::string_view to) {
  const NodeId i = add_node(from);
  const NodeId j = add_node(to);
  if (i == j) {
    ++self_loops_;
    return false;
  }
  pending_.emplace_back(i, j);
  return true;
}

DirectedGraph GraphBuilder::build() && {
  std::sort(pending_.begin(), pending_.end());
  const auto last = std::unique(pending_.begin(), pending_.end());
  duplicates_ += static_cast<std::size_t>(pending_.end() - last);
  pending_.erase(last, pending_.end());

  const std::size_t n = g_.labels_.size();
  g_.edges_ = std::move(pending_);
  g_.out_.assign(n, {});
  g_.in_.assign(n, {});
  for (const auto& [i, j] : g_.edges_) {
    g_.out_[i].push_back(j);
    g_.in_[j].push_back(i);
  }
  for (auto& v : g_.in_) std::sort(v.begin(), v.end());
  return std::move(g_);
}

EdgeListBuild build_from_edge_list(const std::vector<std::vector<std::string>>& rows) {
  GraphBuilder b;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 2) {
      throw ParseError("expected 2 fields (follower, followed), got " + std::to_string(row.size()),
                       r + 1);
    }
    if (row[0].empty() || row[1].empty()) throw ParseError("empty node label", r + 1);
    b.add_edge(row[0], row[1]);
  }
  EdgeListBuild out;
  out.graph = std::move(b).build();
  out.dropped_self_loops = b.dropped_self_loops();
  out.duplicate_edges = b.duplicate_edges();
  return out;
}

EdgeListBuild build_from_edge_list(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::vector<std::vector<std::string>> v;
  v.reserve(rows.size());
  for (const auto& [a, b] : rows) v.push_back({a, b});
  return build_from_edge_list(v);
}

EdgeListBuild parse_edge_csv(std::string_view text) {
  const auto table = csv::parse(text);
  if (table.header != std::vector<std::string>{"follower", "followed"}) {
    throw ParseError("edge list header must be 'follower,followed'", 1);
  }
  GraphBuilder b;
  for (const auto& row : table.rows) {
    if (row.fields.size() != 2) {
      throw ParseError("expected 2 fields (follower, followed), got " +
                           std::to_string(row.fields.size()),
                       row.line);
    }
    if (row.fields[0].empty() || row.fields[1].empty()) {
      throw ParseError("empty node label", row.line);
    }
    b.add_edge(row.fields[0], row.fields[1]);
  }
  EdgeListBuild out;
  out.graph = std::move(b).build();
  out.dropped_self_loops = b.dropped_self_loops();
  out.duplicate_edges = b.duplicate_edges();
  return out;
}

EdgeListBuild read_edge_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_edge_csv(text);
}

void write_edge_csv(const DirectedGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  csv::write_row(out, {"follower", "followed"});
  for (const auto& [i, j] : g.edges()) csv::write_row(out, {g.label(i), g.label(j)});
}

IsolateRemoval remove_isolates(const DirectedGraph& g) {
  IsolateRemoval out;
  std::vector<std::string> kept;
  for (NodeId i = 0; i < g.node_count(); ++i) {
    if (g.in_degree(i) + g.out_degree(i) == 0) {
      out.removed.push_back(g.label(i));
    } else {
      kept.push_back(g.label(i));
    }
  }
  out.graph = out.removed.empty() ? g : g.induced(kept);
  return out;
}

double density(const DirectedGraph& g) {
  const std::size_t n = g.node_count();
  if (n < 2) throw DomainError("density needs at least 2 nodes");
  return static_cast<double>(g.edge_count()) / (static_cast<double>(n) * static_cast<double>(n - 1));
}

std::size_t total_degree(const DirectedGraph& g, NodeId i) {
  if (i >= g.node_count()) throw LookupError("node index out of range");
  return g.in_degree(i) + g.out_degree(i);
}

std::size_t total_degree(const DirectedGraph& g, std::string_view label) {
  return total_degree(g, g.index_of(label));
}

Eigen::MatrixXd geodesic_matrix(const DirectedGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<std::vector<NodeId>> nbr(n);
  for (const auto& [i, j] : g.edges()) {
    nbr[i].push_back(j);
    nbr[j].push_back(i);
  }
  constexpr int kUnreached = -1;
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, kUnreached);
  int max_finite = 0;
  std::vector<int> dist(n);
  for (NodeId s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), kUnreached);
    dist[s] = 0;
    std::queue<NodeId> q;
    q.push(s);
    while (!q.empty()) {
      const NodeId u = q.front();
      q.pop();
      for (NodeId v : nbr[u]) {
        if (dist[v] == kUnreached) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
      }
    }
    for (NodeId t = 0; t < n; ++t) {
      d(s, t) = dist[t];
      max_finite = std::max(max_finite, dist[t]);
    }
  }
  const double fill = max_finite + 1;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d.data()[i] == kUnreached) d.data()[i] = fill;
  }
  return d;
}

}  // namespace lsm
