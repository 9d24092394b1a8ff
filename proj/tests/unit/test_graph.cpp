#include <doctest.h>

#include <algorithm>
#include <limits>
#include <queue>
#include <random>

#include "lsm/errors.hpp"
#include "lsm/graph.hpp"
#include "oracles.hpp"

using namespace lsm;

namespace {

DirectedGraph from_pairs(const std::vector<std::pair<std::string, std::string>>& rows) {
  return build_from_edge_list(rows).graph;
}

// Plain BFS from every source on the symmetrised adjacency; -1 = unreachable.
std::vector<std::vector<int>> bfs_all(const DirectedGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<std::vector<int>> out(n, std::vector<int>(n, -1));
  for (std::size_t s = 0; s < n; ++s) {
    std::queue<std::size_t> q;
    q.push(s);
    out[s][s] = 0;
    while (!q.empty()) {
      auto u = q.front();
      q.pop();
      for (std::size_t v = 0; v < n; ++v) {
        if ((g.has_edge(u, v) || g.has_edge(v, u)) && out[s][v] < 0) {
          out[s][v] = out[s][u] + 1;
          q.push(v);
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("build dedups and keeps reciprocal edges") {
  auto b = build_from_edge_list(std::vector<std::pair<std::string, std::string>>{{"a", "b"}, {"b", "a"}, {"a", "b"}});
  CHECK(b.graph.node_count() == 2);
  CHECK(b.graph.edge_count() == 2);
  CHECK(b.duplicate_edges == 1);
  CHECK(b.graph.labels() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("self-loop rows are dropped and counted") {
  auto b = build_from_edge_list(std::vector<std::pair<std::string, std::string>>{{"a", "a"}});
  CHECK(b.graph.node_count() == 1);
  CHECK(b.graph.edge_count() == 0);
  CHECK(b.dropped_self_loops == 1);
}

TEST_CASE("wrong arity carries the row number") {
  std::vector<std::vector<std::string>> rows = {{"a", "b"}, {"c"}};
  try {
    build_from_edge_list(rows);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);
  }
  CHECK_THROWS_AS(build_from_edge_list(std::vector<std::vector<std::string>>{{"a", ""}}), ParseError);
  CHECK_THROWS_AS(parse_edge_csv("follower,followed\na,b,c\n"), ParseError);
}

TEST_CASE("edge csv parse") {
  auto b = parse_edge_csv("follower,followed\nx,y\ny,z\nx,y\n");
  CHECK(b.graph.node_count() == 3);
  CHECK(b.graph.edge_count() == 2);
  CHECK(b.graph.has_edge(0, 1));
  CHECK_FALSE(b.graph.has_edge(1, 0));
  CHECK_THROWS_AS(parse_edge_csv("source,target\nx,y\n"), ParseError);
}

TEST_CASE("labels are case sensitive") {
  auto g = from_pairs({{"Alice", "alice"}});
  CHECK(g.node_count() == 2);
}

TEST_CASE("remove_isolates") {
  SUBCASE("no isolates is a fixed point") {
    auto g = from_pairs({{"a", "b"}, {"b", "c"}});
    auto r = remove_isolates(g);
    CHECK(r.removed.empty());
    CHECK(r.graph.labels() == g.labels());
    CHECK(r.graph.edge_count() == g.edge_count());
  }
  SUBCASE("removes only the isolate") {
    GraphBuilder b;
    b.add_node("a");
    b.add_node("b");
    b.add_node("c");
    b.add_edge("a", "b");
    auto g = std::move(b).build();
    auto r = remove_isolates(g);
    CHECK(r.removed == std::vector<std::string>{"c"});
    CHECK(r.graph.node_count() == 2);
    CHECK(r.graph.edge_count() == 1);
  }
}

TEST_CASE("density") {
  CHECK(density(from_pairs({{"a", "b"}, {"b", "a"}, {"a", "c"}, {"c", "a"}, {"b", "c"}, {"c", "b"}})) == 1.0);
  GraphBuilder b;
  b.add_node("a");
  b.add_node("b");
  CHECK(density(std::move(b).build()) == 0.0);
  GraphBuilder one;
  one.add_node("a");
  CHECK_THROWS_AS(density(std::move(one).build()), DomainError);
  CHECK(12182.0 / (363.0 * 362.0) == doctest::Approx(0.0927).epsilon(1e-3));
}

TEST_CASE("total_degree") {
  auto g = from_pairs({{"a", "b"}, {"b", "a"}});
  CHECK(total_degree(g, "a") == 2);
  CHECK_THROWS_AS(total_degree(g, "zz"), LookupError);

  auto star = from_pairs({{"s1", "c"}, {"s2", "c"}, {"s3", "c"}, {"s4", "c"}, {"s5", "c"}});
  CHECK(total_degree(star, "c") == 5);

  GraphBuilder b;
  b.add_node("lonely");
  CHECK(total_degree(std::move(b).build(), "lonely") == 0);
}

TEST_CASE("geodesics on small graphs") {
  auto path = from_pairs({{"a", "b"}, {"c", "b"}});
  auto d = geodesic_matrix(path);
  CHECK(d(path.index_of("a"), path.index_of("c")) == 2.0);

  auto two = from_pairs({{"a", "b"}, {"c", "d"}});
  auto d2 = geodesic_matrix(two);
  CHECK(d2(0, 1) == 1.0);
  CHECK(d2(0, 2) == 2.0);
  CHECK(d2(1, 3) == 2.0);

  auto cycle = from_pairs({{"1", "2"}, {"2", "3"}, {"3", "4"}, {"4", "5"}, {"5", "1"}});
  auto d5 = geodesic_matrix(cycle);
  auto bfs = bfs_all(cycle);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      CHECK(d5(i, j) == bfs[i][j]);
      CHECK(d5(i, j) <= 2.0);
    }
  }
}

TEST_CASE("graph invariants on random graphs") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 2 + rep % 40;
    const double p = rep % 3 == 0 ? 0.02 : 0.1;
    auto g = oracle::random_graph(n, p, rng);

    // density * n(n-1) is the edge count
    const double nn = static_cast<double>(n * (n - 1));
    CHECK(density(g) * nn == doctest::Approx(static_cast<double>(g.edge_count())).epsilon(1e-12));

    std::size_t deg = 0;
    for (std::size_t i = 0; i < n; ++i) deg += total_degree(g, i);
    CHECK(deg == 2 * g.edge_count());

    auto once = remove_isolates(g);
    auto twice = remove_isolates(once.graph);
    CHECK(twice.removed.empty());
    CHECK(twice.graph.labels() == once.graph.labels());
    CHECK(once.graph.edge_count() == g.edge_count());
    for (std::size_t i = 0; i < once.graph.node_count(); ++i) CHECK(total_degree(once.graph, i) >= 1);

    auto d = geodesic_matrix(g);
    auto bfs = bfs_all(g);
    int max_finite = 0;
    for (auto& row : bfs) for (int v : row) max_finite = std::max(max_finite, v);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(d(i, i) == 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(d(i, j) == d(j, i));
        const double expect = bfs[i][j] < 0 ? (max_finite == 0 ? 1.0 : max_finite + 1.0) : bfs[i][j];
        CHECK(d(i, j) == expect);
        for (std::size_t k = 0; k < n; ++k) {
          if (bfs[i][j] >= 0 && bfs[j][k] >= 0) CHECK(d(i, k) <= d(i, j) + d(j, k));
        }
      }
    }
  }
}

TEST_CASE("induced subgraph keeps requested order") {
  auto g = from_pairs({{"a", "b"}, {"b", "c"}, {"c", "a"}});
  auto h = g.induced({"c", "a", "zz"});
  CHECK(h.labels() == std::vector<std::string>{"c", "a", "zz"});
  CHECK(h.edge_count() == 1);
  CHECK(h.has_edge(0, 1));
}
