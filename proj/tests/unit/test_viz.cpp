#include <doctest.h>

#include <cmath>
#include <random>
#include <regex>
#include <set>

#include "lsm/errors.hpp"
#include "lsm/svg.hpp"
#include "lsm/viz.hpp"
#include "oracles.hpp"

using namespace lsm;

namespace {

DirectedGraph from_pairs(const std::vector<std::pair<std::string, std::string>>& rows) {
  return build_from_edge_list(rows).graph;
}

PosteriorSummary summary_for(const DirectedGraph& g, const Eigen::MatrixXd& probs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 2.0);
  PosteriorSummary s;
  s.labels = g.labels();
  s.clusters = static_cast<int>(probs.cols());
  s.dimensions = 2;
  s.membership_probs = probs;
  s.point_positions.resize(static_cast<Eigen::Index>(g.node_count()), 2);
  for (Eigen::Index i = 0; i < s.point_positions.size(); ++i) s.point_positions(i) = z(rng);
  s.sender_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.node_count()));
  s.receiver_mean = s.sender_mean;
  s.weights_mean = Eigen::VectorXd::Constant(s.clusters, 1.0 / s.clusters);
  s.component_means = Eigen::MatrixXd::Zero(s.clusters, 2);
  return s;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

double max_pairwise(const Eigen::MatrixXd& p, int begin, int end) {
  double best = 0.0;
  for (int i = begin; i < end; ++i) {
    for (int j = begin; j < end; ++j) best = std::max(best, (p.row(i) - p.row(j)).norm());
  }
  return best;
}

}  // namespace

TEST_CASE("layout: single node sits at the origin") {
  GraphBuilder b;
  b.add_node("only");
  auto r = force_layout(std::move(b).build(), 1);
  CHECK(r.positions.rows() == 1);
  CHECK(r.positions.norm() == 0.0);
}

TEST_CASE("layout: two connected nodes balance at the closed-form distance") {
  // repulsion C k^2 / r equals attraction r^2 / k at r = C^(1/3) k
  auto g = from_pairs({{"a", "b"}});
  auto r = force_layout(g, 3);
  CHECK(r.converged);
  const double k = std::sqrt(LayoutOptions{}.area / 2.0);
  CHECK(r.k == doctest::Approx(k));
  const double expected = std::cbrt(LayoutOptions{}.c) * k;
  const double dist = (r.positions.row(0) - r.positions.row(1)).norm();
  CHECK(std::abs(dist - expected) < 0.1 * expected);
}

TEST_CASE("layout: two cliques joined by a bridge separate") {
  std::vector<std::pair<std::string, std::string>> rows;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 10; ++i) {
      for (int j = i + 1; j < 10; ++j) rows.emplace_back(std::to_string(10 * c + i), std::to_string(10 * c + j));
    }
  }
  rows.emplace_back("0", "10");
  auto g = from_pairs(rows);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto r = force_layout(g, seed);
    const Eigen::RowVector2d c0 = r.positions.topRows(10).colwise().mean();
    const Eigen::RowVector2d c1 = r.positions.bottomRows(10).colwise().mean();
    const double diameter = std::max(max_pairwise(r.positions, 0, 10), max_pairwise(r.positions, 10, 20));
    CHECK((c0 - c1).norm() > diameter);
  }
}

TEST_CASE("layout: deterministic, centred and finite") {
  std::mt19937_64 rng(4);
  auto g = oracle::random_graph(60, 0.05, rng);
  auto a = force_layout(g, 9);
  auto b = force_layout(g, 9);
  CHECK(a.positions == b.positions);
  CHECK(a.iterations_run == b.iterations_run);
  CHECK(a.positions.allFinite());
  CHECK(a.positions.colwise().mean().norm() < 1e-9);
  auto capped = force_layout(g, 9, 1);
  CHECK(capped.positions.allFinite());
}

TEST_CASE("pie slices") {
  Eigen::RowVectorXd full(2);
  full << 1.0, 0.0;
  auto one = pie_slices(full);
  REQUIRE(one.size() == 1);
  CHECK(one[0].component == 0);
  CHECK(one[0].end_deg - one[0].start_deg == 360.0);

  Eigen::RowVectorXd half(2);
  half << 0.5, 0.5;
  auto two = pie_slices(half);
  REQUIRE(two.size() == 2);
  CHECK(two[0].start_deg == 0.0);
  CHECK(two[0].end_deg == doctest::Approx(180.0));
  CHECK(two[1].end_deg == 360.0);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    Eigen::RowVectorXd p(4);
    for (int g = 0; g < 4; ++g) p(g) = rep % 5 == 0 && g == 2 ? 0.0 : u(rng);
    p /= p.sum();
    auto slices = pie_slices(p);
    double sweep = 0.0;
    for (auto& s : slices) {
      sweep += s.end_deg - s.start_deg;
      CHECK(std::abs(s.fraction - p(s.component)) < 1e-6);
      CHECK(std::abs((s.end_deg - s.start_deg) / 360.0 - p(s.component)) < 1e-6);
    }
    CHECK(sweep == doctest::Approx(360.0).epsilon(1e-9));
  }
}

TEST_CASE("degree radii follow sqrt scaling") {
  std::vector<std::pair<std::string, std::string>> rows;
  for (int i = 0; i < 4; ++i) rows.emplace_back("small", "s" + std::to_string(i));
  for (int i = 0; i < 16; ++i) rows.emplace_back("big", "b" + std::to_string(i));
  auto g = from_pairs(rows);
  RenderConfig cfg;
  auto radii = degree_radii(g, cfg);
  const double ratio = radii[g.index_of("big")] / radii[g.index_of("small")];
  CHECK(ratio == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(radii[g.index_of("big")] == cfg.max_radius);
  CHECK(radii[g.index_of("b0")] >= cfg.min_radius);
}

TEST_CASE("latent map") {
  auto g = from_pairs({{"a", "b"}, {"b", "c"}, {"c", "a"}});
  Eigen::MatrixXd probs(3, 2);
  probs << 1.0, 0.0, 0.5, 0.5, 0.2, 0.8;
  auto s = summary_for(g, probs, 1);
  auto doc = latent_map_svg(s, g, {"b"});
  CHECK(doc == latent_map_svg(s, g, {"b"}));
  CHECK(doc.rfind("<?xml", 0) == 0);
  CHECK(doc.find(">Z1<") != std::string::npos);
  CHECK(doc.find(">Z2<") != std::string::npos);
  CHECK(doc.find(">b<") != std::string::npos);
  // node a: one blue disc; b and c: two wedges each
  CHECK(count(doc, "<path d=\"M") == 4);
  CHECK(doc.find("fill=\"#1f77b4\"") != std::string::npos);
  CHECK(doc.find("fill=\"#ff7f0e\"") != std::string::npos);

  CHECK_THROWS_AS(latent_map_svg(s, g, {"nobody"}), LookupError);
  auto other = from_pairs({{"a", "b"}, {"b", "x"}});
  CHECK_THROWS_AS(latent_map_svg(s, other, {}), DomainError);
}

TEST_CASE("other charts are deterministic") {
  auto g = from_pairs({{"a", "b"}, {"b", "c"}});
  auto layout = force_layout(g, 1);
  CHECK(network_svg(g, layout) == network_svg(g, layout));
  ConfusionMatrix m;
  m.fractions = Eigen::MatrixXd::Identity(2, 2) * 0.5;
  m.counts = {{1, 0}, {0, 1}};
  m.common_node_count = 2;
  m.permutation = {0, 1};
  CHECK(confusion_svg(m, "main", "a") == confusion_svg(m, "main", "a"));
  auto bars = bar_chart_svg({{"corona", 10}, {"impfung", 4}}, "top words");
  CHECK(bars.find("impfung") != std::string::npos);
  CHECK(svg::num(-0.0001) == "0");
  CHECK(svg::num(2.5) == "2.5");
  CHECK(svg::escape("a<b & \"c\"") == "a&lt;b &amp; &quot;c&quot;");
}

TEST_CASE("graphml export") {
  auto tiny = from_pairs({{"a", "b"}});
  auto doc = export_graphml(tiny);
  CHECK(count(doc, "<node ") == 2);
  CHECK(count(doc, "<edge ") == 1);
  CHECK(doc.find("edgedefault=\"directed\"") != std::string::npos);

  std::mt19937_64 rng(6);
  auto g = oracle::random_graph(15, 0.2, rng);
  auto round = build_from_edge_list(graphml_edges(export_graphml(g))).graph;
  std::set<std::pair<std::string, std::string>> before, after;
  for (auto& [a, b] : g.edges()) before.emplace(g.label(a), g.label(b));
  for (auto& [a, b] : round.edges()) after.emplace(round.label(a), round.label(b));
  CHECK(before == after);

  // attributes parsed back with a plain regex and compared to the summary
  Eigen::MatrixXd probs(15, 2);
  for (Eigen::Index i = 0; i < 15; ++i) {
    probs(i, 0) = (i % 4) / 4.0 + 0.1;
    probs(i, 1) = 1.0 - probs(i, 0);
  }
  auto s = summary_for(g, probs, 3);
  auto full = export_graphml(g, s);
  std::regex node_re(R"re(<node id="n(\d+)">(.*)</node>)re");
  std::regex data_re(R"re(<data key="([A-Za-z0-9]+)">([^<]*)</data>)re");
  int nodes = 0;
  for (std::sregex_iterator it(full.begin(), full.end(), node_re), end; it != end; ++it) {
    const auto i = static_cast<Eigen::Index>(std::stoul((*it)[1]));
    std::map<std::string, std::string> data;
    const std::string body = (*it)[2];
    for (std::sregex_iterator d(body.begin(), body.end(), data_re); d != end; ++d) data[(*d)[1]] = (*d)[2];
    CHECK(data["label"] == g.label(static_cast<NodeId>(i)));
    CHECK(std::stoul(data["degree"]) == total_degree(g, static_cast<NodeId>(i)));
    CHECK(std::stod(data["p1"]) == probs(i, 0));
    CHECK(std::stod(data["p2"]) == probs(i, 1));
    CHECK(std::stod(data["Z1"]) == s.point_positions(i, 0));
    CHECK(std::stod(data["Z2"]) == s.point_positions(i, 1));
    CHECK(std::stoi(data["component"]) == (probs(i, 1) > probs(i, 0) ? 2 : 1));
    ++nodes;
  }
  CHECK(nodes == 15);
}

TEST_CASE("render config json") {
  std::vector<std::string> problems;
  auto c = render_config_from_json(nlohmann::json{{"width", 500}, {"palette", {"#000000"}}}, problems);
  CHECK(problems.empty());
  CHECK(c.width == 500);
  CHECK(c.palette.size() == 1);
  render_config_from_json(nlohmann::json{{"width", -1}, {"nope", 1}}, problems);
  auto mentions = [&](const std::string& key) {
    return std::any_of(problems.begin(), problems.end(), [&](const std::string& p) { return p.find(key) != std::string::npos; });
  };
  CHECK(mentions("render.width"));
  CHECK(mentions("render.nope"));
}
