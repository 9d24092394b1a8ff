#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lsm/analysis.hpp"
#include "lsm/graph.hpp"
#include "lsm/inference.hpp"

namespace lsm {

struct RenderConfig {
  double width = 800.0;
  double height = 800.0;
  double margin = 60.0;
  double max_radius = 14.0;  // radius of the highest-degree node
  double min_radius = 1.0;
  double font_size = 11.0;
  std::string edge_color = "#9e9e9e";
  double edge_opacity = 0.12;
  double edge_width = 0.4;
  bool latent_edges = true;
  std::string node_stroke = "#333333";
  double node_stroke_width = 0.3;
  // Component g is drawn with palette[g % size].
  std::vector<std::string> palette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
};

nlohmann::json to_json(const RenderConfig& c);
RenderConfig render_config_from_json(const nlohmann::json& j, std::vector<std::string>& problems);
RenderConfig load_render_config(const std::string& path);  // throws ValidationError

struct LayoutOptions {
  double c = 0.2;           // repulsion strength
  double theta = 1.2;       // Barnes-Hut opening criterion
  double step_ratio = 0.9;  // adaptive step factor t
  double tolerance = 1e-3;  // converged when max displacement < tolerance * k
  double area = 10000.0;    // k = sqrt(area / n)
  int max_iterations = 1000;  // per level
  bool multilevel = true;
};

struct LayoutResult {
  Eigen::MatrixXd positions;  // n x 2, centroid at the origin
  int iterations_run = 0;     // summed over levels
  bool converged = false;     // finest level
  double k = 0.0;
};

// Spring-electrical layout on the symmetrised graph: repulsion C k^2 / r,
// attraction r^2 / k, Barnes-Hut quadtree, adaptive step, coarsening by edge
// matching. Deterministic given the seed.
LayoutResult force_layout(const DirectedGraph& g, std::uint64_t seed, const LayoutOptions& options = {});
inline LayoutResult force_layout(const DirectedGraph& g, std::uint64_t seed, int max_iterations) {
  LayoutOptions o;
  o.max_iterations = max_iterations;
  return force_layout(g, seed, o);
}

struct PieSlice {
  int component = 0;       // 0-based
  double start_deg = 0.0;  // clockwise from 12 o'clock
  double end_deg = 0.0;
  double fraction = 0.0;
};

// Nonzero components in index order, starting at 12 o'clock and running
// clockwise. A row whose largest entry is >= 1 - 1e-9 gives one 360° slice.
std::vector<PieSlice> pie_slices(const Eigen::RowVectorXd& probs);

// Node radii proportional to sqrt(total degree), scaled so the largest is
// config.max_radius; never below config.min_radius.
std::vector<double> degree_radii(const DirectedGraph& g, const RenderConfig& config);

// Latent positions with one membership pie per node. The summary labels must be
// exactly the graph labels (any order); otherwise DomainError.
std::string latent_map_svg(const PosteriorSummary& summary, const DirectedGraph& g,
                           const std::vector<std::string>& highlights, const RenderConfig& config = {});

// Raw network drawn at the given layout; nodes coloured by `labeling` when given.
std::string network_svg(const DirectedGraph& g, const LayoutResult& layout, const RenderConfig& config = {},
                        const std::optional<Labeling>& labeling = std::nullopt);

std::string confusion_svg(const ConfusionMatrix& m, std::string_view a_title, std::string_view b_title,
                          const RenderConfig& config = {});

std::string bar_chart_svg(const std::vector<std::pair<std::string, std::size_t>>& bars, std::string_view title,
                          const RenderConfig& config = {});

// GraphML 1.0, directed. Node attributes: label, degree and, with a summary,
// component (1-based MAP), p1..pK and Z1..Zd.
std::string export_graphml(const DirectedGraph& g, const std::optional<PosteriorSummary>& summary = std::nullopt);

// (source label, target label) pairs of a document written by export_graphml.
std::vector<std::pair<std::string, std::string>> graphml_edges(std::string_view document);

}  // namespace lsm
