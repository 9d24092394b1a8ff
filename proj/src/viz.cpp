#include "lsm/viz.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <unordered_map>

#include "lsm/errors.hpp"
#include "lsm/svg.hpp"

namespace lsm {

// ---------------------------------------------------------------- config

nlohmann::json to_json(const RenderConfig& c) {
  return {{"width", c.width},
          {"height", c.height},
          {"margin", c.margin},
          {"max_radius", c.max_radius},
          {"min_radius", c.min_radius},
          {"font_size", c.font_size},
          {"edge_color", c.edge_color},
          {"edge_opacity", c.edge_opacity},
          {"edge_width", c.edge_width},
          {"latent_edges", c.latent_edges},
          {"node_stroke", c.node_stroke},
          {"node_stroke_width", c.node_stroke_width},
          {"palette", c.palette}};
}

RenderConfig render_config_from_json(const nlohmann::json& j, std::vector<std::string>& problems) {
  RenderConfig c;
  if (!j.is_object()) {
    problems.push_back("render: expected an object");
    return c;
  }
  const auto known = to_json(c);
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) problems.push_back("render." + key + ": unknown key");
  }
  auto positive = [&](const char* key, double& field, bool allow_zero) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) {
      problems.push_back(std::string("render.") + key + ": expected a number");
      return;
    }
    field = j[key].get<double>();
    if (!std::isfinite(field) || field < 0.0 || (!allow_zero && field == 0.0)) {
      problems.push_back(std::string("render.") + key + (allow_zero ? ": must be >= 0" : ": must be > 0"));
    }
  };
  auto string = [&](const char* key, std::string& field) {
    if (!j.contains(key)) return;
    if (!j[key].is_string()) {
      problems.push_back(std::string("render.") + key + ": expected a string");
      return;
    }
    field = j[key].get<std::string>();
  };
  positive("width", c.width, false);
  positive("height", c.height, false);
  positive("margin", c.margin, true);
  positive("max_radius", c.max_radius, false);
  positive("min_radius", c.min_radius, true);
  positive("font_size", c.font_size, false);
  positive("edge_opacity", c.edge_opacity, true);
  positive("edge_width", c.edge_width, true);
  positive("node_stroke_width", c.node_stroke_width, true);
  string("edge_color", c.edge_color);
  string("node_stroke", c.node_stroke);
  if (j.contains("latent_edges")) {
    if (j["latent_edges"].is_boolean()) {
      c.latent_edges = j["latent_edges"].get<bool>();
    } else {
      problems.push_back("render.latent_edges: expected a boolean");
    }
  }
  if (j.contains("palette")) {
    const auto& p = j["palette"];
    if (!p.is_array() || p.empty() || !std::all_of(p.begin(), p.end(), [](const auto& v) { return v.is_string(); })) {
      problems.push_back("render.palette: expected a non-empty array of colour strings");
    } else {
      c.palette = p.get<std::vector<std::string>>();
    }
  }
  if (c.edge_opacity > 1.0) problems.push_back("render.edge_opacity: must be <= 1");
  if (c.min_radius > c.max_radius) problems.push_back("render.min_radius: must be <= max_radius");
  if (2.0 * c.margin >= std::min(c.width, c.height)) problems.push_back("render.margin: leaves no plot area");
  return c;
}

RenderConfig load_render_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError({path + ": " + e.what()});
  }
  std::vector<std::string> problems;
  auto c = render_config_from_json(j, problems);
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return c;
}

// ---------------------------------------------------------------- layout

namespace {

using Adjacency = std::vector<std::vector<std::size_t>>;
using Vec2 = std::array<double, 2>;

Adjacency undirected(const DirectedGraph& g) {
  Adjacency adj(g.node_count());
  for (const auto& [a, b] : g.edges()) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return adj;
}

class QuadTree {
 public:
  explicit QuadTree(const std::vector<Vec2>& pts) : pts_(pts) {
    double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
    double hi_x = -lo_x, hi_y = -lo_x;
    for (const auto& p : pts) {
      lo_x = std::min(lo_x, p[0]);
      hi_x = std::max(hi_x, p[0]);
      lo_y = std::min(lo_y, p[1]);
      hi_y = std::max(hi_y, p[1]);
    }
    const double half = 0.5 * std::max({hi_x - lo_x, hi_y - lo_y, 1e-9}) * 1.0001;
    cells_.push_back(Cell{{0.5 * (lo_x + hi_x), 0.5 * (lo_y + hi_y)}, half});
    for (std::size_t i = 0; i < pts.size(); ++i) insert(0, i, 0);
  }

  // Repulsive force on point i: sum over others of strength * (x_i - x_j) / |x_i - x_j|^2.
  Vec2 repulsion(std::size_t i, double strength, double theta) const {
    Vec2 f{0.0, 0.0};
    accumulate(0, i, strength, theta, f);
    return f;
  }

 private:
  struct Cell {
    Cell(Vec2 c, double h) : center(c), half(h) {}
    Vec2 center;
    double half;
    double mass = 0.0;
    Vec2 com{0.0, 0.0};
    std::array<int, 4> child{-1, -1, -1, -1};
    std::vector<std::size_t> points;  // leaf contents
    bool leaf = true;
  };

  int quadrant(const Cell& c, const Vec2& p) const {
    return (p[0] >= c.center[0] ? 1 : 0) + (p[1] >= c.center[1] ? 2 : 0);
  }

  void insert(int cell, std::size_t i, int depth) {
    const Vec2& p = pts_[i];
    {
      Cell& c = cells_[static_cast<std::size_t>(cell)];
      c.com[0] = (c.com[0] * c.mass + p[0]) / (c.mass + 1.0);
      c.com[1] = (c.com[1] * c.mass + p[1]) / (c.mass + 1.0);
      c.mass += 1.0;
      if (c.leaf) {
        if (c.points.empty() || depth >= 40) {
          c.points.push_back(i);
          return;
        }
        // split: push existing points down
        c.leaf = false;
      }
    }
    auto existing = std::move(cells_[static_cast<std::size_t>(cell)].points);
    cells_[static_cast<std::size_t>(cell)].points.clear();
    existing.push_back(i);
    for (std::size_t j : existing) {
      const int q = quadrant(cells_[static_cast<std::size_t>(cell)], pts_[j]);
      int child = cells_[static_cast<std::size_t>(cell)].child[static_cast<std::size_t>(q)];
      if (child < 0) {
        const Cell& parent = cells_[static_cast<std::size_t>(cell)];
        const double h = 0.5 * parent.half;
        Vec2 center{parent.center[0] + ((q & 1) ? h : -h), parent.center[1] + ((q & 2) ? h : -h)};
        cells_.push_back(Cell{center, h});
        child = static_cast<int>(cells_.size() - 1);
        cells_[static_cast<std::size_t>(cell)].child[static_cast<std::size_t>(q)] = child;
      }
      insert(child, j, depth + 1);
    }
  }

  void accumulate(int cell, std::size_t i, double strength, double theta, Vec2& f) const {
    const Cell& c = cells_[static_cast<std::size_t>(cell)];
    if (c.mass == 0.0) return;
    const Vec2& p = pts_[i];
    if (c.leaf) {
      for (std::size_t j : c.points) {
        if (j == i) continue;
        add(p, pts_[j], 1.0, strength, i, j, f);
      }
      return;
    }
    const double dx = p[0] - c.com[0], dy = p[1] - c.com[1];
    const double dist = std::sqrt(dx * dx + dy * dy);
    if (dist > 0.0 && 2.0 * c.half / dist < theta && !contains(c, p)) {
      add(p, c.com, c.mass, strength, i, 0, f);
      return;
    }
    for (int ch : c.child) {
      if (ch >= 0) accumulate(ch, i, strength, theta, f);
    }
  }

  static bool contains(const Cell& c, const Vec2& p) {
    return std::abs(p[0] - c.center[0]) <= c.half && std::abs(p[1] - c.center[1]) <= c.half;
  }

  static void add(const Vec2& p, const Vec2& q, double mass, double strength, std::size_t i, std::size_t j,
                  Vec2& f) {
    double dx = p[0] - q[0], dy = p[1] - q[1];
    double d2 = dx * dx + dy * dy;
    if (d2 < 1e-18) {
      // coincident points: deterministic direction from the pair indices
      const double angle = static_cast<double>((i * 7919u + j * 104729u) % 3600u) * (std::numbers::pi / 1800.0);
      dx = std::cos(angle) * 1e-6;
      dy = std::sin(angle) * 1e-6;
      d2 = 1e-12;
    }
    f[0] += strength * mass * dx / d2;
    f[1] += strength * mass * dy / d2;
  }

  const std::vector<Vec2>& pts_;
  std::vector<Cell> cells_;
};

struct LevelResult {
  int iterations = 0;
  bool converged = false;
};

LevelResult spring_electrical(const Adjacency& adj, std::vector<Vec2>& pos, double k, double initial_step,
                              const LayoutOptions& o) {
  LevelResult r;
  const std::size_t n = pos.size();
  if (n <= 1) {
    r.converged = true;
    return r;
  }
  double step = initial_step;
  double energy0 = std::numeric_limits<double>::infinity();
  int progress = 0;
  const double strength = o.c * k * k;
  for (int it = 0; it < o.max_iterations; ++it) {
    QuadTree tree(pos);
    double energy = 0.0;
    double max_disp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Vec2 f = tree.repulsion(i, strength, o.theta);
      for (std::size_t j : adj[i]) {
        const double dx = pos[j][0] - pos[i][0], dy = pos[j][1] - pos[i][1];
        const double d = std::sqrt(dx * dx + dy * dy);
        f[0] += dx * d / k;
        f[1] += dy * d / k;
      }
      const double norm = std::sqrt(f[0] * f[0] + f[1] * f[1]);
      if (norm > 0.0) {
        pos[i][0] += step * f[0] / norm;
        pos[i][1] += step * f[1] / norm;
        max_disp = std::max(max_disp, step);
      }
      energy += norm * norm;
    }
    r.iterations = it + 1;
    if (energy < energy0) {
      if (++progress >= 5) {
        progress = 0;
        step /= o.step_ratio;
      }
    } else {
      progress = 0;
      step *= o.step_ratio;
    }
    energy0 = energy;
    if (max_disp < o.tolerance * k) {
      r.converged = true;
      break;
    }
  }
  return r;
}

// Heavy-edge-free matching: visit nodes in a seeded order and pair each with its
// unmatched neighbour of smallest degree.
std::vector<std::size_t> match(const Adjacency& adj, std::mt19937_64& rng, std::size_t& coarse_n) {
  const std::size_t n = adj.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  constexpr auto kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> parent(n, kNone);
  coarse_n = 0;
  for (std::size_t u : order) {
    if (parent[u] != kNone) continue;
    std::size_t best = kNone;
    for (std::size_t v : adj[u]) {
      if (parent[v] == kNone && v != u && (best == kNone || adj[v].size() < adj[best].size())) best = v;
    }
    parent[u] = coarse_n;
    if (best != kNone) parent[best] = coarse_n;
    ++coarse_n;
  }
  return parent;
}

Adjacency contract(const Adjacency& adj, const std::vector<std::size_t>& parent, std::size_t coarse_n) {
  Adjacency out(coarse_n);
  for (std::size_t u = 0; u < adj.size(); ++u) {
    for (std::size_t v : adj[u]) {
      if (parent[u] != parent[v]) out[parent[u]].push_back(parent[v]);
    }
  }
  for (auto& list : out) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return out;
}

}  // namespace

LayoutResult force_layout(const DirectedGraph& g, std::uint64_t seed, const LayoutOptions& o) {
  const std::size_t n = g.node_count();
  LayoutResult result;
  result.positions = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 2);
  result.k = std::sqrt(o.area / static_cast<double>(std::max<std::size_t>(n, 1)));
  if (n <= 1) {
    result.converged = true;
    return result;
  }
  const double k = result.k;
  std::mt19937_64 rng(seed);

  std::vector<Adjacency> levels{undirected(g)};
  std::vector<std::vector<std::size_t>> parents;
  while (o.multilevel && levels.back().size() > 10 && levels.size() < 30) {
    std::size_t coarse_n = 0;
    auto parent = match(levels.back(), rng, coarse_n);
    if (static_cast<double>(coarse_n) > 0.75 * static_cast<double>(levels.back().size())) break;
    levels.push_back(contract(levels.back(), parent, coarse_n));
    parents.push_back(std::move(parent));
  }

  const std::size_t coarse_n = levels.back().size();
  std::uniform_real_distribution<double> unif(0.0, k * std::sqrt(static_cast<double>(coarse_n)));
  std::vector<Vec2> pos(coarse_n);
  for (auto& p : pos) p = {unif(rng), unif(rng)};

  LevelResult lr = spring_electrical(levels.back(), pos, k, k, o);
  result.iterations_run += lr.iterations;
  std::uniform_real_distribution<double> jitter(-0.05 * k, 0.05 * k);
  for (std::size_t level = levels.size() - 1; level-- > 0;) {
    const auto& parent = parents[level];
    std::vector<Vec2> fine(levels[level].size());
    for (std::size_t u = 0; u < fine.size(); ++u) {
      fine[u] = {pos[parent[u]][0] + jitter(rng), pos[parent[u]][1] + jitter(rng)};
    }
    pos = std::move(fine);
    lr = spring_electrical(levels[level], pos, k, 0.2 * k, o);
    result.iterations_run += lr.iterations;
  }
  result.converged = lr.converged;

  double cx = 0.0, cy = 0.0;
  for (const auto& p : pos) {
    cx += p[0];
    cy += p[1];
  }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.positions(static_cast<Eigen::Index>(i), 0) = pos[i][0] - cx;
    result.positions(static_cast<Eigen::Index>(i), 1) = pos[i][1] - cy;
  }
  return result;
}

// ---------------------------------------------------------------- shared drawing helpers

std::vector<PieSlice> pie_slices(const Eigen::RowVectorXd& probs) {
  std::vector<PieSlice> out;
  if (probs.size() == 0) return out;
  Eigen::Index arg = 0;
  if (probs.maxCoeff(&arg) >= 1.0 - 1e-9) {
    out.push_back({static_cast<int>(arg), 0.0, 360.0, 1.0});
    return out;
  }
  const double total = probs.sum();
  double at = 0.0;
  for (Eigen::Index g = 0; g < probs.size(); ++g) {
    if (probs(g) <= 0.0) continue;
    const double frac = probs(g) / total;
    out.push_back({static_cast<int>(g), at * 360.0, (at + frac) * 360.0, frac});
    at += frac;
  }
  if (!out.empty()) out.back().end_deg = 360.0;
  return out;
}

std::vector<double> degree_radii(const DirectedGraph& g, const RenderConfig& config) {
  std::size_t max_deg = 0;
  std::vector<double> deg(g.node_count());
  for (NodeId i = 0; i < g.node_count(); ++i) {
    const auto d = total_degree(g, i);
    deg[i] = static_cast<double>(d);
    max_deg = std::max(max_deg, d);
  }
  const double scale = max_deg > 0 ? config.max_radius / std::sqrt(static_cast<double>(max_deg)) : 0.0;
  for (auto& d : deg) d = std::max(config.min_radius, scale * std::sqrt(d));
  return deg;
}

namespace {

const std::string& colour(const RenderConfig& c, int component) {
  return c.palette[static_cast<std::size_t>(component) % c.palette.size()];
}

struct Frame {
  double scale = 1.0;
  double ox = 0.0, oy = 0.0;  // data origin offset
  double lo_x = 0.0, hi_x = 1.0, lo_y = 0.0, hi_y = 1.0;
  double left = 0.0, top = 0.0, right = 0.0, bottom = 0.0;

  double x(double v) const { return left + (v - lo_x) * scale + ox; }
  double y(double v) const { return bottom - (v - lo_y) * scale - oy; }
};

// Equal-aspect mapping of the data box into the plot area, padded by `pad` pixels.
Frame frame_for(const Eigen::MatrixXd& xy, const RenderConfig& c, double pad) {
  Frame f;
  f.left = c.margin;
  f.top = c.margin;
  f.right = c.width - c.margin;
  f.bottom = c.height - c.margin;
  if (xy.rows() > 0) {
    f.lo_x = xy.col(0).minCoeff();
    f.hi_x = xy.col(0).maxCoeff();
    f.lo_y = xy.col(1).minCoeff();
    f.hi_y = xy.col(1).maxCoeff();
  }
  const double rx = std::max(f.hi_x - f.lo_x, 1e-9);
  const double ry = std::max(f.hi_y - f.lo_y, 1e-9);
  const double w = std::max(f.right - f.left - 2.0 * pad, 1.0);
  const double h = std::max(f.bottom - f.top - 2.0 * pad, 1.0);
  f.scale = std::min(w / rx, h / ry);
  f.ox = pad + 0.5 * (w - rx * f.scale);
  f.oy = pad + 0.5 * (h - ry * f.scale);
  return f;
}

double nice_step(double range) {
  if (!(range > 0.0)) return 1.0;
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  return (r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0) * mag;
}

std::string pie_path(double cx, double cy, double r, double start_deg, double end_deg) {
  auto pt = [&](double deg) {
    const double a = deg * std::numbers::pi / 180.0;
    return svg::num(cx + r * std::sin(a)) + " " + svg::num(cy - r * std::cos(a));
  };
  const int large = (end_deg - start_deg) > 180.0 ? 1 : 0;
  return "M" + svg::num(cx) + " " + svg::num(cy) + " L" + pt(start_deg) + " A" + svg::num(r) + " " + svg::num(r) +
         " 0 " + std::to_string(large) + " 1 " + pt(end_deg) + " Z";
}

std::vector<NodeId> draw_order(const std::vector<double>& radii) {
  std::vector<NodeId> order(radii.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return radii[a] > radii[b]; });
  return order;
}

}  // namespace

std::string latent_map_svg(const PosteriorSummary& summary, const DirectedGraph& g,
                           const std::vector<std::string>& highlights, const RenderConfig& config) {
  const std::size_t n = g.node_count();
  if (summary.labels.size() != n || static_cast<std::size_t>(summary.point_positions.rows()) != n ||
      static_cast<std::size_t>(summary.membership_probs.rows()) != n) {
    throw DomainError("summary and graph have different node sets");
  }
  if (summary.point_positions.cols() < 2) throw DomainError("latent map needs at least two dimensions");
  // row of the summary for each graph node
  std::vector<Eigen::Index> row(n);
  std::vector<bool> seen(n, false);
  for (std::size_t r = 0; r < n; ++r) {
    const auto id = g.find(summary.labels[r]);
    if (!id || seen[*id]) throw DomainError("summary and graph have different node sets");
    seen[*id] = true;
    row[*id] = static_cast<Eigen::Index>(r);
  }

  Eigen::MatrixXd xy(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) xy.row(static_cast<Eigen::Index>(i)) = summary.point_positions.row(row[i]).head(2);
  const auto radii = degree_radii(g, config);
  const Frame f = frame_for(xy, config, config.max_radius + 4.0);

  svg::Document doc(config.width, config.height);
  doc.rect(0, 0, config.width, config.height, "#ffffff");
  doc.rect(f.left, f.top, f.right - f.left, f.bottom - f.top, "none", "#000000", 0.8);

  // ticks
  const double tick_font = config.font_size * 0.9;
  auto ticks = [&](int axis) {
    const double lo_px = axis == 0 ? f.left : f.top;
    const double hi_px = axis == 0 ? f.right : f.bottom;
    double v_lo, v_hi;
    if (axis == 0) {
      v_lo = f.lo_x + (lo_px - f.left - f.ox) / f.scale;
      v_hi = f.lo_x + (hi_px - f.left - f.ox) / f.scale;
    } else {
      v_lo = f.lo_y + (f.bottom - hi_px - f.oy) / f.scale;
      v_hi = f.lo_y + (f.bottom - lo_px - f.oy) / f.scale;
    }
    const double step = nice_step(v_hi - v_lo);
    for (double v = std::ceil(v_lo / step) * step; v <= v_hi + 1e-12; v += step) {
      const double tv = std::abs(v) < step * 1e-9 ? 0.0 : v;
      if (axis == 0) {
        const double px = f.x(tv);
        doc.line(px, f.bottom, px, f.bottom + 4, "#000000", 0.8);
        doc.text(px, f.bottom + 6 + tick_font, svg::num(tv, 4), tick_font, "middle");
      } else {
        const double py = f.y(tv);
        doc.line(f.left - 4, py, f.left, py, "#000000", 0.8);
        doc.text(f.left - 6, py + 0.35 * tick_font, svg::num(tv, 4), tick_font, "end");
      }
    }
  };
  ticks(0);
  ticks(1);
  doc.text(0.5 * (f.left + f.right), config.height - 0.25 * config.margin, "Z1", config.font_size * 1.2, "middle");
  const double ylab_x = 0.3 * config.margin, ylab_y = 0.5 * (f.top + f.bottom);
  doc.raw("<text x=\"" + svg::num(ylab_x) + "\" y=\"" + svg::num(ylab_y) + "\" font-size=\"" +
          svg::num(config.font_size * 1.2) + "\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 " +
          svg::num(ylab_x) + " " + svg::num(ylab_y) + ")\">Z2</text>\n");

  if (config.latent_edges) {
    for (const auto& [a, b] : g.edges()) {
      doc.line(f.x(xy(static_cast<Eigen::Index>(a), 0)), f.y(xy(static_cast<Eigen::Index>(a), 1)),
               f.x(xy(static_cast<Eigen::Index>(b), 0)), f.y(xy(static_cast<Eigen::Index>(b), 1)), config.edge_color,
               config.edge_width, config.edge_opacity);
    }
  }

  for (NodeId i : draw_order(radii)) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double cx = f.x(xy(ii, 0)), cy = f.y(xy(ii, 1)), r = radii[i];
    for (const auto& s : pie_slices(summary.membership_probs.row(row[i]))) {
      if (s.end_deg - s.start_deg >= 360.0) {
        doc.circle(cx, cy, r, colour(config, s.component));
      } else {
        doc.path(pie_path(cx, cy, r, s.start_deg, s.end_deg), colour(config, s.component));
      }
    }
    doc.circle(cx, cy, r, "none", config.node_stroke, config.node_stroke_width);
  }

  const double mid_x = 0.5 * (f.left + f.right), mid_y = 0.5 * (f.top + f.bottom);
  for (const auto& label : highlights) {
    const auto id = g.find(label);
    if (!id) throw LookupError("highlighted label not in graph: " + label);
    const auto ii = static_cast<Eigen::Index>(*id);
    const double cx = f.x(xy(ii, 0)), cy = f.y(xy(ii, 1)), r = radii[*id];
    double dx = cx - mid_x, dy = cy - mid_y;
    const double len = std::sqrt(dx * dx + dy * dy);
    if (len < 1e-9) {
      dx = 0.0;
      dy = -1.0;
    } else {
      dx /= len;
      dy /= len;
    }
    const double lx = cx + dx * (r + 18.0), ly = cy + dy * (r + 18.0);
    doc.line(cx + dx * r, cy + dy * r, lx, ly, "#000000", 0.6);
    doc.text(lx + (dx >= 0 ? 2.0 : -2.0), ly + 0.35 * config.font_size, label, config.font_size,
             dx >= 0 ? "start" : "end");
  }

  for (int gi = 0; gi < summary.clusters; ++gi) {
    const double y = f.top + 8.0 + gi * (config.font_size + 6.0);
    doc.rect(f.right - 90.0, y, 10.0, 10.0, colour(config, gi));
    doc.text(f.right - 75.0, y + 9.0, "Cluster " + std::to_string(gi + 1), config.font_size);
  }
  return doc.str();
}

std::string network_svg(const DirectedGraph& g, const LayoutResult& layout, const RenderConfig& config,
                        const std::optional<Labeling>& labeling) {
  const std::size_t n = g.node_count();
  if (static_cast<std::size_t>(layout.positions.rows()) != n) throw DomainError("layout and graph sizes differ");
  const auto radii = degree_radii(g, config);
  const Frame f = frame_for(layout.positions, config, config.max_radius + 2.0);
  svg::Document doc(config.width, config.height);
  doc.rect(0, 0, config.width, config.height, "#ffffff");
  const auto& p = layout.positions;
  for (const auto& [a, b] : g.edges()) {
    const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
    doc.line(f.x(p(ia, 0)), f.y(p(ia, 1)), f.x(p(ib, 0)), f.y(p(ib, 1)), config.edge_color, config.edge_width,
             config.edge_opacity);
  }
  for (NodeId i : draw_order(radii)) {
    const auto ii = static_cast<Eigen::Index>(i);
    std::string fill = "#555555";
    if (labeling) {
      const auto it = labeling->components.find(g.label(i));
      if (it != labeling->components.end()) fill = colour(config, it->second);
    }
    doc.circle(f.x(p(ii, 0)), f.y(p(ii, 1)), radii[i], fill, config.node_stroke, config.node_stroke_width);
  }
  return doc.str();
}

std::string confusion_svg(const ConfusionMatrix& m, std::string_view a_title, std::string_view b_title,
                          const RenderConfig& config) {
  const auto k = static_cast<int>(m.counts.size());
  const double cell = 90.0;
  const double left = 120.0, top = 70.0;
  const double w = left + k * cell + 30.0, h = top + k * cell + 60.0;
  svg::Document doc(w, h);
  doc.rect(0, 0, w, h, "#ffffff");
  doc.text(left + 0.5 * k * cell, top - 40.0, a_title, config.font_size * 1.1, "middle");
  doc.raw("<text x=\"30\" y=\"" + svg::num(top + 0.5 * k * cell) + "\" font-size=\"" +
          svg::num(config.font_size * 1.1) + "\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 30 " +
          svg::num(top + 0.5 * k * cell) + ")\">" + svg::escape(b_title) + "</text>\n");
  for (int c = 0; c < k; ++c) {
    doc.text(left + (c + 0.5) * cell, top - 10.0, "Cluster " + std::to_string(c + 1), config.font_size, "middle");
  }
  for (int r = 0; r < k; ++r) {
    doc.text(left - 8.0, top + (r + 0.5) * cell + 4.0, "Cluster " + std::to_string(r + 1), config.font_size, "end");
    for (int c = 0; c < k; ++c) {
      const double v = m.fractions(r, c);
      // white -> #1f77b4
      const int red = static_cast<int>(std::lround(255 - v * (255 - 0x1f)));
      const int green = static_cast<int>(std::lround(255 - v * (255 - 0x77)));
      const int blue = static_cast<int>(std::lround(255 - v * (255 - 0xb4)));
      char fill[8];
      std::snprintf(fill, sizeof fill, "#%02x%02x%02x", red, green, blue);
      doc.rect(left + c * cell, top + r * cell, cell, cell, fill, "#ffffff", 1.0);
      const char* ink = v > 0.5 ? "#ffffff" : "#000000";
      char pct[32];
      std::snprintf(pct, sizeof pct, "%.1f%%", 100.0 * v);
      doc.text(left + (c + 0.5) * cell, top + (r + 0.5) * cell, pct, config.font_size * 1.2, "middle", ink);
      doc.text(left + (c + 0.5) * cell, top + (r + 0.5) * cell + config.font_size * 1.4,
               "n=" + std::to_string(m.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]),
               config.font_size * 0.9, "middle", ink);
    }
  }
  return doc.str();
}

std::string bar_chart_svg(const std::vector<std::pair<std::string, std::size_t>>& bars, std::string_view title,
                          const RenderConfig& config) {
  const double row = 22.0, left = 140.0, top = 50.0;
  const double w = config.width;
  const double h = top + static_cast<double>(bars.size()) * row + 30.0;
  std::size_t max_count = 0;
  for (const auto& b : bars) max_count = std::max(max_count, b.second);
  const double span = w - left - 80.0;
  svg::Document doc(w, h);
  doc.rect(0, 0, w, h, "#ffffff");
  doc.text(0.5 * w, 28.0, title, config.font_size * 1.3, "middle");
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double y = top + static_cast<double>(i) * row;
    const double len = max_count ? span * static_cast<double>(bars[i].second) / static_cast<double>(max_count) : 0.0;
    doc.text(left - 8.0, y + 14.0, bars[i].first, config.font_size, "end");
    doc.rect(left, y + 3.0, len, row - 6.0, colour(config, 0));
    doc.text(left + len + 6.0, y + 14.0, std::to_string(bars[i].second), config.font_size);
  }
  return doc.str();
}

// ---------------------------------------------------------------- GraphML

namespace {

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string unescape_xml(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos) {
      out += s[i];
      continue;
    }
    const auto ent = s.substr(i + 1, semi - i - 1);
    if (ent == "amp") out += '&';
    else if (ent == "lt") out += '<';
    else if (ent == "gt") out += '>';
    else if (ent == "quot") out += '"';
    else if (ent == "apos") out += '\'';
    else {
      out += s.substr(i, semi - i + 1);
    }
    i = semi;
  }
  return out;
}

std::string attribute(std::string_view tag, std::string_view name) {
  const std::string key = std::string(" ") + std::string(name) + "=\"";
  const auto at = tag.find(key);
  if (at == std::string_view::npos) throw ParseError("GraphML element without " + std::string(name), 0);
  const auto start = at + key.size();
  const auto end = tag.find('"', start);
  if (end == std::string_view::npos) throw ParseError("unterminated GraphML attribute", 0);
  return unescape_xml(tag.substr(start, end - start));
}

}  // namespace

std::string export_graphml(const DirectedGraph& g, const std::optional<PosteriorSummary>& summary) {
  const std::size_t n = g.node_count();
  std::vector<Eigen::Index> row(n, -1);
  std::vector<int> map;
  if (summary) {
    if (summary->labels.size() != n) throw DomainError("summary and graph have different node sets");
    for (std::size_t r = 0; r < n; ++r) {
      const auto id = g.find(summary->labels[r]);
      if (!id || row[*id] >= 0) throw DomainError("summary and graph have different node sets");
      row[*id] = static_cast<Eigen::Index>(r);
    }
    map = summary->map_memberships();
  }
  std::string out =
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
      "  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n"
      "  <key id=\"degree\" for=\"node\" attr.name=\"degree\" attr.type=\"int\"/>\n";
  if (summary) {
    out += "  <key id=\"component\" for=\"node\" attr.name=\"component\" attr.type=\"int\"/>\n";
    for (int gi = 1; gi <= summary->clusters; ++gi) {
      out += "  <key id=\"p" + std::to_string(gi) + "\" for=\"node\" attr.name=\"p" + std::to_string(gi) +
             "\" attr.type=\"double\"/>\n";
    }
    for (int t = 1; t <= summary->dimensions; ++t) {
      out += "  <key id=\"Z" + std::to_string(t) + "\" for=\"node\" attr.name=\"Z" + std::to_string(t) +
             "\" attr.type=\"double\"/>\n";
    }
  }
  out += "  <graph id=\"G\" edgedefault=\"directed\">\n";
  for (NodeId i = 0; i < n; ++i) {
    out += "    <node id=\"n" + std::to_string(i) + "\">";
    out += "<data key=\"label\">" + svg::escape(g.label(i)) + "</data>";
    out += "<data key=\"degree\">" + std::to_string(total_degree(g, i)) + "</data>";
    if (summary) {
      const auto r = row[i];
      out += "<data key=\"component\">" + std::to_string(map[static_cast<std::size_t>(r)] + 1) + "</data>";
      for (int gi = 0; gi < summary->clusters; ++gi) {
        out += "<data key=\"p" + std::to_string(gi + 1) + "\">" + exact(summary->membership_probs(r, gi)) + "</data>";
      }
      for (int t = 0; t < summary->dimensions; ++t) {
        out += "<data key=\"Z" + std::to_string(t + 1) + "\">" + exact(summary->point_positions(r, t)) + "</data>";
      }
    }
    out += "</node>\n";
  }
  std::size_t e = 0;
  for (const auto& [a, b] : g.edges()) {
    out += "    <edge id=\"e" + std::to_string(e++) + "\" source=\"n" + std::to_string(a) + "\" target=\"n" +
           std::to_string(b) + "\"/>\n";
  }
  out += "  </graph>\n</graphml>\n";
  return out;
}

std::vector<std::pair<std::string, std::string>> graphml_edges(std::string_view doc) {
  std::unordered_map<std::string, std::string> label_of;
  std::size_t pos = 0;
  while ((pos = doc.find("<node ", pos)) != std::string_view::npos) {
    const auto tag_end = doc.find('>', pos);
    if (tag_end == std::string_view::npos) throw ParseError("unterminated node element", 0);
    const auto id = attribute(doc.substr(pos, tag_end - pos), "id");
    const auto close = doc.find("</node>", tag_end);
    const auto body = doc.substr(tag_end + 1, close == std::string_view::npos ? 0 : close - tag_end - 1);
    const std::string_view open = "<data key=\"label\">";
    const auto d = body.find(open);
    if (d == std::string_view::npos) throw ParseError("node " + id + " has no label", 0);
    const auto d_end = body.find("</data>", d);
    label_of[id] = unescape_xml(body.substr(d + open.size(), d_end - d - open.size()));
    pos = tag_end;
  }
  std::vector<std::pair<std::string, std::string>> edges;
  pos = 0;
  while ((pos = doc.find("<edge ", pos)) != std::string_view::npos) {
    const auto tag_end = doc.find('>', pos);
    if (tag_end == std::string_view::npos) throw ParseError("unterminated edge element", 0);
    const auto tag = doc.substr(pos, tag_end - pos);
    const auto s = label_of.find(attribute(tag, "source"));
    const auto t = label_of.find(attribute(tag, "target"));
    if (s == label_of.end() || t == label_of.end()) throw ParseError("edge refers to an unknown node", 0);
    edges.emplace_back(s->second, t->second);
    pos = tag_end;
  }
  return edges;
}

}  // namespace lsm
