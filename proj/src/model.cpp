#include "lsm/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "lsm/errors.hpp"

namespace lsm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_normal(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * r * r / var;
}

double log_inv_gamma(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw DomainError(std::string(what) + " must be positive");
}

}  // namespace

std::vector<std::string> ModelConfig::problems() const {
  std::vector<std::string> out;
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) out.push_back(std::string(name) + " must be > 0");
  };
  if (dimensions < 1) out.push_back("dimensions must be >= 1");
  if (clusters < 1) out.push_back("clusters must be >= 1");
  if (!std::isfinite(beta0_prior_mean)) out.push_back("beta0_prior_mean must be finite");
  positive(beta0_prior_var, "beta0_prior_var");
  positive(sender_var_shape, "sender_var_shape");
  positive(sender_var_scale, "sender_var_scale");
  positive(receiver_var_shape, "receiver_var_shape");
  positive(receiver_var_scale, "receiver_var_scale");
  positive(cluster_var_shape, "cluster_var_shape");
  positive(cluster_var_scale, "cluster_var_scale");
  positive(mean_prior_scale, "mean_prior_scale");
  positive(dirichlet_concentration, "dirichlet_concentration");
  return out;
}

void ModelConfig::validate() const {
  auto p = problems();
  if (!p.empty()) throw ValidationError(std::move(p));
}

void ParameterState::check() const {
  const auto n = positions.rows();
  const auto d = positions.cols();
  const auto k = mixture.weights.size();
  if (sender.size() != n || receiver.size() != n ||
      memberships.size() != static_cast<std::size_t>(n)) {
    throw ShapeError("state vectors disagree on node count");
  }
  if (mixture.means.rows() != k || mixture.means.cols() != d || mixture.variances.size() != k) {
    throw ShapeError("mixture parameters disagree on K or d");
  }
  if (k < 1) throw ShapeError("mixture needs at least one component");
  if (std::abs(mixture.weights.sum() - 1.0) > 1e-12) {
    throw DomainError("mixture weights must sum to 1");
  }
  if ((mixture.weights.array() < 0.0).any()) throw DomainError("negative mixture weight");
  require_positive(sender_var, "sender variance");
  require_positive(receiver_var, "receiver variance");
  for (Eigen::Index g = 0; g < k; ++g) require_positive(mixture.variances(g), "cluster variance");
  for (int m : memberships) {
    if (m < 0 || m >= k) throw DomainError("membership out of range");
  }
}

ParameterState make_state(std::size_t n, int d, int k) {
  ParameterState s;
  const auto nn = static_cast<Eigen::Index>(n);
  s.positions = Eigen::MatrixXd::Zero(nn, d);
  s.sender = Eigen::VectorXd::Zero(nn);
  s.receiver = Eigen::VectorXd::Zero(nn);
  s.mixture.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  s.mixture.means = Eigen::MatrixXd::Zero(k, d);
  s.mixture.variances = Eigen::VectorXd::Ones(k);
  s.memberships.assign(n, 0);
  return s;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double edge_logit(const ParameterState& s, NodeId i, NodeId j) {
  const auto n = s.node_count();
  if (i >= n || j >= n) throw LookupError("node index out of range");
  if (i == j) throw DomainError("edge_logit undefined for i == j");
  const auto a = static_cast<Eigen::Index>(i);
  const auto b = static_cast<Eigen::Index>(j);
  return s.beta0 - (s.positions.row(a) - s.positions.row(b)).norm() + s.sender(a) + s.receiver(b);
}

double log_likelihood(const ParameterState& s, std::span<const unsigned char> adjacency) {
  const auto n = static_cast<Eigen::Index>(s.node_count());
  if (adjacency.size() != static_cast<std::size_t>(n * n) || s.sender.size() != n ||
      s.receiver.size() != n) {
    throw ShapeError("state and graph sizes differ");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double eta = s.beta0 - (s.positions.row(i) - s.positions.row(j)).norm() + s.sender(i) +
                         s.receiver(j);
      row += (adjacency[static_cast<std::size_t>(i * n + j)] ? eta : 0.0) - softplus(eta);
    }
    total += row;
  }
  return total;
}

double log_likelihood(const ParameterState& s, const DirectedGraph& g) {
  if (g.node_count() != s.node_count()) throw ShapeError("state and graph sizes differ");
  const auto a = g.adjacency();
  return log_likelihood(s, a);
}

double log_prior(const ParameterState& s, const ModelConfig& c) {
  const auto n = static_cast<Eigen::Index>(s.node_count());
  const int d = s.dimensions();
  const int k = s.clusters();
  require_positive(s.sender_var, "sender variance");
  require_positive(s.receiver_var, "receiver variance");
  for (int g = 0; g < k; ++g) require_positive(s.mixture.variances(g), "cluster variance");
  if (static_cast<Eigen::Index>(s.memberships.size()) != n) throw ShapeError("membership count");

  double lp = log_normal(s.beta0, c.beta0_prior_mean, c.beta0_prior_var);

  for (Eigen::Index i = 0; i < n; ++i) {
    lp += log_normal(s.sender(i), 0.0, s.sender_var);
    lp += log_normal(s.receiver(i), 0.0, s.receiver_var);
  }
  lp += log_inv_gamma(s.sender_var, c.sender_var_shape, c.sender_var_scale);
  lp += log_inv_gamma(s.receiver_var, c.receiver_var_shape, c.receiver_var_scale);

  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = s.memberships[static_cast<std::size_t>(i)];
    const double w = s.mixture.weights(g);
    if (w <= 0.0) return -std::numeric_limits<double>::infinity();
    const double var = s.mixture.variances(g);
    const double r2 = (s.positions.row(i) - s.mixture.means.row(g)).squaredNorm();
    lp += std::log(w) - 0.5 * d * (kLog2Pi + std::log(var)) - 0.5 * r2 / var;
  }

  if (k > 1) {
    const double alpha = c.dirichlet_concentration;
    lp += std::lgamma(k * alpha) - k * std::lgamma(alpha);
    for (int g = 0; g < k; ++g) {
      const double w = s.mixture.weights(g);
      if (w <= 0.0 && alpha > 1.0) return -std::numeric_limits<double>::infinity();
      lp += (alpha - 1.0) * std::log(w);
    }
  }

  for (int g = 0; g < k; ++g) {
    const double var = s.mixture.variances(g);
    const double mvar = c.mean_prior_scale * var;
    lp += -0.5 * d * (kLog2Pi + std::log(mvar)) - 0.5 * s.mixture.means.row(g).squaredNorm() / mvar;
    lp += log_inv_gamma(var, c.cluster_var_shape, c.cluster_var_scale);
  }
  return lp;
}

double log_posterior(const ParameterState& s, const DirectedGraph& g, const ModelConfig& c) {
  const double prior = log_prior(s, c);
  if (!std::isfinite(prior)) return prior;
  return log_likelihood(s, g) + prior;
}

DirectedGraph sample_network(const ParameterState& s, std::uint64_t seed,
                             const std::vector<std::string>& labels) {
  const std::size_t n = s.node_count();
  if (!labels.empty() && labels.size() != n) throw ShapeError("label count differs from n");
  GraphBuilder b;
  std::vector<std::string> names(n);
  for (std::size_t i = 0; i < n; ++i) {
    names[i] = labels.empty() ? "v" + std::to_string(i + 1) : labels[i];
    b.add_node(names[i]);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (unif(rng) < logistic(edge_logit(s, i, j))) b.add_edge(names[i], names[j]);
    }
  }
  return std::move(b).build();
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::MatrixXd matrix_from(const nlohmann::json& j, Eigen::Index cols_hint) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : cols_hint;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ShapeError("ragged matrix in JSON");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const ParameterState& s) {
  std::vector<int> members(s.memberships.size());
  for (std::size_t i = 0; i < members.size(); ++i) members[i] = s.memberships[i] + 1;
  return {
      {"schema_version", kStateSchemaVersion},
      {"beta0", s.beta0},
      {"positions", matrix_json(s.positions)},
      {"sender", vector_json(s.sender)},
      {"receiver", vector_json(s.receiver)},
      {"sender_var", s.sender_var},
      {"receiver_var", s.receiver_var},
      {"mixture",
       {{"weights", vector_json(s.mixture.weights)},
        {"means", matrix_json(s.mixture.means)},
        {"variances", vector_json(s.mixture.variances)}}},
      {"memberships", members},
  };
}

ParameterState state_from_json(const nlohmann::json& j) {
  const int version = j.at("schema_version").get<int>();
  if (version != kStateSchemaVersion) {
    throw ShapeError("unsupported state schema version " + std::to_string(version));
  }
  ParameterState s;
  s.beta0 = j.at("beta0").get<double>();
  const auto& mix = j.at("mixture");
  const auto means = mix.at("means");
  s.mixture.weights = vector_from(mix.at("weights"));
  s.mixture.variances = vector_from(mix.at("variances"));
  const Eigen::Index d = means.empty() ? 0 : static_cast<Eigen::Index>(means.at(0).size());
  s.positions = matrix_from(j.at("positions"), d);
  s.mixture.means = matrix_from(means, s.positions.cols());
  s.sender = vector_from(j.at("sender"));
  s.receiver = vector_from(j.at("receiver"));
  s.sender_var = j.at("sender_var").get<double>();
  s.receiver_var = j.at("receiver_var").get<double>();
  for (int m : j.at("memberships").get<std::vector<int>>()) s.memberships.push_back(m - 1);
  s.check();
  return s;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"dimensions", c.dimensions},
      {"clusters", c.clusters},
      {"beta0_prior_mean", c.beta0_prior_mean},
      {"beta0_prior_var", c.beta0_prior_var},
      {"sender_var_shape", c.sender_var_shape},
      {"sender_var_scale", c.sender_var_scale},
      {"receiver_var_shape", c.receiver_var_shape},
      {"receiver_var_scale", c.receiver_var_scale},
      {"cluster_var_shape", c.cluster_var_shape},
      {"cluster_var_scale", c.cluster_var_scale},
      {"mean_prior_scale", c.mean_prior_scale},
      {"dirichlet_concentration", c.dirichlet_concentration},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j, std::vector<std::string>& problems) {
  ModelConfig c;
  if (!j.is_object()) {
    problems.push_back("model: expected an object");
    return c;
  }
  auto num = [&](const char* key, double& field) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) {
      problems.push_back(std::string("model.") + key + ": expected a number");
      return;
    }
    field = j[key].get<double>();
  };
  auto integer = [&](const char* key, int& field) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) {
      problems.push_back(std::string("model.") + key + ": expected an integer");
      return;
    }
    field = j[key].get<int>();
  };
  const auto known = to_json(ModelConfig{});
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) problems.push_back("model." + key + ": unknown key");
  }
  integer("dimensions", c.dimensions);
  integer("clusters", c.clusters);
  num("beta0_prior_mean", c.beta0_prior_mean);
  num("beta0_prior_var", c.beta0_prior_var);
  num("sender_var_shape", c.sender_var_shape);
  num("sender_var_scale", c.sender_var_scale);
  num("receiver_var_shape", c.receiver_var_shape);
  num("receiver_var_scale", c.receiver_var_scale);
  num("cluster_var_shape", c.cluster_var_shape);
  num("cluster_var_scale", c.cluster_var_scale);
  num("mean_prior_scale", c.mean_prior_scale);
  num("dirichlet_concentration", c.dirichlet_concentration);
  for (auto& p : c.problems()) problems.push_back("model." + p);
  return c;
}

}  // namespace lsm
