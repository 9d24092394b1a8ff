#include "lsm/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "lsm/errors.hpp"
#include "lsm/mixture.hpp"
#include "lsm/seeds.hpp"

namespace lsm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_normal(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * r * r / var;
}

double draw_inv_gamma(std::mt19937_64& rng, double shape, double scale) {
  std::gamma_distribution<double> gamma(shape, 1.0);
  return scale / gamma(rng);
}

}  // namespace

// ---------------------------------------------------------------- configs

std::vector<std::string> McmcConfig::problems() const {
  std::vector<std::string> out;
  if (iterations < 0) out.push_back("iterations must be >= 0");
  if (burn_in < 0) out.push_back("burn_in must be >= 0");
  if (iterations > 0 && burn_in >= iterations) out.push_back("burn_in must be < iterations");
  if (thinning < 1) out.push_back("thinning must be >= 1");
  if (chains < 1) out.push_back("chains must be >= 1");
  if (adapt_window < 1) out.push_back("adapt_window must be >= 1");
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) out.push_back(std::string(name) + " must be > 0");
  };
  positive(position_proposal_sd, "position_proposal_sd");
  positive(beta0_proposal_sd, "beta0_proposal_sd");
  positive(sender_proposal_sd, "sender_proposal_sd");
  positive(receiver_proposal_sd, "receiver_proposal_sd");
  return out;
}

void McmcConfig::validate() const {
  auto p = problems();
  if (!p.empty()) throw ValidationError(std::move(p));
}

nlohmann::json to_json(const McmcConfig& m) {
  return {
      {"iterations", m.iterations},
      {"burn_in", m.burn_in},
      {"thinning", m.thinning},
      {"chains", m.chains},
      {"position_proposal_sd", m.position_proposal_sd},
      {"beta0_proposal_sd", m.beta0_proposal_sd},
      {"sender_proposal_sd", m.sender_proposal_sd},
      {"receiver_proposal_sd", m.receiver_proposal_sd},
      {"adapt_window", m.adapt_window},
      {"seed", m.seed},
  };
}

McmcConfig mcmc_config_from_json(const nlohmann::json& j, std::vector<std::string>& problems) {
  McmcConfig m;
  if (!j.is_object()) {
    problems.push_back("mcmc: expected an object");
    return m;
  }
  const auto known = to_json(McmcConfig{});
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) problems.push_back("mcmc." + key + ": unknown key");
  }
  auto integer = [&](const char* key, int& field) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) {
      problems.push_back(std::string("mcmc.") + key + ": expected an integer");
      return;
    }
    field = j[key].get<int>();
  };
  auto num = [&](const char* key, double& field) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) {
      problems.push_back(std::string("mcmc.") + key + ": expected a number");
      return;
    }
    field = j[key].get<double>();
  };
  integer("iterations", m.iterations);
  integer("burn_in", m.burn_in);
  integer("thinning", m.thinning);
  integer("chains", m.chains);
  integer("adapt_window", m.adapt_window);
  num("position_proposal_sd", m.position_proposal_sd);
  num("beta0_proposal_sd", m.beta0_proposal_sd);
  num("sender_proposal_sd", m.sender_proposal_sd);
  num("receiver_proposal_sd", m.receiver_proposal_sd);
  if (j.contains("seed")) {
    if (j["seed"].is_number_unsigned() || (j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0)) {
      m.seed = j["seed"].get<std::uint64_t>();
    } else {
      problems.push_back("mcmc.seed: expected a non-negative integer");
    }
  }
  for (auto& p : m.problems()) problems.push_back("mcmc." + p);
  return m;
}

double BlockCounts::rate(Block b) const {
  const auto i = static_cast<std::size_t>(b);
  return proposed[i] ? static_cast<double>(accepted[i]) / static_cast<double>(proposed[i]) : 0.0;
}

// ---------------------------------------------------------------- initialization

Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& distances, int d) {
  const Eigen::Index n = distances.rows();
  if (distances.cols() != n) throw ShapeError("distance matrix must be square");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, d);
  if (n < 2) return out;
  const Eigen::MatrixXd sq = distances.array().square().matrix();
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd b = -0.5 * centering * sq * centering;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const Eigen::MatrixXd& vectors = eig.eigenvectors();
  for (int k = 0; k < d && k < n; ++k) {
    const Eigen::Index col = n - 1 - k;
    const double lambda = std::max(0.0, values(col));
    Eigen::VectorXd v = vectors.col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.col(k) = v * std::sqrt(lambda);
  }
  return out;
}

ParameterState initialize(const DirectedGraph& g, const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  const std::size_t n = g.node_count();
  const int k = c.clusters;
  const int d = c.dimensions;
  if (n < static_cast<std::size_t>(k)) {
    throw DomainError("initialize: " + std::to_string(n) + " nodes < " + std::to_string(k) +
                      " clusters");
  }
  ParameterState s = make_state(n, d, k);
  s.positions = classical_mds(geodesic_matrix(g), d);

  const auto km = kmeans(s.positions, k, derive_seed(seed, "init-kmeans"), 10);
  s.memberships = km.labels;
  s.mixture = mixture_from_partition(s.positions, km.labels, k);
  // Add-one smoothing keeps every weight strictly inside the simplex.
  for (int gi = 0; gi < k; ++gi) {
    const double count = s.mixture.weights(gi) * static_cast<double>(n);
    s.mixture.weights(gi) = (count + 1.0) / static_cast<double>(n + static_cast<std::size_t>(k));
  }
  s.mixture.weights /= s.mixture.weights.sum();
  s.mixture.variances = s.mixture.variances.cwiseMax(0.01);

  double mean_dist = 0.0;
  if (n >= 2) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) {
          mean_dist += (s.positions.row(static_cast<Eigen::Index>(i)) -
                        s.positions.row(static_cast<Eigen::Index>(j)))
                           .norm();
        }
      }
    }
    mean_dist /= static_cast<double>(n * (n - 1));
    const double pairs = static_cast<double>(n * (n - 1));
    const double dens = std::clamp(density(g), 0.5 / pairs, 1.0 - 0.5 / pairs);
    s.beta0 = std::log(dens / (1.0 - dens)) + mean_dist;
  }
  s.sender_var = 1.0;
  s.receiver_var = 1.0;
  return s;
}

// ---------------------------------------------------------------- sampler

ChainSampler::ChainSampler(const DirectedGraph& g, const ModelConfig& c, ParameterState init)
    : graph_(g), config_(c), s_(std::move(init)), n_(g.node_count()), y_(g.adjacency()) {
  if (s_.node_count() != n_) throw ShapeError("initial state and graph sizes differ");
  s_.check();
  const auto n = static_cast<Eigen::Index>(n_);
  dist_ = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dist_(i, j) = dist_(j, i) = (s_.positions.row(i) - s_.positions.row(j)).norm();
    }
  }
}

double ChainSampler::position_loglik_delta(NodeId i, const Eigen::RowVectorXd& z) const {
  const auto a = static_cast<Eigen::Index>(i);
  const auto n = static_cast<Eigen::Index>(n_);
  double dl = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == a) continue;
    const double d_old = dist_(a, j);
    const double d_new = (z - s_.positions.row(j)).norm();
    const double base_out = s_.beta0 + s_.sender(a) + s_.receiver(j);
    const double base_in = s_.beta0 + s_.sender(j) + s_.receiver(a);
    const double out_old = base_out - d_old, out_new = base_out - d_new;
    const double in_old = base_in - d_old, in_new = base_in - d_new;
    const std::size_t ij = static_cast<std::size_t>(a * n + j);
    const std::size_t ji = static_cast<std::size_t>(j * n + a);
    dl += (y_[ij] ? out_new - out_old : 0.0) - (softplus(out_new) - softplus(out_old));
    dl += (y_[ji] ? in_new - in_old : 0.0) - (softplus(in_new) - softplus(in_old));
  }
  return dl;
}

double ChainSampler::delta_position(NodeId i, const Eigen::RowVectorXd& z) const {
  const auto a = static_cast<Eigen::Index>(i);
  const int g = s_.memberships[i];
  const double var = s_.mixture.variances(g);
  const double r_new = (z - s_.mixture.means.row(g)).squaredNorm();
  const double r_old = (s_.positions.row(a) - s_.mixture.means.row(g)).squaredNorm();
  return position_loglik_delta(i, z) - 0.5 * (r_new - r_old) / var;
}

double ChainSampler::dyad_delta_row(NodeId i, double shift) const {
  const auto a = static_cast<Eigen::Index>(i);
  const auto n = static_cast<Eigen::Index>(n_);
  double dl = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == a) continue;
    const double eta = s_.beta0 - dist_(a, j) + s_.sender(a) + s_.receiver(j);
    dl += (y_[static_cast<std::size_t>(a * n + j)] ? shift : 0.0) - (softplus(eta + shift) - softplus(eta));
  }
  return dl;
}

double ChainSampler::dyad_delta_col(NodeId jj, double shift) const {
  const auto b = static_cast<Eigen::Index>(jj);
  const auto n = static_cast<Eigen::Index>(n_);
  double dl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == b) continue;
    const double eta = s_.beta0 - dist_(i, b) + s_.sender(i) + s_.receiver(b);
    dl += (y_[static_cast<std::size_t>(i * n + b)] ? shift : 0.0) - (softplus(eta + shift) - softplus(eta));
  }
  return dl;
}

double ChainSampler::delta_sender(NodeId i, double value) const {
  const double old = s_.sender(static_cast<Eigen::Index>(i));
  return dyad_delta_row(i, value - old) + log_normal(value, 0.0, s_.sender_var) -
         log_normal(old, 0.0, s_.sender_var);
}

double ChainSampler::delta_receiver(NodeId j, double value) const {
  const double old = s_.receiver(static_cast<Eigen::Index>(j));
  return dyad_delta_col(j, value - old) + log_normal(value, 0.0, s_.receiver_var) -
         log_normal(old, 0.0, s_.receiver_var);
}

double ChainSampler::delta_beta0(double value) const {
  const double shift = value - s_.beta0;
  const auto n = static_cast<Eigen::Index>(n_);
  double dl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double eta = s_.beta0 - dist_(i, j) + s_.sender(i) + s_.receiver(j);
      row += (y_[static_cast<std::size_t>(i * n + j)] ? shift : 0.0) - (softplus(eta + shift) - softplus(eta));
    }
    dl += row;
  }
  return dl + log_normal(value, config_.beta0_prior_mean, config_.beta0_prior_var) -
         log_normal(s_.beta0, config_.beta0_prior_mean, config_.beta0_prior_var);
}

void ChainSampler::set_position(NodeId i, const Eigen::RowVectorXd& z) {
  const auto a = static_cast<Eigen::Index>(i);
  s_.positions.row(a) = z;
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n_); ++j) {
    if (j != a) dist_(a, j) = dist_(j, a) = (z - s_.positions.row(j)).norm();
  }
}

void ChainSampler::gibbs_effect_shift(std::mt19937_64& rng, bool sender) {
  // beta0 + c and effects - c leave every logit unchanged; the conditional of c
  // along that line is Gaussian.
  Eigen::VectorXd& effects = sender ? s_.sender : s_.receiver;
  const double var = sender ? s_.sender_var : s_.receiver_var;
  const double n = static_cast<double>(n_);
  const double precision = 1.0 / config_.beta0_prior_var + n / var;
  const double mean =
      ((config_.beta0_prior_mean - s_.beta0) / config_.beta0_prior_var + effects.sum() / var) /
      precision;
  std::normal_distribution<double> normal(0.0, 1.0);
  const double c = mean + normal(rng) / std::sqrt(precision);
  s_.beta0 += c;
  effects.array() -= c;
}

void ChainSampler::gibbs_mixture(std::mt19937_64& rng) {
  const int k = s_.clusters();
  const int d = s_.dimensions();
  const auto n = static_cast<Eigen::Index>(n_);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // memberships
  std::vector<double> logp(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int g = 0; g < k; ++g) {
      const double var = s_.mixture.variances(g);
      const double w = s_.mixture.weights(g);
      const double lp = w > 0.0 ? std::log(w) - 0.5 * d * std::log(var) -
                                      0.5 * (s_.positions.row(i) - s_.mixture.means.row(g)).squaredNorm() / var
                                : -std::numeric_limits<double>::infinity();
      logp[static_cast<std::size_t>(g)] = lp;
      mx = std::max(mx, lp);
    }
    double total = 0.0;
    for (auto& v : logp) {
      v = std::exp(v - mx);
      total += v;
    }
    double u = unif(rng) * total;
    int chosen = k - 1;
    for (int g = 0; g < k; ++g) {
      u -= logp[static_cast<std::size_t>(g)];
      if (u <= 0.0) {
        chosen = g;
        break;
      }
    }
    s_.memberships[static_cast<std::size_t>(i)] = chosen;
  }

  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int m : s_.memberships) ++counts[static_cast<std::size_t>(m)];

  // weights
  if (k > 1) {
    Eigen::VectorXd w(k);
    for (int g = 0; g < k; ++g) {
      std::gamma_distribution<double> gamma(config_.dirichlet_concentration + counts[static_cast<std::size_t>(g)], 1.0);
      w(g) = gamma(rng);
    }
    w /= w.sum();
    // Renormalise once more so the sum is within rounding of 1.
    w /= w.sum();
    s_.mixture.weights = w;
  }

  // component means, then variances
  const double inv_scale = 1.0 / config_.mean_prior_scale;
  for (int g = 0; g < k; ++g) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (s_.memberships[static_cast<std::size_t>(i)] == g) sum += s_.positions.row(i);
    }
    const double denom = counts[static_cast<std::size_t>(g)] + inv_scale;
    const double sd = std::sqrt(s_.mixture.variances(g) / denom);
    for (int t = 0; t < d; ++t) s_.mixture.means(g, t) = sum(t) / denom + sd * normal(rng);

    double ss = s_.mixture.means.row(g).squaredNorm() * inv_scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (s_.memberships[static_cast<std::size_t>(i)] == g) {
        ss += (s_.positions.row(i) - s_.mixture.means.row(g)).squaredNorm();
      }
    }
    s_.mixture.variances(g) =
        draw_inv_gamma(rng, config_.cluster_var_shape + 0.5 * d * (counts[static_cast<std::size_t>(g)] + 1),
                       config_.cluster_var_scale + 0.5 * ss);
  }

  const double nn = static_cast<double>(n_);
  s_.sender_var = draw_inv_gamma(rng, config_.sender_var_shape + 0.5 * nn,
                                 config_.sender_var_scale + 0.5 * s_.sender.squaredNorm());
  s_.receiver_var = draw_inv_gamma(rng, config_.receiver_var_shape + 0.5 * nn,
                                   config_.receiver_var_scale + 0.5 * s_.receiver.squaredNorm());
}

void ChainSampler::sweep(std::mt19937_64& rng, const std::array<double, 4>& scales,
                         BlockCounts& counts) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto accept = [&](double log_ratio) { return log_ratio >= 0.0 || std::log(unif(rng)) < log_ratio; };
  const int d = s_.dimensions();
  constexpr auto kPos = static_cast<std::size_t>(Block::Position);
  constexpr auto kBeta = static_cast<std::size_t>(Block::Beta0);
  constexpr auto kSend = static_cast<std::size_t>(Block::Sender);
  constexpr auto kRecv = static_cast<std::size_t>(Block::Receiver);

  Eigen::RowVectorXd z(d);
  for (NodeId i = 0; i < n_; ++i) {
    for (int t = 0; t < d; ++t) {
      z(t) = s_.positions(static_cast<Eigen::Index>(i), t) + scales[kPos] * normal(rng);
    }
    ++counts.proposed[kPos];
    if (accept(delta_position(i, z))) {
      set_position(i, z);
      ++counts.accepted[kPos];
    }
  }
  for (NodeId i = 0; i < n_; ++i) {
    const double v = s_.sender(static_cast<Eigen::Index>(i)) + scales[kSend] * normal(rng);
    ++counts.proposed[kSend];
    if (accept(delta_sender(i, v))) {
      s_.sender(static_cast<Eigen::Index>(i)) = v;
      ++counts.accepted[kSend];
    }
  }
  for (NodeId j = 0; j < n_; ++j) {
    const double v = s_.receiver(static_cast<Eigen::Index>(j)) + scales[kRecv] * normal(rng);
    ++counts.proposed[kRecv];
    if (accept(delta_receiver(j, v))) {
      s_.receiver(static_cast<Eigen::Index>(j)) = v;
      ++counts.accepted[kRecv];
    }
  }
  {
    const double v = s_.beta0 + scales[kBeta] * normal(rng);
    ++counts.proposed[kBeta];
    if (accept(delta_beta0(v))) {
      s_.beta0 = v;
      ++counts.accepted[kBeta];
    }
  }
  gibbs_effect_shift(rng, true);
  gibbs_effect_shift(rng, false);
  gibbs_mixture(rng);
}

double ChainSampler::log_likelihood() const { return lsm::log_likelihood(s_, y_); }

double ChainSampler::log_posterior() const {
  const double prior = log_prior(s_, config_);
  if (!std::isfinite(prior)) return prior;
  return log_likelihood() + prior;
}

ChainResult run_chain(const DirectedGraph& g, const ModelConfig& c, const McmcConfig& m,
                      const ParameterState& init) {
  c.validate();
  m.validate();
  ChainSampler sampler(g, c, init);
  const double lp0 = sampler.log_posterior();
  if (!std::isfinite(lp0)) throw InitializationError("log posterior at the initial state is not finite");

  ChainResult result;
  std::array<double, 4> scales = {m.position_proposal_sd, m.beta0_proposal_sd,
                                  m.sender_proposal_sd, m.receiver_proposal_sd};
  if (m.iterations == 0) {
    result.final_scales = scales;
    return result;
  }
  result.draws.reserve(static_cast<std::size_t>(m.draws_per_chain()));
  std::mt19937_64 rng(m.seed);
  BlockCounts window;
  int window_index = 0;
  for (int it = 0; it < m.iterations; ++it) {
    const bool burning = it < m.burn_in;
    BlockCounts& counts = burning ? window : result.post_burn_in;
    sampler.sweep(rng, scales, counts);

    if (burning && (it + 1) % m.adapt_window == 0) {
      const double gain = 1.0 / std::sqrt(static_cast<double>(window_index) + 1.0);
      for (std::size_t b = 0; b < 4; ++b) {
        if (window.proposed[b] == 0) continue;
        const double rate = static_cast<double>(window.accepted[b]) / static_cast<double>(window.proposed[b]);
        scales[b] *= std::exp(gain * (rate - kTargetAcceptance[b]));
      }
      window = BlockCounts{};
      ++window_index;
    }
    if (!burning && (it - m.burn_in + 1) % m.thinning == 0) {
      Draw draw;
      draw.state = sampler.state();
      draw.log_likelihood = sampler.log_likelihood();
      draw.log_posterior = draw.log_likelihood + log_prior(draw.state, c);
      result.draws.push_back(std::move(draw));
    }
  }
  result.final_scales = scales;
  return result;
}

// ---------------------------------------------------------------- post-processing

Alignment align_draws(const std::vector<ParameterState>& draws, const Eigen::MatrixXd& reference) {
  Alignment out;
  out.states = draws;
  out.skipped.assign(draws.size(), false);
  const Eigen::RowVectorXd ref_mean = reference.colwise().mean();
  const Eigen::MatrixXd ref_c = reference.rowwise() - ref_mean;
  const bool ref_degenerate = ref_c.norm() < 1e-12;
  for (std::size_t k = 0; k < draws.size(); ++k) {
    auto& s = out.states[k];
    if (s.positions.rows() != reference.rows() || s.positions.cols() != reference.cols()) {
      throw ShapeError("draw and reference positions differ in shape");
    }
    const Eigen::RowVectorXd mean = s.positions.colwise().mean();
    const Eigen::MatrixXd centred = s.positions.rowwise() - mean;
    if (ref_degenerate || centred.norm() < 1e-12) {
      out.skipped[k] = true;
      continue;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centred.transpose() * ref_c,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXd rotation = svd.matrixU() * svd.matrixV().transpose();
    s.positions = (centred * rotation).rowwise() + ref_mean;
    s.mixture.means = ((s.mixture.means.rowwise() - mean) * rotation).rowwise() + ref_mean;
  }
  return out;
}

std::vector<int> best_permutation(const std::vector<int>& labels, const std::vector<int>& reference,
                                  int k) {
  if (k > 10) throw DomainError("exhaustive relabelling supports at most 10 components");
  if (labels.size() != reference.size()) throw ShapeError("partition sizes differ");
  // agreement(old, new) = #{i : labels_i == old, reference_i == new}
  std::vector<long> agreement(static_cast<std::size_t>(k * k), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++agreement[static_cast<std::size_t>(labels[i] * k + reference[i])];
  }
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  long best_score = -1;
  do {
    long score = 0;
    for (int g = 0; g < k; ++g) score += agreement[static_cast<std::size_t>(g * k + perm[static_cast<std::size_t>(g)])];
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

ParameterState permute_components(const ParameterState& s, const std::vector<int>& perm) {
  ParameterState out = s;
  for (auto& m : out.memberships) m = perm[static_cast<std::size_t>(m)];
  for (std::size_t g = 0; g < perm.size(); ++g) {
    const auto to = perm[g];
    out.mixture.weights(to) = s.mixture.weights(static_cast<Eigen::Index>(g));
    out.mixture.variances(to) = s.mixture.variances(static_cast<Eigen::Index>(g));
    out.mixture.means.row(to) = s.mixture.means.row(static_cast<Eigen::Index>(g));
  }
  return out;
}

namespace {

// Lexicographic order on the relabelled state: memberships, then weights,
// variances and means. Depends only on the relabelled result, never on the
// incoming label order.
bool relabelled_less(const ParameterState& a, const ParameterState& b) {
  if (a.memberships != b.memberships) return a.memberships < b.memberships;
  auto less_seq = [](const auto& x, const auto& y) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (x(i) != y(i)) return std::optional<bool>(x(i) < y(i));
    }
    return std::optional<bool>();
  };
  if (auto r = less_seq(a.mixture.weights, b.mixture.weights)) return *r;
  if (auto r = less_seq(a.mixture.variances, b.mixture.variances)) return *r;
  if (auto r = less_seq(a.mixture.means.reshaped(), b.mixture.means.reshaped())) return *r;
  return false;
}

// Maximum-agreement permutation; ties (e.g. empty components) resolved by
// relabelled_less so the outcome is invariant to a relabelling of the input.
ParameterState relabel_one(const ParameterState& s, const std::vector<int>& reference) {
  const int k = s.clusters();
  if (k > 10) throw DomainError("exhaustive relabelling supports at most 10 components");
  if (s.memberships.size() != reference.size()) throw ShapeError("partition sizes differ");
  std::vector<long> agreement(static_cast<std::size_t>(k * k), 0);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    ++agreement[static_cast<std::size_t>(s.memberships[i] * k + reference[i])];
  }
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  long best_score = -1;
  std::optional<ParameterState> best;
  do {
    long score = 0;
    for (int g = 0; g < k; ++g) score += agreement[static_cast<std::size_t>(g * k + perm[static_cast<std::size_t>(g)])];
    if (score < best_score) continue;
    ParameterState candidate = permute_components(s, perm);
    if (score > best_score || relabelled_less(candidate, *best)) {
      best_score = score;
      best = std::move(candidate);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::move(*best);
}

}  // namespace

std::vector<ParameterState> relabel_components(const std::vector<ParameterState>& draws,
                                               const std::vector<int>& reference) {
  std::vector<ParameterState> out;
  out.reserve(draws.size());
  for (const auto& s : draws) out.push_back(relabel_one(s, reference));
  return out;
}

std::vector<int> canonical_partition(const std::vector<int>& labels, int k) {
  std::vector<int> map(static_cast<std::size_t>(k), -1);
  int next = 0;
  for (int l : labels) {
    if (map[static_cast<std::size_t>(l)] < 0) map[static_cast<std::size_t>(l)] = next++;
  }
  for (auto& m : map) {
    if (m < 0) m = next++;
  }
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = map[static_cast<std::size_t>(labels[i])];
  return out;
}

std::vector<int> PosteriorSummary::map_memberships() const {
  std::vector<int> out(static_cast<std::size_t>(membership_probs.rows()));
  for (Eigen::Index i = 0; i < membership_probs.rows(); ++i) {
    Eigen::Index arg = 0;
    membership_probs.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

namespace {

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

PosteriorSummary summarize(const std::vector<ParameterState>& aligned) {
  if (aligned.empty()) throw DomainError("summarize: no draws");
  const auto& first = aligned.front();
  const auto n = static_cast<Eigen::Index>(first.node_count());
  const int d = first.dimensions();
  const int k = first.clusters();
  PosteriorSummary s;
  s.clusters = k;
  s.dimensions = d;
  s.point_positions = Eigen::MatrixXd::Zero(n, d);
  s.membership_probs = Eigen::MatrixXd::Zero(n, k);
  s.sender_mean = Eigen::VectorXd::Zero(n);
  s.receiver_mean = Eigen::VectorXd::Zero(n);
  s.weights_mean = Eigen::VectorXd::Zero(k);
  s.component_means = Eigen::MatrixXd::Zero(k, d);
  std::vector<double> beta0;
  beta0.reserve(aligned.size());
  for (const auto& st : aligned) {
    if (static_cast<Eigen::Index>(st.node_count()) != n || st.dimensions() != d || st.clusters() != k) {
      throw ShapeError("draws differ in shape");
    }
    s.point_positions += st.positions;
    for (Eigen::Index i = 0; i < n; ++i) s.membership_probs(i, st.memberships[static_cast<std::size_t>(i)]) += 1.0;
    s.sender_mean += st.sender;
    s.receiver_mean += st.receiver;
    s.weights_mean += st.mixture.weights;
    s.component_means += st.mixture.means;
    beta0.push_back(st.beta0);
  }
  const double count = static_cast<double>(aligned.size());
  s.point_positions /= count;
  s.membership_probs /= count;
  s.sender_mean /= count;
  s.receiver_mean /= count;
  s.weights_mean /= count;
  s.component_means /= count;
  s.beta0_mean = std::accumulate(beta0.begin(), beta0.end(), 0.0) / count;
  s.beta0_interval = {quantile(beta0, 0.025), quantile(beta0, 0.975)};
  s.draw_count = aligned.size();
  return s;
}

namespace {

nlohmann::json rows_json(const Eigen::MatrixXd& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    out.push_back(row);
  }
  return out;
}

Eigen::MatrixXd rows_from(const nlohmann::json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto row = j[r].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ShapeError("ragged matrix in summary");
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd vec_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json bic_json(const BicResult& b) {
  return {{"convention", "smaller is better"},
          {"total", b.total},
          {"logit_loglik", b.logit_loglik},
          {"logit_parameters", b.logit_parameters},
          {"logit_term", b.logit_term},
          {"mixture_loglik", b.mixture_loglik},
          {"mixture_parameters", b.mixture_parameters},
          {"mixture_term", b.mixture_term}};
}

}  // namespace

nlohmann::json to_json(const PosteriorSummary& s) {
  nlohmann::json acceptance;
  for (std::size_t b = 0; b < 4; ++b) acceptance[kBlockNames[b]] = s.acceptance[b];
  std::vector<int> map = s.map_memberships();
  for (auto& m : map) ++m;
  nlohmann::json j = {
      {"schema_version", 1},
      {"labels", s.labels},
      {"clusters", s.clusters},
      {"dimensions", s.dimensions},
      {"draw_count", s.draw_count},
      {"point_positions", rows_json(s.point_positions)},
      {"membership_probs", rows_json(s.membership_probs)},
      {"map_memberships", map},
      {"beta0_mean", s.beta0_mean},
      {"beta0_interval", {s.beta0_interval[0], s.beta0_interval[1]}},
      {"sender_mean", vec(s.sender_mean)},
      {"receiver_mean", vec(s.receiver_mean)},
      {"weights_mean", vec(s.weights_mean)},
      {"component_means", rows_json(s.component_means)},
      {"acceptance_rates", acceptance},
  };
  j["bic"] = s.bic ? bic_json(*s.bic) : nlohmann::json(nullptr);
  return j;
}

PosteriorSummary summary_from_json(const nlohmann::json& j) {
  PosteriorSummary s;
  s.labels = j.at("labels").get<std::vector<std::string>>();
  s.clusters = j.at("clusters").get<int>();
  s.dimensions = j.at("dimensions").get<int>();
  s.draw_count = j.at("draw_count").get<std::size_t>();
  s.point_positions = rows_from(j.at("point_positions"), s.dimensions);
  s.membership_probs = rows_from(j.at("membership_probs"), s.clusters);
  s.beta0_mean = j.at("beta0_mean").get<double>();
  const auto ci = j.at("beta0_interval").get<std::vector<double>>();
  s.beta0_interval = {ci.at(0), ci.at(1)};
  s.sender_mean = vec_from(j.at("sender_mean"));
  s.receiver_mean = vec_from(j.at("receiver_mean"));
  s.weights_mean = vec_from(j.at("weights_mean"));
  s.component_means = rows_from(j.at("component_means"), s.dimensions);
  for (std::size_t b = 0; b < 4; ++b) s.acceptance[b] = j.at("acceptance_rates").at(kBlockNames[b]).get<double>();
  if (!j.at("bic").is_null()) {
    const auto& b = j["bic"];
    BicResult r;
    r.total = b.at("total").get<double>();
    r.logit_loglik = b.at("logit_loglik").get<double>();
    r.logit_parameters = b.at("logit_parameters").get<int>();
    r.logit_term = b.at("logit_term").get<double>();
    r.mixture_loglik = b.at("mixture_loglik").get<double>();
    r.mixture_parameters = b.at("mixture_parameters").get<int>();
    r.mixture_term = b.at("mixture_term").get<double>();
    s.bic = r;
  }
  return s;
}

// ---------------------------------------------------------------- BIC

BicResult bic_for(const DirectedGraph& g, const PosteriorSummary& s, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(g.node_count());
  if (s.point_positions.rows() != n) throw ShapeError("summary and graph sizes differ");
  const auto y = g.adjacency();

  // Offsets eta_ij - beta0 at the point estimates; beta0 is then maximised by
  // Newton's method (the log-likelihood is concave in it).
  std::vector<double> offset;
  std::vector<unsigned char> edge;
  offset.reserve(static_cast<std::size_t>(n * (n - 1)));
  double edges = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      offset.push_back(-(s.point_positions.row(i) - s.point_positions.row(j)).norm() +
                       s.sender_mean(i) + s.receiver_mean(j));
      edge.push_back(y[static_cast<std::size_t>(i * n + j)]);
      edges += edge.back();
    }
  }
  auto loglik = [&](double b0) {
    double total = 0.0;
    for (std::size_t t = 0; t < offset.size(); ++t) {
      const double eta = b0 + offset[t];
      total += (edge[t] ? eta : 0.0) - softplus(eta);
    }
    return total;
  };
  double b0 = s.beta0_mean;
  if (edges > 0.0 && edges < static_cast<double>(offset.size())) {
    for (int it = 0; it < 100; ++it) {
      double grad = edges, hess = 0.0;
      for (double o : offset) {
        const double p = logistic(b0 + o);
        grad -= p;
        hess -= p * (1.0 - p);
      }
      if (hess >= 0.0) break;
      const double step = grad / hess;
      b0 -= step;
      if (std::abs(step) < 1e-12) break;
    }
  }

  BicResult r;
  r.logit_loglik = loglik(b0);
  r.logit_parameters = 1;
  r.logit_term = -2.0 * r.logit_loglik +
                 r.logit_parameters * std::log(static_cast<double>(offset.empty() ? 1 : offset.size()));

  const auto mix = fit_spherical_mixture(s.point_positions, s.clusters, seed,
                                         {s.map_memberships()});
  r.mixture_loglik = mix.log_likelihood;
  r.mixture_parameters = spherical_mixture_parameter_count(s.clusters, s.dimensions);
  r.mixture_term = -2.0 * r.mixture_loglik + r.mixture_parameters * std::log(static_cast<double>(n));
  r.total = r.logit_term + r.mixture_term;
  return r;
}

// ---------------------------------------------------------------- fitting

FitResult fit(const DirectedGraph& g, const ModelConfig& c, const McmcConfig& m, int threads) {
  c.validate();
  m.validate();
  if (g.node_count() < static_cast<std::size_t>(c.clusters)) {
    throw DomainError("fit: " + std::to_string(g.node_count()) + " nodes < " +
                      std::to_string(c.clusters) + " clusters");
  }
  FitResult result;
  result.initial = initialize(g, c, derive_seed(m.seed, "init"));

  const auto chain_count = static_cast<std::size_t>(m.chains);
  result.chains.resize(chain_count);
  std::vector<std::exception_ptr> errors(chain_count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < chain_count; k = next++) {
      try {
        McmcConfig chain_cfg = m;
        chain_cfg.seed = derive_seed(m.seed, "chain", k);
        result.chains[k] = run_chain(g, c, chain_cfg, result.initial);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const auto workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, chain_count);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Reference: highest log posterior across all chains, earliest on ties.
  const ParameterState* reference = nullptr;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<ParameterState> all;
  for (const auto& chain : result.chains) {
    for (const auto& d : chain.draws) {
      if (!reference || d.log_posterior > best) {
        best = d.log_posterior;
        reference = &d.state;
      }
      all.push_back(d.state);
    }
  }
  if (all.empty()) throw DomainError("fit: no draws retained (iterations <= burn_in?)");

  auto aligned = align_draws(all, reference->positions);
  result.alignment_skipped =
      static_cast<std::size_t>(std::count(aligned.skipped.begin(), aligned.skipped.end(), true));
  const auto ref_partition = canonical_partition(reference->memberships, c.clusters);
  result.processed = relabel_components(aligned.states, ref_partition);
  result.summary = summarize(result.processed);
  result.summary.labels = g.labels();

  BlockCounts merged;
  for (const auto& chain : result.chains) {
    for (std::size_t b = 0; b < 4; ++b) {
      merged.proposed[b] += chain.post_burn_in.proposed[b];
      merged.accepted[b] += chain.post_burn_in.accepted[b];
    }
  }
  for (std::size_t b = 0; b < 4; ++b) result.summary.acceptance[b] = merged.rate(static_cast<Block>(b));
  result.summary.bic = bic_for(g, result.summary, derive_seed(m.seed, "bic"));
  return result;
}

Selection select_k(const DirectedGraph& g, const ModelConfig& base, const std::vector<int>& k_range,
                   const McmcConfig& m, int threads) {
  if (k_range.empty()) throw DomainError("select_k: empty K range");
  Selection sel;
  for (int k : k_range) {
    ModelConfig c = base;
    c.clusters = k;
    try {
      auto result = fit(g, c, m, threads);
      sel.table.push_back({k, *result.summary.bic});
      sel.summaries.push_back(std::move(result.summary));
    } catch (const std::exception& e) {
      throw std::runtime_error("K=" + std::to_string(k) + ": " + e.what());
    }
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < sel.table.size(); ++r) {
    const auto& row = sel.table[r];
    const auto& cur = sel.table[best];
    if (row.bic.total < cur.bic.total || (row.bic.total == cur.bic.total && row.clusters < cur.clusters)) {
      best = r;
    }
  }
  sel.best_k = sel.table[best].clusters;
  return sel;
}

}  // namespace lsm
