#include "lsm/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "lsm/csv.hpp"
#include "lsm/errors.hpp"

namespace lsm {

Labeling labeling_from(const PosteriorSummary& s) {
  if (s.labels.size() != static_cast<std::size_t>(s.membership_probs.rows())) {
    throw ShapeError("summary labels and membership rows differ");
  }
  Labeling l;
  l.clusters = s.clusters;
  const auto map = s.map_memberships();
  for (std::size_t i = 0; i < map.size(); ++i) l.components[s.labels[i]] = map[i];
  return l;
}

Labeling parse_labeling_csv(std::string_view text, int clusters) {
  const auto table = csv::parse(text);
  csv::require_header(table, {"label", "component"});
  Labeling l;
  int largest = 0;
  for (const auto& row : table.rows) {
    const auto& label = row.fields[0];
    int c = 0;
    try {
      std::size_t used = 0;
      c = std::stoi(row.fields[1], &used);
      if (used != row.fields[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("component is not an integer: '" + row.fields[1] + "'", row.line);
    }
    if (c < 1) throw ParseError("component must be >= 1", row.line);
    if (clusters > 0 && c > clusters) throw ParseError("component exceeds K", row.line);
    if (!l.components.emplace(label, c - 1).second) throw ParseError("duplicate label '" + label + "'", row.line);
    largest = std::max(largest, c);
  }
  l.clusters = clusters > 0 ? clusters : largest;
  return l;
}

Labeling read_labeling_csv(const std::string& path, int clusters) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_labeling_csv(text, clusters);
}

void write_labeling_csv(const Labeling& l, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  csv::write_row(out, {"label", "component"});
  for (const auto& [label, c] : l.components) csv::write_row(out, {label, std::to_string(c + 1)});
}

ConfusionMatrix confusion_matrix(const Labeling& a, const Labeling& b) {
  if (a.clusters != b.clusters) throw DomainError("labelings have different numbers of components");
  const int k = a.clusters;
  if (k < 1) throw DomainError("labelings have no components");
  if (k > 10) throw DomainError("confusion matrix supports at most 10 components");

  // raw(rb, ca): nodes with b-component rb and a-component ca
  std::vector<std::size_t> raw(static_cast<std::size_t>(k * k), 0);
  std::size_t common = 0;
  for (const auto& [label, ca] : a.components) {
    const auto it = b.components.find(label);
    if (it == b.components.end()) continue;
    const int cb = it->second;
    if (ca < 0 || ca >= k || cb < 0 || cb >= k) throw DomainError("component index out of range for '" + label + "'");
    ++raw[static_cast<std::size_t>(cb * k + ca)];
    ++common;
  }
  if (common == 0) throw DomainError("labelings share no nodes");

  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  std::size_t best_diag = 0;
  bool first = true;
  do {
    std::size_t diag = 0;
    for (int g = 0; g < k; ++g) diag += raw[static_cast<std::size_t>(g * k + perm[static_cast<std::size_t>(g)])];
    if (first || diag > best_diag) {
      best_diag = diag;
      best = perm;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  ConfusionMatrix m;
  m.permutation = best;
  m.common_node_count = common;
  m.counts.assign(static_cast<std::size_t>(k), std::vector<std::size_t>(static_cast<std::size_t>(k), 0));
  m.fractions = Eigen::MatrixXd::Zero(k, k);
  for (int rb = 0; rb < k; ++rb) {
    const auto r = static_cast<std::size_t>(best[static_cast<std::size_t>(rb)]);
    for (int ca = 0; ca < k; ++ca) m.counts[r][static_cast<std::size_t>(ca)] = raw[static_cast<std::size_t>(rb * k + ca)];
  }
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) {
      m.fractions(r, c) = static_cast<double>(m.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) /
                          static_cast<double>(common);
    }
  }
  return m;
}

void write_confusion_csv(const ConfusionMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  csv::write_row(out, {"b_component", "a_component", "count", "fraction", "common_nodes"});
  const auto k = m.counts.size();
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", m.fractions(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      csv::write_row(out, {std::to_string(r + 1), std::to_string(c + 1), std::to_string(m.counts[r][c]), buf,
                           std::to_string(m.common_node_count)});
    }
  }
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ShapeError("partitions differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < n; ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [_, v] : joint) sum_joint += choose2(v);
  for (const auto& [_, v] : ra) sum_a += choose2(v);
  for (const auto& [_, v] : rb) sum_b += choose2(v);
  const double total = choose2(static_cast<double>(n));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both trivial partitions
  return (sum_joint - expected) / (max_index - expected);
}

nlohmann::json to_json(const NetworkStats& s) {
  return {{"elite_users", s.elite_users},
          {"qualifying_tweets", s.qualifying_tweets},
          {"nodes_before_isolates", s.nodes_before_isolates},
          {"isolates_removed", s.isolates_removed},
          {"nodes", s.nodes},
          {"edges", s.edges},
          {"density", s.density}};
}

ElitesNetwork elite_network(const std::vector<TweetRecord>& records, const DirectedGraph& follows,
                            const EliteCriterion& criterion) {
  ElitesNetwork out;
  out.selection = select_elites(records, criterion);
  const auto induced = follows.induced(out.selection.authors);
  auto cleaned = remove_isolates(induced);
  out.graph = std::move(cleaned.graph);
  out.isolates = std::move(cleaned.removed);
  out.stats.elite_users = out.selection.authors.size();
  out.stats.qualifying_tweets = out.selection.qualifying_tweets.size();
  out.stats.nodes_before_isolates = induced.node_count();
  out.stats.isolates_removed = out.isolates.size();
  out.stats.nodes = out.graph.node_count();
  out.stats.edges = out.graph.edge_count();
  out.stats.density = out.graph.node_count() >= 2 ? density(out.graph) : 0.0;
  return out;
}

std::vector<SweepResult> robustness_sweep(
    const std::vector<TweetRecord>& records, const DirectedGraph& follows,
    const std::vector<std::pair<std::string, EliteCriterion>>& criteria, const SweepOptions& options) {
  const auto base_it = std::find_if(criteria.begin(), criteria.end(),
                                    [&](const auto& c) { return c.first == options.baseline; });
  if (base_it == criteria.end()) throw DomainError("baseline criterion '" + options.baseline + "' not in the sweep");
  const auto base_index = static_cast<std::size_t>(base_it - criteria.begin());

  std::vector<SweepResult> results(criteria.size());
  std::vector<std::exception_ptr> errors(criteria.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < criteria.size(); i = next++) {
      auto& r = results[i];
      r.id = criteria[i].first;
      r.criterion = criteria[i].second;
      try {
        validate(r.criterion);
        r.network = elite_network(records, follows, r.criterion);
        if (const auto p = options.provided.find(r.id); p != options.provided.end()) {
          r.labeling = p->second;
        } else if (options.fit) {
          r.summary = fit(r.network.graph, options.model, options.mcmc, 1).summary;
          r.labeling = labeling_from(*r.summary);
        }
      } catch (const std::exception& e) {
        errors[i] = std::make_exception_ptr(std::runtime_error("criterion " + r.id + ": " + e.what()));
      }
    }
  };
  const auto workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options.threads, 1)), 1,
                                               std::max<std::size_t>(criteria.size(), 1));
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

  const auto& base = results[base_index];
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& r = results[i];
    std::vector<std::string> shared;
    std::set_intersection(r.network.selection.authors.begin(), r.network.selection.authors.end(),
                          base.network.selection.authors.begin(), base.network.selection.authors.end(),
                          std::back_inserter(shared));
    r.overlap_with_baseline = shared.size();
    if (i == base_index || !r.labeling || !base.labeling) continue;
    try {
      r.confusion = confusion_matrix(*base.labeling, *r.labeling);
    } catch (const std::exception& e) {
      throw std::runtime_error("criterion " + r.id + ": " + e.what());
    }
  }
  return results;
}

}  // namespace lsm
