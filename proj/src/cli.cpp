#include "lsm/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "lsm/analysis.hpp"
#include "lsm/csv.hpp"
#include "lsm/elites.hpp"
#include "lsm/errors.hpp"
#include "lsm/graph.hpp"
#include "lsm/seeds.hpp"
#include "lsm/text.hpp"
#include "lsm/viz.hpp"

namespace fs = std::filesystem;

namespace lsm::cli {

// ---------------------------------------------------------------- digests

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xF];
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

FileDigest digest(const fs::path& path, const fs::path& relative_to) {
  FileDigest d;
  d.path = relative_to.empty() ? path.string() : fs::relative(path, relative_to).generic_string();
  d.sha256 = sha256_file(path);
  d.bytes = fs::file_size(path);
  return d;
}

namespace {

nlohmann::json digest_json(const FileDigest& d) {
  return {{"path", d.path}, {"sha256", d.sha256}, {"bytes", d.bytes}};
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json inputs = nlohmann::json::array(), outputs = nlohmann::json::array();
  for (const auto& d : m.inputs) inputs.push_back(digest_json(d));
  for (const auto& d : m.outputs) outputs.push_back(digest_json(d));
  return {{"tool", "lsm"},
          {"tool_version", m.tool_version},
          {"command", m.command},
          {"arguments", m.arguments},
          {"inputs", inputs},
          {"config", m.config},
          {"seed", m.seed},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at},
          {"outputs", outputs}};
}

std::vector<FileDigest> digest_outputs(const fs::path& dir) {
  std::vector<FileDigest> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().parent_path() == dir && entry.path().filename() == "manifest.json") continue;
    out.push_back(digest(entry.path(), dir));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return out;
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (dir.empty()) throw DomainError("output directory must not be empty");
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw DomainError("output path exists and is not a directory: " + dir.string());
    if (!fs::is_empty(dir)) {
      if (!force) {
        throw DomainError("output directory " + dir.string() + " is not empty (use --force to overwrite)");
      }
      const auto canon = fs::weakly_canonical(dir);
      if (canon == canon.root_path() || canon == fs::weakly_canonical(fs::current_path())) {
        throw DomainError("refusing to clear " + canon.string());
      }
      for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path());
    }
  }
  fs::create_directories(dir);
}

// ---------------------------------------------------------------- configs

FitSettings fit_settings_from_json(const nlohmann::json& j, std::vector<std::string>& problems) {
  FitSettings s;
  if (!j.is_object()) {
    problems.push_back("config: expected a JSON object");
    return s;
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "model" && key != "mcmc") problems.push_back(key + ": unknown section");
  }
  if (j.contains("model")) s.model = model_config_from_json(j["model"], problems);
  if (j.contains("mcmc")) s.mcmc = mcmc_config_from_json(j["mcmc"], problems);
  return s;
}

nlohmann::json to_json(const FitSettings& s) { return {{"model", to_json(s.model)}, {"mcmc", to_json(s.mcmc)}}; }

namespace {

// ---------------------------------------------------------------- helpers

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool force = false;
  int threads = 1;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> arguments;
};

void write_text(const fs::path& path, std::string_view text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError({path.string() + ": " + e.what()});
  }
}

std::string fixed(double v, int decimals = 6) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(decimals) << v;
  return s.str();
}

std::string exact(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

class Run {
 public:
  Run(const Context& ctx, const Globals& g, std::string command)
      : ctx_(ctx), dir_(g.out_dir), force_(g.force) {
    manifest_.command = std::move(command);
    manifest_.arguments = ctx.arguments;
    manifest_.started_at = utc_now();
  }

  void add_input(const fs::path& p) { manifest_.inputs.push_back(digest(p)); }
  void set_config(nlohmann::json c) { manifest_.config = std::move(c); }
  void set_seed(std::uint64_t s) { manifest_.seed = s; }

  // Call once all validation passed, right before the first output.
  const fs::path& open() {
    prepare_output_dir(dir_, force_);
    return dir_;
  }

  void finish() {
    manifest_.outputs = digest_outputs(dir_);
    manifest_.finished_at = utc_now();
    write_json(dir_ / "manifest.json", to_json(manifest_));
    ctx_.out << "wrote " << dir_.string() << "\n";
  }

 private:
  const Context& ctx_;
  fs::path dir_;
  bool force_;
  RunManifest manifest_;
};

EliteCriterion criterion_from(std::uint64_t min_pop, std::uint64_t min_count, std::optional<std::uint64_t> cumulative) {
  if (cumulative) return CumulativeThreshold{*cumulative};
  if (min_count != 1) return MinCountAtThreshold{min_count, min_pop};
  return SingleTweetThreshold{min_pop};
}

void write_network(const fs::path& dir, const ElitesNetwork& net) {
  write_edge_csv(net.graph, (dir / "network.csv").string());
  std::ofstream iso(dir / "isolates.csv", std::ios::binary);
  csv::write_row(iso, {"label"});
  for (const auto& l : net.isolates) csv::write_row(iso, {l});
}

void write_elites(const fs::path& dir, const std::vector<TweetRecord>& records, const EliteSelection& sel) {
  {
    std::ofstream f(dir / "elites.csv", std::ios::binary);
    csv::write_row(f, {"author"});
    for (const auto& a : sel.authors) csv::write_row(f, {a});
  }
  std::ofstream f(dir / "qualifying_tweets.csv", std::ios::binary);
  csv::write_row(f, {"tweet_id", "author", "score", "created_at"});
  for (const auto& t : filter_by_id(deduplicate(records), sel.qualifying_tweets)) {
    csv::write_row(f, {t.tweet_id, t.author, std::to_string(popularity_score(t)), t.created_at});
  }
}

// Loads a fit config file (optional), applies flag overrides and the seed, and
// returns the settings with every problem collected.
FitSettings resolve_fit_settings(const std::string& config_path, const nlohmann::json& overrides,
                                 std::optional<std::uint64_t> seed, std::vector<std::string>& problems) {
  nlohmann::json j = nlohmann::json::object();
  if (!config_path.empty()) {
    try {
      j = read_json(config_path);
    } catch (const ValidationError& e) {
      for (const auto& p : e.problems()) problems.push_back(p);
      j = nlohmann::json::object();
    }
  }
  if (j.is_object()) {
    for (const auto& [section, values] : overrides.items()) {
      if (!j.contains(section) || !j[section].is_object()) j[section] = nlohmann::json::object();
      for (const auto& [k, v] : values.items()) j[section][k] = v;
    }
    if (seed) {
      if (!j.contains("mcmc") || !j["mcmc"].is_object()) j["mcmc"] = nlohmann::json::object();
      j["mcmc"]["seed"] = *seed;
    }
  }
  return fit_settings_from_json(j, problems);
}

DirectedGraph load_network(const std::string& edges_path, std::vector<std::string>& removed) {
  auto built = read_edge_csv(edges_path);
  auto cleaned = remove_isolates(built.graph);
  removed = std::move(cleaned.removed);
  return std::move(cleaned.graph);
}

void write_summary_files(const fs::path& dir, const PosteriorSummary& s) {
  write_json(dir / "summary.json", to_json(s));
}

void write_bic_table(const fs::path& path, const std::vector<SelectionRow>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  csv::write_row(f, {"clusters", "logit_loglik", "logit_term", "mixture_loglik", "mixture_term",
                     "bic_smaller_is_better"});
  for (const auto& r : rows) {
    csv::write_row(f, {std::to_string(r.clusters), exact(r.bic.logit_loglik), exact(r.bic.logit_term),
                       exact(r.bic.mixture_loglik), exact(r.bic.mixture_term), exact(r.bic.total)});
  }
}

void throw_if(std::vector<std::string>& problems) {
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

// ---------------------------------------------------------------- commands

struct ExtractArgs {
  std::string records;
  std::string edges;
  std::uint64_t min_pop = 2000;
  std::uint64_t min_count = 1;
  std::optional<std::uint64_t> cumulative;
  std::size_t top = 10;
};

int cmd_extract(const Context& ctx, const Globals& g, const ExtractArgs& a) {
  Run run(ctx, g, "extract");
  const auto criterion = criterion_from(a.min_pop, a.min_count, a.cumulative);
  validate(criterion);
  const auto records = read_records_csv(a.records);
  run.add_input(a.records);
  const auto sel = select_elites(records, criterion);
  const auto qualifying = filter_by_id(deduplicate(records), sel.qualifying_tweets);
  const auto months = monthly_counts(qualifying);
  const auto board = author_tweet_leaderboard(qualifying, sel.authors, a.top);

  std::optional<ElitesNetwork> net;
  std::optional<DirectedGraph> follows;
  if (!a.edges.empty()) {
    follows = read_edge_csv(a.edges).graph;
    run.add_input(a.edges);
    net = elite_network(records, *follows, criterion);
  }
  run.set_config({{"criterion", describe(criterion)}, {"top", a.top}});
  run.set_seed(g.seed.value_or(0));

  const auto& dir = run.open();
  write_elites(dir, records, sel);
  {
    std::ofstream f(dir / "monthly_counts.csv", std::ios::binary);
    csv::write_row(f, {"month", "count"});
    for (const auto& [m, c] : months) csv::write_row(f, {m, std::to_string(c)});
  }
  {
    std::ofstream f(dir / "leaderboard.csv", std::ios::binary);
    csv::write_row(f, {"rank", "author", "tweets"});
    for (std::size_t i = 0; i < board.size(); ++i) {
      csv::write_row(f, {std::to_string(i + 1), board[i].first, std::to_string(board[i].second)});
    }
  }
  nlohmann::json summary = {{"criterion", describe(criterion)},
                            {"n_users", sel.authors.size()},
                            {"n_qualifying_tweets", sel.qualifying_tweets.size()}};
  if (!months.empty()) {
    std::size_t lo = months.begin()->second, hi = lo;
    for (const auto& [_, c] : months) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    summary["monthly_min"] = lo;
    summary["monthly_max"] = hi;
    summary["months"] = months.size();
  }
  if (net) {
    write_network(dir, *net);
    write_text(dir / "network.graphml", export_graphml(net->graph));
    summary["network"] = to_json(net->stats);
  }
  write_json(dir / "summary.json", summary);

  ctx.out << "n_users=" << sel.authors.size() << " n_qualifying_tweets=" << sel.qualifying_tweets.size() << "\n";
  if (net) {
    ctx.out << "nodes_before_isolates=" << net->stats.nodes_before_isolates
            << " isolates_removed=" << net->stats.isolates_removed << " nodes=" << net->stats.nodes
            << " edges=" << net->stats.edges << " density=" << fixed(net->stats.density) << "\n";
  }
  if (sel.authors.empty()) ctx.err << "warning: no author meets " << describe(criterion) << "\n";
  run.finish();
  return 0;
}

struct FitArgs {
  std::string edges;
  std::string config;
  std::optional<int> clusters, dimensions, iterations, burn_in, thinning, chains;
};

nlohmann::json fit_overrides(const FitArgs& a) {
  nlohmann::json o = nlohmann::json::object();
  if (a.clusters) o["model"]["clusters"] = *a.clusters;
  if (a.dimensions) o["model"]["dimensions"] = *a.dimensions;
  if (a.iterations) o["mcmc"]["iterations"] = *a.iterations;
  if (a.burn_in) o["mcmc"]["burn_in"] = *a.burn_in;
  if (a.thinning) o["mcmc"]["thinning"] = *a.thinning;
  if (a.chains) o["mcmc"]["chains"] = *a.chains;
  return o;
}

int cmd_fit(const Context& ctx, const Globals& g, const FitArgs& a) {
  Run run(ctx, g, "fit");
  std::vector<std::string> problems;
  const auto settings = resolve_fit_settings(a.config, fit_overrides(a), g.seed, problems);
  std::vector<std::string> isolates;
  const auto graph = load_network(a.edges, isolates);
  if (settings.model.clusters >= 1 && graph.node_count() < static_cast<std::size_t>(settings.model.clusters)) {
    problems.push_back("model.clusters: K=" + std::to_string(settings.model.clusters) + " exceeds the " +
                       std::to_string(graph.node_count()) + " nodes of the network");
  }
  throw_if(problems);
  run.add_input(a.edges);
  if (!a.config.empty()) run.add_input(a.config);
  run.set_config(to_json(settings));
  run.set_seed(settings.mcmc.seed);

  const auto& dir = run.open();
  write_json(dir / "config.json", to_json(settings));
  write_edge_csv(graph, (dir / "network.csv").string());
  {
    std::ofstream iso(dir / "isolates.csv", std::ios::binary);
    csv::write_row(iso, {"label"});
    for (const auto& l : isolates) csv::write_row(iso, {l});
  }
  ctx.out << "fitting K=" << settings.model.clusters << " d=" << settings.model.dimensions << " on "
          << graph.node_count() << " nodes, " << graph.edge_count() << " edges\n";
  const auto result = fit(graph, settings.model, settings.mcmc, g.threads);

  fs::create_directories(dir / "draws");
  for (std::size_t k = 0; k < result.chains.size(); ++k) {
    std::ofstream f(dir / "draws" / ("chain-" + std::to_string(k + 1) + ".jsonl"), std::ios::binary);
    for (const auto& d : result.chains[k].draws) {
      auto j = to_json(d.state);
      j["log_likelihood"] = d.log_likelihood;
      j["log_posterior"] = d.log_posterior;
      f << j.dump() << "\n";
    }
  }
  write_summary_files(dir, result.summary);
  write_bic_table(dir / "bic_table.csv", {{settings.model.clusters, *result.summary.bic}});

  const auto& s = result.summary;
  ctx.out << "draws=" << s.draw_count << " beta0=" << fixed(s.beta0_mean, 4) << " [" << fixed(s.beta0_interval[0], 4)
          << ", " << fixed(s.beta0_interval[1], 4) << "] bic=" << fixed(s.bic->total, 3) << " (smaller is better)\n";
  ctx.out << "acceptance:";
  for (std::size_t b = 0; b < 4; ++b) ctx.out << " " << kBlockNames[b] << "=" << fixed(s.acceptance[b], 3);
  ctx.out << "\n";
  if (result.alignment_skipped) ctx.err << "warning: " << result.alignment_skipped << " degenerate draws left unaligned\n";
  run.finish();
  return 0;
}

std::vector<int> parse_k_range(const std::string& text) {
  std::vector<int> ks;
  std::stringstream ss(text);
  std::string part;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ValidationError({"k-range: cannot parse '" + text + "'"});
    return v;
  };
  while (std::getline(ss, part, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      ks.push_back(to_int(part));
    } else {
      const int lo = to_int(part.substr(0, dots)), hi = to_int(part.substr(dots + 2));
      if (lo > hi) throw ValidationError({"k-range: empty range '" + part + "'"});
      for (int k = lo; k <= hi; ++k) ks.push_back(k);
    }
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.empty()) throw ValidationError({"k-range: no values"});
  return ks;
}

struct SelectArgs {
  FitArgs fit;
  std::string k_range = "1..4";
};

int cmd_select_k(const Context& ctx, const Globals& g, const SelectArgs& a) {
  Run run(ctx, g, "select-k");
  std::vector<std::string> problems;
  std::vector<int> ks;
  try {
    ks = parse_k_range(a.k_range);
  } catch (const ValidationError& e) {
    for (const auto& p : e.problems()) problems.push_back(p);
  }
  const auto settings = resolve_fit_settings(a.fit.config, fit_overrides(a.fit), g.seed, problems);
  std::vector<std::string> isolates;
  const auto graph = load_network(a.fit.edges, isolates);
  for (int k : ks) {
    if (k < 1) problems.push_back("k-range: K=" + std::to_string(k) + " must be >= 1");
    else if (static_cast<std::size_t>(k) > graph.node_count())
      problems.push_back("k-range: K=" + std::to_string(k) + " exceeds the " + std::to_string(graph.node_count()) +
                         " nodes of the network");
  }
  throw_if(problems);
  run.add_input(a.fit.edges);
  if (!a.fit.config.empty()) run.add_input(a.fit.config);
  auto resolved = to_json(settings);
  resolved["k_range"] = ks;
  run.set_config(resolved);
  run.set_seed(settings.mcmc.seed);

  const auto& dir = run.open();
  write_json(dir / "config.json", resolved);
  const auto sel = select_k(graph, settings.model, ks, settings.mcmc, g.threads);
  write_bic_table(dir / "bic_table.csv", sel.table);
  for (std::size_t i = 0; i < sel.summaries.size(); ++i) {
    write_json(dir / "summaries" / ("k-" + std::to_string(sel.table[i].clusters) + ".json"), to_json(sel.summaries[i]));
  }
  nlohmann::json table = nlohmann::json::array();
  for (const auto& r : sel.table) table.push_back({{"clusters", r.clusters}, {"bic", r.bic.total}});
  write_json(dir / "selection.json", {{"best_k", sel.best_k}, {"convention", "smaller BIC is better"}, {"table", table}});

  ctx.out << "K    BIC (smaller is better)\n";
  for (const auto& r : sel.table) {
    ctx.out << std::left << std::setw(5) << r.clusters << fixed(r.bic.total, 3) << (r.clusters == sel.best_k ? "  *" : "")
            << "\n";
  }
  ctx.out << "recommended K=" << sel.best_k << "\n";
  run.finish();
  return 0;
}

struct RobustnessArgs {
  std::string records;
  std::string edges;
  std::string config;
  std::vector<std::string> criteria = {"main", "a", "b", "c", "d"};
  std::vector<std::string> labels;  // id=path
  bool no_fit = false;
};

int cmd_robustness(const Context& ctx, const Globals& g, const RobustnessArgs& a) {
  Run run(ctx, g, "robustness");
  std::vector<std::string> problems;
  const auto settings = resolve_fit_settings(a.config, nlohmann::json::object(), g.seed, problems);
  const auto standard = standard_criteria();
  std::vector<std::pair<std::string, EliteCriterion>> chosen;
  for (const auto& id : a.criteria) {
    const auto it = std::find_if(standard.begin(), standard.end(), [&](const auto& c) { return c.first == id; });
    if (it == standard.end()) problems.push_back("criteria: unknown criterion '" + id + "' (expected main, a, b, c, d)");
    else chosen.push_back(*it);
  }
  if (std::find(a.criteria.begin(), a.criteria.end(), "main") == a.criteria.end()) {
    problems.push_back("criteria: the baseline 'main' must be included");
  }
  SweepOptions opts;
  opts.model = settings.model;
  opts.mcmc = settings.mcmc;
  opts.fit = !a.no_fit;
  opts.threads = g.threads;
  std::vector<std::string> label_files;
  for (const auto& spec : a.labels) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      problems.push_back("labels: expected ID=FILE, got '" + spec + "'");
      continue;
    }
    label_files.push_back(spec.substr(eq + 1));
    opts.provided[spec.substr(0, eq)] = read_labeling_csv(spec.substr(eq + 1), settings.model.clusters);
  }
  throw_if(problems);

  const auto records = read_records_csv(a.records);
  const auto follows = read_edge_csv(a.edges).graph;
  run.add_input(a.records);
  run.add_input(a.edges);
  if (!a.config.empty()) run.add_input(a.config);
  for (const auto& f : label_files) run.add_input(f);
  auto resolved = to_json(settings);
  resolved["criteria"] = a.criteria;
  resolved["fit"] = opts.fit;
  run.set_config(resolved);
  run.set_seed(settings.mcmc.seed);

  const auto& dir = run.open();
  const auto results = robustness_sweep(records, follows, chosen, opts);
  nlohmann::json sweep = nlohmann::json::array();
  for (const auto& r : results) {
    const fs::path sub = dir / ("criterion-" + r.id);
    fs::create_directories(sub);
    write_elites(sub, records, r.network.selection);
    write_network(sub, r.network);
    if (r.summary) write_summary_files(sub, *r.summary);
    if (r.labeling) write_labeling_csv(*r.labeling, (sub / "labels.csv").string());
    nlohmann::json item = {{"id", r.id},
                           {"criterion", describe(r.criterion)},
                           {"network", to_json(r.network.stats)},
                           {"overlap_with_baseline", r.overlap_with_baseline}};
    if (r.confusion) {
      const auto stem = "confusion-" + r.id;
      write_confusion_csv(*r.confusion, (dir / (stem + ".csv")).string());
      write_text(dir / (stem + ".svg"), confusion_svg(*r.confusion, "main analysis", "criterion (" + r.id + ")"));
      std::vector<std::vector<double>> fr;
      for (Eigen::Index i = 0; i < r.confusion->fractions.rows(); ++i) {
        fr.emplace_back();
        for (Eigen::Index j = 0; j < r.confusion->fractions.cols(); ++j) fr.back().push_back(r.confusion->fractions(i, j));
      }
      item["confusion"] = {{"fractions", fr}, {"counts", r.confusion->counts}, {"common_nodes", r.confusion->common_node_count}};
    }
    sweep.push_back(item);
    ctx.out << "criterion " << r.id << ": users=" << r.network.stats.elite_users << " nodes=" << r.network.stats.nodes
            << " edges=" << r.network.stats.edges << " overlap=" << r.overlap_with_baseline << "\n";
  }
  write_json(dir / "sweep.json", sweep);
  run.finish();
  return 0;
}

struct PlotArgs {
  std::string fit_dir;
  std::vector<std::string> highlights;
  std::string render_config;
  int layout_iterations = 1000;
};

int cmd_plot(const Context& ctx, const Globals& g, const PlotArgs& a) {
  Run run(ctx, g, "plot");
  const fs::path fit_dir = a.fit_dir;
  const auto summary = summary_from_json(read_json(fit_dir / "summary.json"));
  const auto graph = read_edge_csv((fit_dir / "network.csv").string()).graph;
  const RenderConfig render = a.render_config.empty() ? RenderConfig{} : load_render_config(a.render_config);
  run.add_input(fit_dir / "summary.json");
  run.add_input(fit_dir / "network.csv");
  if (!a.render_config.empty()) run.add_input(a.render_config);
  const std::uint64_t seed = g.seed.value_or(1);
  run.set_config({{"render", to_json(render)}, {"highlights", a.highlights}, {"layout_iterations", a.layout_iterations}});
  run.set_seed(seed);

  // The latent map needs the summary's node set; edges are read back from the
  // fit directory, which holds the isolate-free network.
  const auto latent = latent_map_svg(summary, graph, a.highlights, render);
  LayoutOptions lo;
  lo.max_iterations = a.layout_iterations;
  const auto layout = force_layout(graph, derive_seed(seed, "layout"), lo);
  const auto& dir = run.open();
  write_text(dir / "latent_map.svg", latent);
  write_text(dir / "network.svg", network_svg(graph, layout, render, labeling_from(summary)));
  write_text(dir / "network.graphml", export_graphml(graph, summary));
  if (!layout.converged) ctx.err << "warning: layout stopped after " << layout.iterations_run << " iterations\n";
  run.finish();
  return 0;
}

struct WordfreqArgs {
  std::string texts;
  std::string stopwords;
  std::size_t top = 15;
};

int cmd_wordfreq(const Context& ctx, const Globals& g, const WordfreqArgs& a) {
  Run run(ctx, g, "wordfreq");
  const auto texts = read_texts_csv(a.texts);
  const auto stop = a.stopwords.empty() ? default_stopwords() : load_stopwords(a.stopwords);
  run.add_input(a.texts);
  if (!a.stopwords.empty()) run.add_input(a.stopwords);
  run.set_config({{"top", a.top}, {"stopwords", a.stopwords.empty() ? "bundled" : a.stopwords}});
  run.set_seed(g.seed.value_or(0));
  const auto ranked = word_frequency(texts, stop, a.top);
  const auto& dir = run.open();
  {
    std::ofstream f(dir / "wordfreq.csv", std::ios::binary);
    csv::write_row(f, {"rank", "word", "count"});
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      csv::write_row(f, {std::to_string(i + 1), ranked[i].first, std::to_string(ranked[i].second)});
    }
  }
  write_text(dir / "wordfreq.svg", bar_chart_svg(ranked, "Top " + std::to_string(a.top) + " content words"));
  for (std::size_t i = 0; i < ranked.size(); ++i) ctx.out << i + 1 << ". " << ranked[i].first << " " << ranked[i].second << "\n";
  run.finish();
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent cluster models for directed follow networks", "lsm"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);

  Globals g;
  std::uint64_t seed_value = 1;
  auto* seed_opt = app.add_option("--seed", seed_value, "Master seed (overrides mcmc.seed)");
  app.add_option("--out", g.out_dir, "Output directory")->required();
  app.add_flag("--force", g.force, "Replace an existing output directory");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1, 1024));

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Select elite users and build their follow network");
  extract->add_option("--records", ex.records, "Tweet records CSV")->required()->check(CLI::ExistingFile);
  extract->add_option("--edges", ex.edges, "Follow edges CSV (follower,followed)")->check(CLI::ExistingFile);
  auto* pop = extract->add_option("--min-tweet-pop", ex.min_pop, "Popularity threshold T");
  auto* count = extract->add_option("--min-count", ex.min_count, "Tweets needed at T");
  std::uint64_t cumulative = 0;
  auto* cum = extract->add_option("--cumulative", cumulative, "Summed popularity threshold C");
  cum->excludes(pop)->excludes(count);
  extract->add_option("--top", ex.top, "Leaderboard length")->check(CLI::PositiveNumber);

  FitArgs fa;
  auto add_fit_options = [](CLI::App* sub, FitArgs& f) {
    sub->add_option("--edges", f.edges, "Follow edges CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--config", f.config, "Fit config JSON")->check(CLI::ExistingFile);
    sub->add_option("--clusters", f.clusters, "Number of clusters K");
    sub->add_option("--dimensions", f.dimensions, "Latent dimension d");
    sub->add_option("--iterations", f.iterations, "MCMC iterations");
    sub->add_option("--burn-in", f.burn_in, "Burn-in iterations");
    sub->add_option("--thinning", f.thinning, "Thinning interval");
    sub->add_option("--chains", f.chains, "Number of chains");
  };
  auto* fit_cmd = app.add_subcommand("fit", "Fit the latent cluster random effects model");
  add_fit_options(fit_cmd, fa);

  SelectArgs sa;
  auto* select = app.add_subcommand("select-k", "Choose K by approximated BIC");
  add_fit_options(select, sa.fit);
  select->add_option("--k-range", sa.k_range, "Values of K, e.g. 1..4 or 1,2,3");

  RobustnessArgs ra;
  auto* robust = app.add_subcommand("robustness", "Repeat the analysis under alternative elite criteria");
  robust->add_option("--records", ra.records, "Tweet records CSV")->required()->check(CLI::ExistingFile);
  robust->add_option("--edges", ra.edges, "Follow edges CSV")->required()->check(CLI::ExistingFile);
  robust->add_option("--config", ra.config, "Fit config JSON")->check(CLI::ExistingFile);
  robust->add_option("--criteria", ra.criteria, "Criterion ids (main, a, b, c, d)")->delimiter(',');
  robust->add_option("--labels", ra.labels, "ID=FILE labelings used instead of fitting");
  robust->add_flag("--no-fit", ra.no_fit, "Only extract networks");

  PlotArgs pa;
  auto* plot = app.add_subcommand("plot", "Render figures for a fit directory");
  plot->add_option("--fit", pa.fit_dir, "Fit output directory")->required()->check(CLI::ExistingDirectory);
  plot->add_option("--highlight", pa.highlights, "Labels to annotate");
  plot->add_option("--render-config", pa.render_config, "Render config JSON")->check(CLI::ExistingFile);
  plot->add_option("--layout-iterations", pa.layout_iterations, "Force layout iterations per level")
      ->check(CLI::PositiveNumber);

  WordfreqArgs wa;
  auto* wordfreq = app.add_subcommand("wordfreq", "Most frequent content words");
  wordfreq->add_option("--texts", wa.texts, "CSV with a text column")->required()->check(CLI::ExistingFile);
  wordfreq->add_option("--stopwords", wa.stopwords, "Stopword list (one per line)")->check(CLI::ExistingFile);
  wordfreq->add_option("--top", wa.top, "Number of words")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  if (seed_opt->count() > 0) g.seed = seed_value;
  if (cum->count() > 0) ex.cumulative = cumulative;

  Context ctx{out, err, {}};
  for (int i = 1; i < argc; ++i) ctx.arguments.emplace_back(argv[i]);

  try {
    if (*extract) return cmd_extract(ctx, g, ex);
    if (*fit_cmd) return cmd_fit(ctx, g, fa);
    if (*select) return cmd_select_k(ctx, g, sa);
    if (*robust) return cmd_robustness(ctx, g, ra);
    if (*plot) return cmd_plot(ctx, g, pa);
    if (*wordfreq) return cmd_wordfreq(ctx, g, wa);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace lsm::cli
