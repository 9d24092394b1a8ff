#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "lsm/cli.hpp"
#include "lsm/csv.hpp"
#include "oracles.hpp"

using namespace lsm;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result lsm_run(std::vector<std::string> args) {
  args.insert(args.begin(), "lsm");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Scratch directory with a two-cluster edge list, tweet records and texts.
struct Workspace {
  fs::path root;

  Workspace() {
    root = fs::temp_directory_path() / ("lsm_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    auto planted = oracle::two_clusters(20, 6.0, 1.0, 0.2, 8);
    std::vector<std::string> labels;
    for (int i = 0; i < 20; ++i) labels.push_back("user" + std::to_string(i));
    write_edge_csv(sample_network(planted.state, 9, labels), (root / "edges.csv").string());

    std::string records = "tweet_id,author,likes,replies,retweets,language,created_at\n";
    for (int i = 0; i < 20; ++i) {
      records += std::to_string(100 + i) + ",user" + std::to_string(i) + "," + std::to_string(500 * (i + 1)) +
                 ",10,20,de,2021-0" + std::to_string(1 + i % 9) + "-10T12:00:00Z\n";
    }
    spit(root / "records.csv", records);

    std::string texts = "id,text\n";
    const char* words[] = {"corona", "impfung", "maske", "test", "welle", "schule", "arzt", "klinik", "lockdown",
                           "virus", "studie", "daten", "inzidenz", "regeln", "zahlen", "pflege", "alpha"};
    for (int i = 0; i < 17; ++i) {
      for (int r = 0; r <= i; ++r) texts += std::to_string(i) + ",\"Die " + words[i] + " und mehr\"\n";
    }
    spit(root / "texts.csv", texts);
  }
  ~Workspace() { fs::remove_all(root); }

  std::string path(const std::string& name) const { return (root / name).string(); }
};

const std::vector<std::string> kShortFit = {"--iterations", "300", "--burn-in", "100", "--thinning", "10"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("sha256") {
  CHECK(cli::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(cli::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("extract") {
  Workspace w;
  auto r = lsm_run({"--out", w.path("ex"), "extract", "--records", w.path("records.csv"), "--edges",
                    w.path("edges.csv"), "--min-tweet-pop", "5000"});
  CHECK(r.code == 0);
  // scores are 500 (i + 1) + 30, so users 9..19 qualify
  CHECK(r.out.find("n_users=11 n_qualifying_tweets=11") != std::string::npos);
  for (auto f : {"elites.csv", "qualifying_tweets.csv", "monthly_counts.csv", "leaderboard.csv", "summary.json",
                 "network.csv", "network.graphml", "manifest.json"}) {
    CHECK(fs::exists(w.root / "ex" / f));
  }

  auto none = lsm_run({"--out", w.path("none"), "extract", "--records", w.path("records.csv"), "--min-tweet-pop",
                       "1000000"});
  CHECK(none.code == 0);
  CHECK(none.out.find("n_users=0") != std::string::npos);
  CHECK(none.err.find("warning") != std::string::npos);

  auto two = lsm_run({"--out", w.path("two"), "extract", "--records", w.path("records.csv"), "--min-count", "2",
                      "--min-tweet-pop", "2000"});
  CHECK(two.code == 0);
  CHECK(two.out.find("n_users=0") != std::string::npos);

  auto bad = lsm_run({"--out", w.path("bad"), "extract", "--records", w.path("records.csv"), "--min-count", "0"});
  CHECK(bad.code == 2);
}

TEST_CASE("refuses to overwrite without --force") {
  Workspace w;
  auto args = std::vector<std::string>{"--out", w.path("o"), "extract", "--records", w.path("records.csv")};
  CHECK(lsm_run(args).code == 0);
  auto again = lsm_run(args);
  CHECK(again.code == 2);
  CHECK(again.err.find("--force") != std::string::npos);
  spit(w.root / "o" / "stale.txt", "x");
  auto forced = args;
  forced.insert(forced.begin(), "--force");
  CHECK(lsm_run(forced).code == 0);
  CHECK_FALSE(fs::exists(w.root / "o" / "stale.txt"));
}

TEST_CASE("fit validation reports every problem before sampling") {
  Workspace w;
  auto r = lsm_run({"--out", w.path("f"), "fit", "--edges", w.path("edges.csv"), "--iterations", "100", "--burn-in",
                    "500", "--thinning", "0", "--clusters", "50"});
  CHECK(r.code == 2);
  CHECK(r.err.find("burn_in") != std::string::npos);
  CHECK(r.err.find("thinning") != std::string::npos);
  CHECK(r.err.find("K=50") != std::string::npos);
  CHECK_FALSE(fs::exists(w.root / "f"));

  spit(w.root / "cfg.json", R"({"model": {"clusters": 2, "bogus": 1}, "sampler": {}})");
  auto cfg = lsm_run({"--out", w.path("g"), "fit", "--edges", w.path("edges.csv"), "--config", w.path("cfg.json")});
  CHECK(cfg.code == 2);
  CHECK(cfg.err.find("bogus") != std::string::npos);
  CHECK(cfg.err.find("sampler") != std::string::npos);
}

TEST_CASE("fit artifacts, determinism and manifest") {
  Workspace w;
  std::vector<std::string> base = {"fit", "--edges", w.path("edges.csv"), "--chains", "2"};
  base = concat(base, kShortFit);
  auto a = lsm_run(concat({"--seed", "5", "--threads", "1", "--out", w.path("a")}, base));
  auto b = lsm_run(concat({"--seed", "5", "--threads", "2", "--out", w.path("b")}, base));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(w.root / "a" / "summary.json") == slurp(w.root / "b" / "summary.json"));
  for (auto f : {"config.json", "network.csv", "isolates.csv", "draws/chain-1.jsonl", "draws/chain-2.jsonl",
                 "summary.json", "bic_table.csv", "manifest.json"}) {
    CHECK(fs::exists(w.root / "a" / f));
  }
  auto c = lsm_run(concat({"--seed", "6", "--out", w.path("c")}, base));
  CHECK(slurp(w.root / "a" / "summary.json") != slurp(w.root / "c" / "summary.json"));

  auto draws = slurp(w.root / "a" / "draws" / "chain-1.jsonl");
  CHECK(std::count(draws.begin(), draws.end(), '\n') == 20);

  auto bic = csv::read_file((w.root / "a" / "bic_table.csv").string());
  CHECK(bic.header.back() == "bic_smaller_is_better");

  auto manifest = nlohmann::json::parse(slurp(w.root / "a" / "manifest.json"));
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["inputs"][0]["sha256"] == cli::sha256_file(w.path("edges.csv")));
  for (const auto& o : manifest["outputs"]) {
    CHECK(o["sha256"] == cli::sha256_file(w.root / "a" / o["path"].get<std::string>()));
  }

  auto plot = lsm_run({"--out", w.path("p"), "plot", "--fit", w.path("a"), "--highlight", "user3"});
  CHECK(plot.code == 0);
  CHECK(fs::exists(w.root / "p" / "latent_map.svg"));
  CHECK(fs::exists(w.root / "p" / "network.svg"));
  CHECK(fs::exists(w.root / "p" / "network.graphml"));
  auto missing = lsm_run({"--out", w.path("q"), "plot", "--fit", w.path("a"), "--highlight", "nobody"});
  CHECK(missing.code != 0);
}

TEST_CASE("select-k with a single value") {
  Workspace w;
  auto r = lsm_run(concat({"--out", w.path("s"), "select-k", "--edges", w.path("edges.csv"), "--k-range", "2"}, kShortFit));
  CHECK(r.code == 0);
  CHECK(r.out.find("recommended K=2") != std::string::npos);
  auto table = csv::read_file((w.root / "s" / "bic_table.csv").string());
  CHECK(table.rows.size() == 1);
  auto bad = lsm_run({"--out", w.path("t"), "select-k", "--edges", w.path("edges.csv"), "--k-range", "3..1"});
  CHECK(bad.code == 2);
}

TEST_CASE("robustness writes one confusion matrix per alternative") {
  Workspace w;
  spit(w.root / "main.csv", "label,component\nuser10,1\nuser11,1\nuser12,1\nuser13,2\nuser14,2\n");
  spit(w.root / "hi.csv", "label,component\nuser13,1\nuser14,1\nuser12,2\n");
  auto r = lsm_run({"--out", w.path("r"), "robustness", "--records", w.path("records.csv"), "--edges",
                    w.path("edges.csv"), "--criteria", "main,a,b,c,d", "--no-fit"});
  CHECK(r.code == 0);
  CHECK(fs::exists(w.root / "r" / "sweep.json"));

  auto with = lsm_run({"--out", w.path("r2"), "robustness", "--records", w.path("records.csv"), "--edges",
                       w.path("edges.csv"), "--criteria", "main,a", "--labels", "main=" + w.path("main.csv"),
                       "--labels", "a=" + w.path("hi.csv")});
  CHECK(with.code == 0);
  CHECK(fs::exists(w.root / "r2" / "confusion-a.csv"));
  CHECK(fs::exists(w.root / "r2" / "confusion-a.svg"));
  auto m = csv::read_file((w.root / "r2" / "confusion-a.csv").string());
  CHECK(m.rows.size() == 4);
}

TEST_CASE("wordfreq") {
  Workspace w;
  auto r = lsm_run({"--out", w.path("w"), "wordfreq", "--texts", w.path("texts.csv"), "--top", "15"});
  CHECK(r.code == 0);
  auto table = csv::read_file((w.root / "w" / "wordfreq.csv").string());
  CHECK(table.rows.size() == 15);
  CHECK(table.rows[0].fields[1] == "mehr");
  CHECK(table.rows[1].fields[1] == "alpha");
  CHECK(fs::exists(w.root / "w" / "wordfreq.svg"));
}

TEST_CASE("usage errors") {
  CHECK(lsm_run({}).code != 0);
  CHECK(lsm_run({"--out", "/tmp/x", "nonsense"}).code != 0);
}
