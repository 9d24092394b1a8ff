#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "lsm/errors.hpp"
#include "lsm/text.hpp"

using namespace lsm;

using Tokens = std::vector<std::string>;

TEST_CASE("case folding") {
  auto f = word_frequency({"Impfung impfung IMPFUNG"}, {}, 10);
  REQUIRE(f.size() == 1);
  CHECK(f[0] == std::pair<std::string, std::size_t>{"impfung", 3});
  CHECK(word_frequency({}, {}, 5).empty());
  CHECK_THROWS_AS(word_frequency({"x"}, {}, 0), DomainError);
}

TEST_CASE("urls, mentions and hashtags") {
  CHECK(tokenize("Lest https://t.co/AbC123 und http://x.de/y?z=1 oder www.rki.de bitte") ==
        Tokens{"lest", "und", "oder", "bitte"});
  CHECK(tokenize("@jensspahn sagt: #COVID19 ist da") == Tokens{"sagt", "covid19", "ist", "da"});
  CHECK(tokenize("RT @user: #Corona-Impfung jetzt!") == Tokens{"rt", "corona", "impfung", "jetzt"});
  // "www." only counts as a URL at a word boundary
  CHECK(tokenize("awww.lol") == Tokens{"awww", "lol"});
}

TEST_CASE("letters, digits and short tokens") {
  CHECK(tokenize("ÜBER die Straße, Ärzte öffnen") == Tokens{"über", "die", "straße", "ärzte", "öffnen"});
  CHECK(tokenize("2021 a 7b 3G x") == Tokens{"7b", "3g"});
  CHECK(tokenize("ΑΘΗΝΑ МОСКВА") == Tokens{"αθηνα", "москва"});
  CHECK(tokenize("ok😷ok") == Tokens{"ok", "ok"});
  CHECK(tokenize("").empty());
}

TEST_CASE("stopwords and ranking") {
  auto sw = default_stopwords();
  CHECK(sw.size() > 250);
  CHECK(sw.count("und") == 1);
  CHECK(sw.count("amp") == 1);
  CHECK(sw.count("rt") == 1);
  CHECK(sw.count("mehr") == 0);
  CHECK(sw.count("impfung") == 0);

  std::vector<std::string> texts = {"Die Impfung und mehr Impfung", "mehr Corona &amp; die Maske", "Maske, Corona"};
  auto f = word_frequency(texts, sw, 10);
  std::vector<std::pair<std::string, std::size_t>> expect = {
      {"corona", 2}, {"impfung", 2}, {"maske", 2}, {"mehr", 2}};
  CHECK(f == expect);

  auto top2 = word_frequency(texts, sw, 2);
  CHECK(top2.size() == 2);
  CHECK(top2[1].first == "impfung");

  // counts add up to the retained tokens
  std::size_t retained = 0;
  for (auto& t : texts) {
    for (auto& tok : tokenize(t)) retained += sw.count(tok) == 0;
  }
  std::size_t total = 0;
  for (auto& [w, c] : word_frequency(texts, sw, 1000)) total += c;
  CHECK(total == retained);
}

TEST_CASE("stopword and text files") {
  auto dir = std::filesystem::temp_directory_path() / "lsm_test_text";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "sw.txt");
    out << "# comment\n\nDER\n  Über \n";
  }
  auto sw = load_stopwords((dir / "sw.txt").string());
  CHECK(sw == Stopwords{"der", "über"});
  {
    std::ofstream out(dir / "t.csv");
    out << "id,text\n1,\"Hallo, Welt\"\n2,zweite\n";
  }
  CHECK(read_texts_csv((dir / "t.csv").string()) == std::vector<std::string>{"Hallo, Welt", "zweite"});
  CHECK_THROWS(load_stopwords((dir / "missing.txt").string()));
  std::filesystem::remove_all(dir);
}
