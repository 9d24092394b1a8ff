#include "lsm/elites.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "lsm/csv.hpp"
#include "lsm/errors.hpp"

namespace lsm {

std::uint64_t popularity_score(const TweetRecord& t) { return t.likes + t.replies + t.retweets; }

void validate(const EliteCriterion& c) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, SingleTweetThreshold>) {
          if (v.threshold == 0) throw DomainError("tweet threshold must be > 0");
        } else if constexpr (std::is_same_v<T, MinCountAtThreshold>) {
          if (v.threshold == 0) throw DomainError("tweet threshold must be > 0");
          if (v.min_count == 0) throw DomainError("minimum tweet count must be >= 1");
        } else {
          if (v.total == 0) throw DomainError("cumulative threshold must be > 0");
        }
      },
      c);
}

std::string describe(const EliteCriterion& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, SingleTweetThreshold>) {
          return ">=1 tweet with score >= " + std::to_string(v.threshold);
        } else if constexpr (std::is_same_v<T, MinCountAtThreshold>) {
          return ">=" + std::to_string(v.min_count) + " tweets with score >= " +
                 std::to_string(v.threshold);
        } else {
          return "total score >= " + std::to_string(v.total);
        }
      },
      c);
}

std::vector<std::pair<std::string, EliteCriterion>> standard_criteria() {
  return {
      {"main", SingleTweetThreshold{2000}},
      {"a", SingleTweetThreshold{4000}},
      {"b", SingleTweetThreshold{1000}},
      {"c", MinCountAtThreshold{2, 2000}},
      {"d", CumulativeThreshold{5000}},
  };
}

std::vector<TweetRecord> deduplicate(const std::vector<TweetRecord>& records) {
  std::unordered_set<std::string> seen;
  std::vector<TweetRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (seen.insert(r.tweet_id).second) out.push_back(r);
  }
  return out;
}

EliteSelection select_elites(const std::vector<TweetRecord>& records, const EliteCriterion& c) {
  if (records.empty()) throw DomainError("select_elites: empty record list");
  validate(c);
  const auto unique = deduplicate(records);

  std::uint64_t threshold = 0;
  std::uint64_t min_count = 1;
  bool cumulative = false;
  if (auto* s = std::get_if<SingleTweetThreshold>(&c)) {
    threshold = s->threshold;
  } else if (auto* m = std::get_if<MinCountAtThreshold>(&c)) {
    threshold = m->threshold;
    min_count = m->min_count;
  } else {
    threshold = std::get<CumulativeThreshold>(c).total;
    cumulative = true;
  }

  std::unordered_map<std::string, std::uint64_t> per_author;  // hits or total score
  for (const auto& t : unique) {
    const auto score = popularity_score(t);
    if (cumulative) {
      per_author[t.author] += score;
    } else if (score >= threshold) {
      per_author[t.author] += 1;
    }
  }

  std::unordered_set<std::string> elite;
  for (const auto& [author, value] : per_author) {
    if (cumulative ? value >= threshold : value >= min_count) elite.insert(author);
  }

  EliteSelection sel;
  sel.authors.assign(elite.begin(), elite.end());
  std::sort(sel.authors.begin(), sel.authors.end());
  for (const auto& t : unique) {
    if (!elite.count(t.author)) continue;
    if (cumulative || popularity_score(t) >= threshold) sel.qualifying_tweets.push_back(t.tweet_id);
  }
  return sel;
}

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return true;
}

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(yoe + era * 400) + (m <= 2);
}

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  return m == 2 && leap ? 29 : kDays[m - 1];
}

}  // namespace

bool parse_timestamp(std::string_view s, std::int64_t& unix_seconds) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!read_int(s, 0, 4, y) || s.size() < 19 || s[4] != '-' || !read_int(s, 5, 2, mo) ||
      s[7] != '-' || !read_int(s, 8, 2, d) || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') ||
      !read_int(s, 11, 2, h) || s[13] != ':' || !read_int(s, 14, 2, mi) || s[16] != ':' ||
      !read_int(s, 17, 2, sec)) {
    return false;
  }
  if (mo < 1 || mo > 12 || d < 1 || d > days_in_month(y, mo) || h > 23 || mi > 59 || sec > 60) {
    return false;
  }
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == start) return false;
  }
  int offset_minutes = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' || s[pos] == 'z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      const int sign = s[pos] == '-' ? -1 : 1;
      int oh, om;
      if (!read_int(s, pos + 1, 2, oh)) return false;
      std::size_t next = pos + 3;
      if (next < s.size() && s[next] == ':') ++next;
      if (!read_int(s, next, 2, om) || oh > 23 || om > 59) return false;
      offset_minutes = sign * (oh * 60 + om);
      pos = next + 2;
    } else {
      return false;
    }
  }
  if (pos != s.size()) return false;
  unix_seconds = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 +
                 h * 3600 + mi * 60 + sec - offset_minutes * 60;
  return true;
}

std::map<std::string, std::size_t> monthly_counts(const std::vector<TweetRecord>& tweets) {
  std::map<std::string, std::size_t> counts;
  for (std::size_t k = 0; k < tweets.size(); ++k) {
    const auto& t = tweets[k];
    std::int64_t secs = 0;
    if (!parse_timestamp(t.created_at, secs)) {
      throw ParseError("tweet " + t.tweet_id + ": unparseable timestamp '" + t.created_at + "'",
                       k + 1);
    }
    std::int64_t days = secs / 86400;
    if (secs % 86400 < 0) --days;
    int y;
    unsigned m;
    civil_from_days(days, y, m);
    char key[16];
    std::snprintf(key, sizeof key, "%04d-%02u", y, m);
    ++counts[key];
  }
  return counts;
}

std::vector<std::pair<std::string, std::size_t>> author_tweet_leaderboard(
    const std::vector<TweetRecord>& tweets, const std::vector<std::string>& elites,
    std::size_t top_n) {
  if (top_n == 0) throw DomainError("leaderboard size must be >= 1");
  const std::unordered_set<std::string> elite(elites.begin(), elites.end());
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& t : tweets) {
    if (elite.count(t.author)) ++counts[t.author];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > top_n) ranked.resize(top_n);
  return ranked;
}

std::vector<TweetRecord> filter_by_id(const std::vector<TweetRecord>& records,
                                      const std::vector<std::string>& ids) {
  const std::unordered_set<std::string> keep(ids.begin(), ids.end());
  std::vector<TweetRecord> out;
  for (const auto& r : records) {
    if (keep.count(r.tweet_id)) out.push_back(r);
  }
  return deduplicate(out);
}

namespace {

std::uint64_t parse_count(const std::string& s, const char* column, std::size_t line) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) {
    throw ParseError(std::string(column) + " must be a non-negative integer, got '" + s + "'",
                     line);
  }
  return v;
}

}  // namespace

std::vector<TweetRecord> parse_records_csv(std::string_view text) {
  const auto table = csv::parse(text);
  csv::require_header(table,
                      {"tweet_id", "author", "likes", "replies", "retweets", "language",
                       "created_at"});
  std::vector<TweetRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const auto& f = row.fields;
    if (f[0].empty()) throw ParseError("empty tweet_id", row.line);
    if (f[1].empty()) throw ParseError("empty author", row.line);
    TweetRecord t;
    t.tweet_id = f[0];
    t.author = f[1];
    t.likes = parse_count(f[2], "likes", row.line);
    t.replies = parse_count(f[3], "replies", row.line);
    t.retweets = parse_count(f[4], "retweets", row.line);
    t.language = f[5];
    t.created_at = f[6];
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TweetRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_records_csv(buf.str());
}

}  // namespace lsm
