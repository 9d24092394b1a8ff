#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace lsm {

struct TweetRecord {
  std::string tweet_id;
  std::string author;
  std::uint64_t likes = 0;
  std::uint64_t replies = 0;
  std::uint64_t retweets = 0;  // retweets including quotes
  std::string language;
  std::string created_at;  // RFC 3339
};

// Likes + replies + retweets (quotes included in retweets).
std::uint64_t popularity_score(const TweetRecord& t);

// Authors with at least one tweet scoring >= threshold.
struct SingleTweetThreshold {
  std::uint64_t threshold;
};

// Authors with at least `min_count` tweets scoring >= threshold.
struct MinCountAtThreshold {
  std::uint64_t min_count;
  std::uint64_t threshold;
};

// Authors whose summed score over all their tweets is >= total.
struct CumulativeThreshold {
  std::uint64_t total;
};

using EliteCriterion = std::variant<SingleTweetThreshold, MinCountAtThreshold, CumulativeThreshold>;

void validate(const EliteCriterion& c);  // throws DomainError
std::string describe(const EliteCriterion& c);

// The main criterion and the four robustness alternatives, keyed "main", "a".."d".
std::vector<std::pair<std::string, EliteCriterion>> standard_criteria();

struct EliteSelection {
  std::vector<std::string> authors;            // sorted, unique
  std::vector<std::string> qualifying_tweets;  // tweet ids in input order
};

// Records are deduplicated by tweet_id (first occurrence wins) before scoring.
// Thresholds are inclusive. Throws DomainError on an empty record list.
EliteSelection select_elites(const std::vector<TweetRecord>& records, const EliteCriterion& c);

std::vector<TweetRecord> deduplicate(const std::vector<TweetRecord>& records);

// Keys are "YYYY-MM" of the UTC instant. Throws ParseError naming the tweet id
// when a timestamp cannot be parsed.
std::map<std::string, std::size_t> monthly_counts(const std::vector<TweetRecord>& tweets);

// Seconds since the Unix epoch for an RFC 3339 timestamp ("T" or space separator,
// optional fraction, "Z" or numeric offset; no offset is read as UTC). Returns
// false when the text is not a valid timestamp.
bool parse_timestamp(std::string_view text, std::int64_t& unix_seconds);

// Tweet counts per elite author, descending, ties broken by label.
std::vector<std::pair<std::string, std::size_t>> author_tweet_leaderboard(
    const std::vector<TweetRecord>& tweets, const std::vector<std::string>& elites,
    std::size_t top_n);

// Records restricted to the given tweet ids (input order kept).
std::vector<TweetRecord> filter_by_id(const std::vector<TweetRecord>& records,
                                      const std::vector<std::string>& ids);

// CSV with header tweet_id,author,likes,replies,retweets,language,created_at.
std::vector<TweetRecord> parse_records_csv(std::string_view text);
std::vector<TweetRecord> read_records_csv(const std::string& path);

}  // namespace lsm
