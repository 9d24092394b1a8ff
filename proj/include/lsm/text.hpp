#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace lsm {

using Stopwords = std::unordered_set<std::string>;

// Lowercased tokens of one text. URLs and @mentions are removed, a leading '#'
// is dropped (the hashtag word is kept), and the rest is split on anything that
// is not a letter or an ASCII digit. Letters cover Latin (incl. umlauts and ß),
// Greek and Cyrillic. Tokens without any letter are dropped; tokens shorter than
// two code points are dropped.
std::vector<std::string> tokenize(std::string_view text);

// Counts non-stopword tokens; descending count, ties by byte order of the word.
// Throws DomainError when top_n is 0.
std::vector<std::pair<std::string, std::size_t>> word_frequency(const std::vector<std::string>& texts,
                                                                const Stopwords& stopwords,
                                                                std::size_t top_n);

// One word per line; blank lines and lines starting with '#' are ignored.
// Entries are lowercased with the tokenizer's folding.
Stopwords load_stopwords(const std::string& path);
Stopwords default_stopwords();  // the bundled German list

// `text` column of a CSV file.
std::vector<std::string> read_texts_csv(const std::string& path);

}  // namespace lsm
