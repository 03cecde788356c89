#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cefr/level.hpp"

namespace cefr {

using Tokens = std::vector<std::string>;

/// Whitespace split with leading/trailing punctuation peeled off as
/// single-character tokens. Internal apostrophes, hyphens and numeric
/// separators stay inside the token. Case is preserved.
Tokens tokenize(std::string_view text);

/// Half-open byte range [begin, end) of one sentence in the source text.
struct SentenceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const SentenceSpan&) const = default;
};

/// Sentence boundaries fall after '.', '!' or '?' followed by whitespace or
/// end of text, except after a known abbreviation. Trailing text without a
/// terminator forms one more sentence. Spans tile the non-blank text.
std::vector<SentenceSpan> split_sentences(std::string_view text);

/// Vowel-group syllable estimate. Throws InvalidArgument when the word has no
/// alphabetic character.
int count_syllables(std::string_view word);

std::string fold_case(std::string_view s);
/// Token contains a letter, digit or non-ASCII byte.
bool is_word_token(std::string_view tok);
/// Digits with optional internal '.' or ',' separators.
bool is_numeric_token(std::string_view tok);
/// Contains at least one ASCII letter and no digits.
bool is_alphabetic_token(std::string_view tok);
std::size_t count_letters(std::string_view tok);

struct Essay {
  std::string id;
  std::string text;
  std::optional<Level> label;
  Tokens tokens;
  /// Exclusive token index at which each sentence ends; non-decreasing and
  /// each entry <= tokens.size().
  std::vector<std::size_t> sentence_ends;

  std::size_t sentence_count() const { return sentence_ends.size(); }
  /// Tokens of sentence i.
  std::span<const std::string> sentence(std::size_t i) const;
};

/// Tokenizes and sentence-splits `text`. Throws DataError on an empty id.
Essay make_essay(std::string id, std::string text,
                 std::optional<Level> label = std::nullopt);

struct VocabEntry {
  std::size_t doc_freq = 0;
  std::size_t count = 0;
  bool operator==(const VocabEntry&) const = default;
};

/// Case-folded token -> document frequency and total count.
using Vocabulary = std::map<std::string, VocabEntry, std::less<>>;

Vocabulary build_vocabulary(std::span<const Essay> essays);

class Dataset {
 public:
  Dataset() = default;
  /// Throws DataError on duplicate ids.
  explicit Dataset(std::vector<Essay> essays);

  const std::vector<Essay>& essays() const { return essays_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }
  std::size_t size() const { return essays_.size(); }
  bool empty() const { return essays_.empty(); }
  const Essay& operator[](std::size_t i) const { return essays_[i]; }

  bool fully_labeled() const;
  /// Labels in essay order. Throws DataError if any essay is unlabeled.
  std::vector<Level> labels() const;

  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<Essay> essays_;
  Vocabulary vocabulary_;
};

/// Reads comma-delimited (header row with id,text[,label]) or one JSON object
/// per line. The format is detected from the first non-blank character.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::string_view content, std::string_view source_name = "<memory>");

/// Writes id,text[,label] CSV with RFC 4180 quoting.
void write_dataset_csv(const Dataset& ds, std::ostream& out);

/// Stable 64-bit content hash over ids, texts and labels.
std::uint64_t dataset_hash(const Dataset& ds);

}  // namespace cefr
