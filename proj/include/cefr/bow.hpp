#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cefr/binary_io.hpp"
#include "cefr/corpus.hpp"

namespace cefr {

/// (column, value) pairs sorted by column.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

/// Case-folded word tokens (punctuation dropped) and the space-joined
/// bigrams of adjacent ones.
std::vector<std::string> bow_terms(std::span<const std::string> tokens, bool unigrams = true,
                                   bool bigrams = true);

class Vectorizer {
 public:
  struct Options {
    std::size_t min_df = 2;
    bool bigrams_only = false;
  };

  /// Throws InvalidArgument on an empty corpus.
  static Vectorizer fit(std::span<const Tokens> corpus, Options opts);

  /// tf * idf per indexed term; terms outside the index are ignored.
  SparseVector transform(std::span<const std::string> tokens) const;

  std::size_t size() const { return terms_.size(); }
  std::size_t corpus_size() const { return n_docs_; }
  const std::vector<std::string>& terms() const { return terms_; }
  double idf(std::size_t col) const { return idf_[col]; }
  std::size_t doc_freq(std::size_t col) const { return df_[col]; }
  /// Column of `term`, or -1.
  std::ptrdiff_t column(const std::string& term) const;
  const Options& options() const { return opts_; }

  /// `term<TAB>column<TAB>df<TAB>idf` per line.
  void dump(std::ostream& out) const;

  void serialize(BinaryWriter& w) const;
  static Vectorizer deserialize(BinaryReader& r);

 private:
  Options opts_;
  std::size_t n_docs_ = 0;
  std::vector<std::string> terms_;  // lexicographic; index = column
  std::vector<std::size_t> df_;
  std::vector<double> idf_;
};

inline Vectorizer fit_vectorizer(std::span<const Tokens> corpus, std::size_t min_df) {
  return Vectorizer::fit(corpus, {min_df, false});
}

inline SparseVector transform(const Essay& essay, const Vectorizer& vec) {
  return vec.transform(essay.tokens);
}

}  // namespace cefr
