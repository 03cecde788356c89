#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "cefr/corpus.hpp"

namespace cefr {

struct TextStats {
  std::size_t tokens = 0;
  std::size_t words = 0;
  std::size_t sentences = 0;
  std::size_t letters = 0;
  std::size_t syllables = 0;
  /// Words with three or more syllables.
  std::size_t complex_words = 0;
  /// Words with more than six letters.
  std::size_t long_words = 0;
  std::size_t monosyllabic_words = 0;
  std::size_t punctuation = 0;
  std::size_t numbers = 0;
  std::size_t commas = 0;
  std::size_t word_types = 0;
  std::size_t max_sentence_words = 0;

  /// Letters per word. Throws DegenerateInput when words == 0.
  double characters_per_word() const;
  /// Throws DegenerateInput when sentences == 0.
  double words_per_sentence() const;
  bool degenerate() const { return words == 0 || sentences == 0; }
};

/// Word tokens are tokens with a letter or digit. Tokens without ASCII
/// letters (numbers) count one syllable.
TextStats compute_text_stats(const Essay& essay);

double flesch_reading_ease(const TextStats& s);
double flesch_kincaid_grade(const TextStats& s);
double gunning_fog(const TextStats& s);
double coleman_liau(const TextStats& s);
double smog_index(const TextStats& s);
double automated_readability_index(const TextStats& s);
double lix(const TextStats& s);

using WordSet = std::unordered_set<std::string>;

/// One word per line, '#' starts a comment, entries are case-folded.
WordSet load_word_list(const std::filesystem::path& path);

/// Smoothed idf, ln((1+N)/(1+df)) + 1, over case-folded word tokens.
std::map<std::string, double> build_idf_table(const Dataset& ds);

struct LexicalResources {
  WordSet dictionary;
  WordSet easy_words;
  std::map<std::string, double> idf_table;

  /// Replaces the idf table and caches its mean.
  void set_idf(std::map<std::string, double> table);
  double mean_idf() const { return idf_mean_; }

 private:
  double idf_mean_ = 0.0;
};

struct LexicalCounts {
  std::size_t difficult = 0;
  std::size_t misspelled = 0;
  std::size_t duplicate = 0;
  std::size_t low_idf = 0;
  bool operator==(const LexicalCounts&) const = default;
};

/// Counts are zero for any resource that is empty.
LexicalCounts lexical_counts(const Essay& essay, const LexicalResources& resources);

/// Everything a numeric feature may look at for one essay.
struct NumericContext {
  const Essay& essay;
  const TextStats& stats;
  const LexicalCounts& lexical;
};

struct NumericFeature {
  std::string name;
  std::function<double(const NumericContext&)> compute;
};

/// Ordered list of numeric features. Index-valued features are evaluated only
/// for non-degenerate stats; otherwise they read 0 and the "degenerate"
/// feature reads 1.
class NumericRegistry {
 public:
  struct Options {
    bool spelling = true;
    bool difficulty = true;
    bool idf = true;
  };

  static NumericRegistry standard(Options opts);
  static NumericRegistry standard() { return standard(Options{}); }

  /// Appends a feature. Throws InvalidArgument on a duplicate name.
  void add(std::string name, std::function<double(const NumericContext&)> fn);

  std::size_t size() const { return features_.size(); }
  std::vector<std::string> names() const;
  const std::vector<NumericFeature>& features() const { return features_; }

 private:
  std::vector<NumericFeature> features_;
};

/// Registry rebuilt from its names, for model loading. Throws DataError on a
/// name with no built-in definition.
NumericRegistry registry_from_names(const std::vector<std::string>& names);

std::vector<double> extract_numeric(const Essay& essay, const LexicalResources& resources,
                                    const NumericRegistry& registry);

}  // namespace cefr
