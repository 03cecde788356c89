#include "cefr/readability.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cefr/errors.hpp"

namespace cefr {

namespace {

void require_words(const TextStats& s, const char* what) {
  if (s.words == 0) throw DegenerateInput(std::string(what) + ": zero words");
}

void require_sentences(const TextStats& s, const char* what) {
  if (s.sentences == 0) throw DegenerateInput(std::string(what) + ": zero sentences");
}

double ratio(std::size_t a, std::size_t b) {
  return static_cast<double>(a) / static_cast<double>(b);
}

}  // namespace

double TextStats::characters_per_word() const {
  require_words(*this, "characters_per_word");
  return ratio(letters, words);
}

double TextStats::words_per_sentence() const {
  require_sentences(*this, "words_per_sentence");
  return ratio(words, sentences);
}

TextStats compute_text_stats(const Essay& essay) {
  TextStats s;
  s.tokens = essay.tokens.size();
  s.sentences = essay.sentence_count();
  WordSet types;
  for (const auto& tok : essay.tokens) {
    if (!is_word_token(tok)) {
      ++s.punctuation;
      if (tok == ",") ++s.commas;
      continue;
    }
    ++s.words;
    if (is_numeric_token(tok)) ++s.numbers;
    const std::size_t letters = count_letters(tok);
    s.letters += letters;
    const int syl = letters > 0 ? count_syllables(tok) : 1;
    s.syllables += static_cast<std::size_t>(syl);
    if (letters > 0 && syl >= 3) ++s.complex_words;
    if (syl == 1) ++s.monosyllabic_words;
    if (letters > 6) ++s.long_words;
    types.insert(fold_case(tok));
  }
  s.word_types = types.size();
  for (std::size_t i = 0; i < essay.sentence_count(); ++i) {
    const auto sent = essay.sentence(i);
    const auto n = static_cast<std::size_t>(std::count_if(
        sent.begin(), sent.end(), [](const std::string& t) { return is_word_token(t); }));
    s.max_sentence_words = std::max(s.max_sentence_words, n);
  }
  return s;
}

double flesch_reading_ease(const TextStats& s) {
  require_words(s, "flesch_reading_ease");
  require_sentences(s, "flesch_reading_ease");
  return 206.835 - 1.015 * ratio(s.words, s.sentences) - 84.6 * ratio(s.syllables, s.words);
}

double flesch_kincaid_grade(const TextStats& s) {
  require_words(s, "flesch_kincaid_grade");
  require_sentences(s, "flesch_kincaid_grade");
  return 0.39 * ratio(s.words, s.sentences) + 11.8 * ratio(s.syllables, s.words) - 15.59;
}

double gunning_fog(const TextStats& s) {
  require_words(s, "gunning_fog");
  require_sentences(s, "gunning_fog");
  return 0.4 * (ratio(s.words, s.sentences) + 100.0 * ratio(s.complex_words, s.words));
}

double coleman_liau(const TextStats& s) {
  require_words(s, "coleman_liau");
  const double letters_per_100 = 100.0 * ratio(s.letters, s.words);
  const double sentences_per_100 = 100.0 * ratio(s.sentences, s.words);
  return 0.0588 * letters_per_100 - 0.296 * sentences_per_100 - 15.8;
}

double smog_index(const TextStats& s) {
  require_sentences(s, "smog_index");
  return 1.043 * std::sqrt(30.0 * ratio(s.complex_words, s.sentences)) + 3.1291;
}

double automated_readability_index(const TextStats& s) {
  require_words(s, "automated_readability_index");
  require_sentences(s, "automated_readability_index");
  return 4.71 * ratio(s.letters, s.words) + 0.5 * ratio(s.words, s.sentences) - 21.43;
}

double lix(const TextStats& s) {
  require_words(s, "lix");
  require_sentences(s, "lix");
  return ratio(s.words, s.sentences) + 100.0 * ratio(s.long_words, s.words);
}

WordSet load_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot open word list " + path.string());
  WordSet words;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    words.insert(fold_case(std::string_view(line).substr(b, e - b + 1)));
  }
  return words;
}

std::map<std::string, double> build_idf_table(const Dataset& ds) {
  const double n = static_cast<double>(ds.size());
  std::map<std::string, double> idf;
  for (const auto& [term, entry] : ds.vocabulary()) {
    if (!is_word_token(term)) continue;
    idf[term] = std::log((1.0 + n) / (1.0 + static_cast<double>(entry.doc_freq))) + 1.0;
  }
  return idf;
}

void LexicalResources::set_idf(std::map<std::string, double> table) {
  idf_table = std::move(table);
  double sum = 0.0;
  for (const auto& [_, v] : idf_table) sum += v;
  idf_mean_ = idf_table.empty() ? 0.0 : sum / static_cast<double>(idf_table.size());
}

LexicalCounts lexical_counts(const Essay& essay, const LexicalResources& resources) {
  LexicalCounts c;
  const double mean_idf = resources.mean_idf();
  WordSet types;
  std::size_t alpha_tokens = 0;
  for (const auto& tok : essay.tokens) {
    if (!is_word_token(tok)) continue;
    const std::string folded = fold_case(tok);
    if (is_alphabetic_token(tok)) {
      ++alpha_tokens;
      types.insert(folded);
      if (!resources.dictionary.empty() && !resources.dictionary.contains(folded))
        ++c.misspelled;
      if (count_syllables(tok) >= 3 && !resources.easy_words.empty() &&
          !resources.easy_words.contains(folded))
        ++c.difficult;
    }
    if (!resources.idf_table.empty()) {
      if (auto it = resources.idf_table.find(folded);
          it != resources.idf_table.end() && it->second < mean_idf)
        ++c.low_idf;
    }
  }
  c.duplicate = alpha_tokens - types.size();
  return c;
}

namespace {

using Fn = std::function<double(const NumericContext&)>;

double count(std::size_t v) { return static_cast<double>(v); }

// Features evaluated only on non-degenerate stats.
Fn guarded(double (*f)(const TextStats&)) {
  return [f](const NumericContext& c) { return c.stats.degenerate() ? 0.0 : f(c.stats); };
}

Fn guarded_ratio(std::size_t TextStats::*num, std::size_t TextStats::*den) {
  return [num, den](const NumericContext& c) {
    return c.stats.degenerate() ? 0.0 : ratio(c.stats.*num, c.stats.*den);
  };
}

Fn stat(std::size_t TextStats::*field) {
  return [field](const NumericContext& c) { return count(c.stats.*field); };
}

const std::vector<NumericFeature>& builtin_features() {
  static const std::vector<NumericFeature> features = {
      {"tokens", stat(&TextStats::tokens)},
      {"words", stat(&TextStats::words)},
      {"sentences", stat(&TextStats::sentences)},
      {"letters", stat(&TextStats::letters)},
      {"syllables", stat(&TextStats::syllables)},
      {"complex_words", stat(&TextStats::complex_words)},
      {"long_words", stat(&TextStats::long_words)},
      {"monosyllabic_words", stat(&TextStats::monosyllabic_words)},
      {"punctuation", stat(&TextStats::punctuation)},
      {"numbers", stat(&TextStats::numbers)},
      {"commas", stat(&TextStats::commas)},
      {"word_types", stat(&TextStats::word_types)},
      {"max_sentence_words", stat(&TextStats::max_sentence_words)},
      {"characters_per_word", guarded_ratio(&TextStats::letters, &TextStats::words)},
      {"words_per_sentence", guarded_ratio(&TextStats::words, &TextStats::sentences)},
      {"syllables_per_word", guarded_ratio(&TextStats::syllables, &TextStats::words)},
      {"complex_word_ratio", guarded_ratio(&TextStats::complex_words, &TextStats::words)},
      {"long_word_ratio", guarded_ratio(&TextStats::long_words, &TextStats::words)},
      {"type_token_ratio", guarded_ratio(&TextStats::word_types, &TextStats::words)},
      {"flesch_reading_ease", guarded(flesch_reading_ease)},
      {"flesch_kincaid_grade", guarded(flesch_kincaid_grade)},
      {"coleman_liau", guarded(coleman_liau)},
      {"gunning_fog", guarded(gunning_fog)},
      {"smog_index", guarded(smog_index)},
      {"automated_readability_index", guarded(automated_readability_index)},
      {"lix", guarded(lix)},
      {"difficult_words", [](const NumericContext& c) { return count(c.lexical.difficult); }},
      {"misspelled_words", [](const NumericContext& c) { return count(c.lexical.misspelled); }},
      {"duplicate_words", [](const NumericContext& c) { return count(c.lexical.duplicate); }},
      {"low_idf_words", [](const NumericContext& c) { return count(c.lexical.low_idf); }},
      {"misspelled_ratio",
       [](const NumericContext& c) {
         return c.stats.degenerate() ? 0.0 : ratio(c.lexical.misspelled, c.stats.words);
       }},
      {"difficult_ratio",
       [](const NumericContext& c) {
         return c.stats.degenerate() ? 0.0 : ratio(c.lexical.difficult, c.stats.words);
       }},
      {"degenerate", [](const NumericContext& c) { return c.stats.degenerate() ? 1.0 : 0.0; }},
  };
  return features;
}

}  // namespace

NumericRegistry NumericRegistry::standard(Options opts) {
  NumericRegistry reg;
  for (const auto& f : builtin_features()) {
    if (!opts.spelling && f.name.starts_with("misspelled_")) continue;
    if (!opts.difficulty && f.name.starts_with("difficult_")) continue;
    if (!opts.idf && f.name == "low_idf_words") continue;
    reg.features_.push_back(f);
  }
  return reg;
}

void NumericRegistry::add(std::string name, Fn fn) {
  for (const auto& f : features_)
    if (f.name == name) throw InvalidArgument("duplicate numeric feature '" + name + "'");
  features_.push_back({std::move(name), std::move(fn)});
}

std::vector<std::string> NumericRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

NumericRegistry registry_from_names(const std::vector<std::string>& names) {
  NumericRegistry out;
  const auto& builtins = builtin_features();
  for (const auto& name : names) {
    auto it = std::find_if(builtins.begin(), builtins.end(),
                           [&](const NumericFeature& f) { return f.name == name; });
    if (it == builtins.end())
      throw DataError("numeric feature '" + name + "' has no built-in definition");
    out.add(it->name, it->compute);
  }
  return out;
}

std::vector<double> extract_numeric(const Essay& essay, const LexicalResources& resources,
                                    const NumericRegistry& registry) {
  const TextStats stats = compute_text_stats(essay);
  const LexicalCounts lexical = lexical_counts(essay, resources);
  const NumericContext ctx{essay, stats, lexical};
  std::vector<double> out;
  out.reserve(registry.size());
  for (const auto& f : registry.features()) {
    const double v = f.compute(ctx);
    out.push_back(std::isfinite(v) ? v : 0.0);
  }
  return out;
}

}  // namespace cefr
