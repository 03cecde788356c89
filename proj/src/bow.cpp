#include "cefr/bow.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>

#include "cefr/errors.hpp"

namespace cefr {

std::vector<std::string> bow_terms(std::span<const std::string> tokens, bool unigrams,
                                   bool bigrams) {
  std::vector<std::string> words;
  for (const auto& t : tokens)
    if (is_word_token(t)) words.push_back(fold_case(t));
  std::vector<std::string> terms;
  if (unigrams) terms = words;
  if (bigrams)
    for (std::size_t i = 1; i < words.size(); ++i) terms.push_back(words[i - 1] + ' ' + words[i]);
  return terms;
}

Vectorizer Vectorizer::fit(std::span<const Tokens> corpus, Options opts) {
  if (corpus.empty()) throw InvalidArgument("fit_vectorizer: empty corpus");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    const auto terms = bow_terms(doc, !opts.bigrams_only, true);
    const std::set<std::string> distinct(terms.begin(), terms.end());
    for (const auto& t : distinct) ++df[t];
  }
  Vectorizer v;
  v.opts_ = opts;
  v.n_docs_ = corpus.size();
  const double n = static_cast<double>(corpus.size());
  for (const auto& [term, count] : df) {
    if (count < opts.min_df) continue;
    v.terms_.push_back(term);
    v.df_.push_back(count);
    v.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return v;
}

std::ptrdiff_t Vectorizer::column(const std::string& term) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), term);
  if (it == terms_.end() || *it != term) return -1;
  return it - terms_.begin();
}

SparseVector Vectorizer::transform(std::span<const std::string> tokens) const {
  std::map<std::uint32_t, double> tf;
  for (const auto& t : bow_terms(tokens, !opts_.bigrams_only, true))
    if (const auto col = column(t); col >= 0) tf[static_cast<std::uint32_t>(col)] += 1.0;
  SparseVector out;
  out.reserve(tf.size());
  for (const auto& [col, count] : tf) out.emplace_back(col, count * idf_[col]);
  return out;
}

void Vectorizer::dump(std::ostream& out) const {
  out << std::setprecision(10);
  for (std::size_t i = 0; i < terms_.size(); ++i)
    out << terms_[i] << '\t' << i << '\t' << df_[i] << '\t' << idf_[i] << '\n';
}

void Vectorizer::serialize(BinaryWriter& w) const {
  w.u64(opts_.min_df);
  w.u8(opts_.bigrams_only ? 1 : 0);
  w.u64(n_docs_);
  w.strs(terms_);
  w.u64(df_.size());
  for (auto d : df_) w.u64(d);
  w.f64s(idf_);
}

Vectorizer Vectorizer::deserialize(BinaryReader& r) {
  Vectorizer v;
  v.opts_.min_df = r.u64();
  v.opts_.bigrams_only = r.u8() != 0;
  v.n_docs_ = r.u64();
  v.terms_ = r.strs();
  const auto n = r.count(8);
  for (std::uint64_t i = 0; i < n; ++i) v.df_.push_back(r.u64());
  v.idf_ = r.f64s();
  if (v.df_.size() != v.terms_.size() || v.idf_.size() != v.terms_.size())
    throw ModelFormatError("vectorizer tables have inconsistent sizes");
  return v;
}

}  // namespace cefr
