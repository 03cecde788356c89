#include "cefr/lda.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>

#include "cefr/errors.hpp"
#include "cefr/rng.hpp"

namespace cefr {

namespace {

constexpr std::uint32_t kLdaFormat = 1;

std::size_t sample_discrete(std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

}  // namespace

LdaCorpus build_lda_corpus(std::span<const Essay> essays, std::size_t min_doc_freq) {
  std::map<std::string, std::size_t> df;
  for (const auto& e : essays) {
    std::set<std::string> seen;
    for (const auto& t : e.tokens)
      if (is_alphabetic_token(t)) seen.insert(fold_case(t));
    for (const auto& w : seen) ++df[w];
  }
  LdaCorpus corpus;
  for (const auto& [w, n] : df)
    if (n >= min_doc_freq) corpus.vocabulary.push_back(w);
  for (const auto& e : essays) corpus.docs.push_back(lda_bag(e, corpus.vocabulary));
  return corpus;
}

std::vector<std::uint32_t> lda_bag(const Essay& essay, const std::vector<std::string>& vocabulary) {
  std::vector<std::uint32_t> bag;
  for (const auto& t : essay.tokens) {
    if (!is_alphabetic_token(t)) continue;
    const std::string w = fold_case(t);
    auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), w);
    if (it != vocabulary.end() && *it == w)
      bag.push_back(static_cast<std::uint32_t>(it - vocabulary.begin()));
  }
  return bag;
}

std::vector<double> LdaModel::phi(std::size_t t) const {
  const std::size_t v = vocab_size();
  std::vector<double> out(v);
  const double denom = topic_total_[t] + static_cast<double>(v) * beta_;
  for (std::size_t w = 0; w < v; ++w) out[w] = (topic_word(t, w) + beta_) / denom;
  return out;
}

bool LdaModel::counts_consistent() const {
  const std::size_t v = vocab_size();
  std::vector<std::uint32_t> tw(topics_ * v, 0), tt(topics_, 0), dt(doc_topic_.size(), 0);
  for (std::size_t d = 0; d < words_.size(); ++d) {
    if (assignments_[d].size() != words_[d].size()) return false;
    for (std::size_t i = 0; i < words_[d].size(); ++i) {
      const auto z = assignments_[d][i];
      ++tw[z * v + words_[d][i]];
      ++tt[z];
      ++dt[d * topics_ + z];
    }
    std::uint32_t row = 0;
    for (std::size_t t = 0; t < topics_; ++t) row += doc_topic_[d * topics_ + t];
    if (row != doc_length_[d]) return false;
  }
  return tw == topic_word_ && tt == topic_total_ && dt == doc_topic_;
}

double LdaModel::joint_log_likelihood() const {
  const double v = static_cast<double>(vocab_size());
  const double t = static_cast<double>(topics_);
  double ll = t * (std::lgamma(v * beta_) - v * std::lgamma(beta_));
  for (std::size_t k = 0; k < topics_; ++k) {
    for (std::size_t w = 0; w < vocab_size(); ++w) ll += std::lgamma(topic_word(k, w) + beta_);
    ll -= std::lgamma(topic_total_[k] + v * beta_);
  }
  for (std::size_t d = 0; d < docs(); ++d) {
    if (excluded_[d]) continue;
    ll += std::lgamma(t * alpha_) - t * std::lgamma(alpha_);
    for (std::size_t k = 0; k < topics_; ++k) ll += std::lgamma(doc_topic(d, k) + alpha_);
    ll -= std::lgamma(static_cast<double>(doc_length_[d]) + t * alpha_);
  }
  return ll;
}

LdaModel fit_lda(const LdaCorpus& corpus, const LdaConfig& config,
                 const LdaModel::SweepObserver& observer) {
  if (corpus.docs.empty()) throw InvalidArgument("fit_lda: empty corpus");
  if (corpus.vocabulary.empty()) throw InvalidArgument("fit_lda: empty vocabulary");
  if (config.topics == 0 || config.beta <= 0.0 || config.sample_every == 0 ||
      config.n_samples == 0)
    throw InvalidArgument("fit_lda: topics, beta, sample_every and n_samples must be positive");

  LdaModel m;
  const std::size_t T = config.topics;
  const std::size_t V = corpus.vocabulary.size();
  const std::size_t D = corpus.docs.size();
  m.topics_ = T;
  m.alpha_ = config.effective_alpha();
  m.beta_ = config.beta;
  m.vocabulary_ = corpus.vocabulary;
  m.topic_word_.assign(T * V, 0);
  m.topic_total_.assign(T, 0);
  m.doc_topic_.assign(D * T, 0);
  m.doc_length_.assign(D, 0);
  m.excluded_.assign(D, 0);
  m.theta_.assign(D * T, 0.0);
  m.words_ = corpus.docs;
  m.assignments_.resize(D);

  Rng rng(config.seed);
  for (std::size_t d = 0; d < D; ++d) {
    const auto& doc = m.words_[d];
    if (doc.empty()) {
      m.excluded_[d] = 1;
      m.warnings_.push_back("document " + std::to_string(d) +
                            " is empty after vocabulary filtering; excluded");
      continue;
    }
    m.doc_length_[d] = doc.size();
    for (auto w : doc) {
      if (w >= V) throw InvalidArgument("fit_lda: word id out of range");
      const auto z = static_cast<std::uint32_t>(rng.below(T));
      m.assignments_[d].push_back(z);
      ++m.topic_word_[z * V + w];
      ++m.topic_total_[z];
      ++m.doc_topic_[d * T + z];
    }
  }

  const double vbeta = static_cast<double>(V) * m.beta_;
  const std::size_t sweeps = config.burn_in + config.sample_every * config.n_samples;
  std::vector<double> cumulative(T);
  std::size_t snapshots = 0;
  for (std::size_t sweep = 1; sweep <= sweeps; ++sweep) {
    for (std::size_t d = 0; d < D; ++d) {
      const auto& doc = m.words_[d];
      auto& zs = m.assignments_[d];
      std::uint32_t* dt = m.doc_topic_.data() + d * T;
      for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::uint32_t w = doc[i];
        std::uint32_t z = zs[i];
        --m.topic_word_[z * V + w];
        --m.topic_total_[z];
        --dt[z];
        double acc = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
          acc += (dt[t] + m.alpha_) * (m.topic_word_[t * V + w] + m.beta_) /
                 (m.topic_total_[t] + vbeta);
          cumulative[t] = acc;
        }
        z = static_cast<std::uint32_t>(sample_discrete(cumulative, rng));
        zs[i] = z;
        ++m.topic_word_[z * V + w];
        ++m.topic_total_[z];
        ++dt[z];
      }
    }
    if (config.track_likelihood) m.log_likelihood_.push_back(m.joint_log_likelihood());
    if (sweep > config.burn_in && (sweep - config.burn_in) % config.sample_every == 0 &&
        snapshots < config.n_samples) {
      ++snapshots;
      const double talpha = static_cast<double>(T) * m.alpha_;
      for (std::size_t d = 0; d < D; ++d) {
        if (m.excluded_[d]) continue;
        for (std::size_t t = 0; t < T; ++t)
          m.theta_[d * T + t] += (m.doc_topic_[d * T + t] + m.alpha_) /
                                 (static_cast<double>(m.doc_length_[d]) + talpha);
      }
    }
    if (observer) observer(sweep, m);
  }
  for (auto& x : m.theta_) x /= static_cast<double>(snapshots);
  return m;
}

std::vector<double> LdaModel::infer_theta(std::span<const std::uint32_t> doc, std::size_t iters,
                                          std::uint64_t seed) const {
  const std::size_t T = topics_;
  const std::size_t V = vocab_size();
  if (doc.empty() || iters == 0)
    return std::vector<double>(T, 1.0 / static_cast<double>(T));
  Rng rng(seed);
  std::vector<std::uint32_t> dt(T, 0);
  std::vector<std::uint32_t> zs(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (doc[i] >= V) throw InvalidArgument("infer_theta: word id out of range");
    zs[i] = static_cast<std::uint32_t>(rng.below(T));
    ++dt[zs[i]];
  }
  const double vbeta = static_cast<double>(V) * beta_;
  std::vector<double> word_weight(T), cumulative(T), theta(T, 0.0);
  const std::size_t start = iters - std::max<std::size_t>(1, iters / 4);
  std::size_t averaged = 0;
  const double denom = static_cast<double>(doc.size()) + static_cast<double>(T) * alpha_;
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      --dt[zs[i]];
      double acc = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        acc += (dt[t] + alpha_) * (topic_word_[t * V + doc[i]] + beta_) / (topic_total_[t] + vbeta);
        cumulative[t] = acc;
      }
      zs[i] = static_cast<std::uint32_t>(sample_discrete(cumulative, rng));
      ++dt[zs[i]];
    }
    if (it >= start) {
      ++averaged;
      for (std::size_t t = 0; t < T; ++t) theta[t] += (dt[t] + alpha_) / denom;
    }
  }
  for (auto& x : theta) x /= static_cast<double>(averaged);
  return theta;
}

void LdaModel::dump_topics(std::ostream& out, std::size_t top_n) const {
  out << std::setprecision(6);
  for (std::size_t t = 0; t < topics_; ++t) {
    const auto p = phi(t);
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t n = std::min(top_n, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return p[a] != p[b] ? p[a] > p[b] : a < b;
                      });
    out << "topic " << t << ":";
    for (std::size_t i = 0; i < n; ++i) out << ' ' << vocabulary_[order[i]] << ':' << p[order[i]];
    out << '\n';
  }
}

void LdaModel::serialize(BinaryWriter& w) const {
  w.u32(kLdaFormat);
  w.u64(topics_);
  w.f64(alpha_);
  w.f64(beta_);
  w.strs(vocabulary_);
  w.u64(topic_word_.size());
  for (auto c : topic_word_) w.u32(c);
}

LdaModel LdaModel::deserialize(BinaryReader& r) {
  if (const auto v = r.u32(); v != kLdaFormat)
    throw ModelVersionError("topic model section version " + std::to_string(v));
  LdaModel m;
  m.topics_ = r.u64();
  m.alpha_ = r.f64();
  m.beta_ = r.f64();
  m.vocabulary_ = r.strs();
  const auto n = r.count(4);
  if (m.topics_ == 0 || n != m.topics_ * m.vocabulary_.size())
    throw ModelFormatError("topic model dimensions inconsistent");
  m.topic_word_.resize(n);
  for (auto& c : m.topic_word_) c = r.u32();
  m.topic_total_.assign(m.topics_, 0);
  for (std::size_t t = 0; t < m.topics_; ++t)
    for (std::size_t w = 0; w < m.vocabulary_.size(); ++w)
      m.topic_total_[t] += m.topic_word_[t * m.vocabulary_.size() + w];
  return m;
}

std::vector<double> topic_features(std::size_t doc, std::span<const LdaModel> models) {
  std::vector<double> out;
  for (const auto& m : models) {
    if (doc >= m.docs() || m.excluded(doc)) {
      out.insert(out.end(), m.topics(), 0.0);
    } else {
      const auto th = m.theta(doc);
      out.insert(out.end(), th.begin(), th.end());
    }
  }
  return out;
}

}  // namespace cefr
