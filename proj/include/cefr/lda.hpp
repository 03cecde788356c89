#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cefr/binary_io.hpp"
#include "cefr/corpus.hpp"

namespace cefr {

struct LdaConfig {
  std::size_t topics = 30;
  /// Symmetric document-topic prior; non-positive selects 50 / topics.
  double alpha = 0.0;
  double beta = 0.01;
  std::size_t burn_in = 200;
  std::size_t sample_every = 10;
  std::size_t n_samples = 5;
  std::size_t infer_iters = 100;
  std::uint64_t seed = 0;
  bool track_likelihood = false;

  double effective_alpha() const {
    return alpha > 0.0 ? alpha : 50.0 / static_cast<double>(topics);
  }
};

/// Word-id documents over a fixed vocabulary.
struct LdaCorpus {
  std::vector<std::string> vocabulary;
  std::vector<std::vector<std::uint32_t>> docs;
};

/// Case-folded alphabetic tokens that occur in at least `min_doc_freq`
/// essays form the vocabulary (sorted).
LdaCorpus build_lda_corpus(std::span<const Essay> essays, std::size_t min_doc_freq = 2);

/// Word ids of an essay under `vocabulary` (sorted); unknown words dropped.
std::vector<std::uint32_t> lda_bag(const Essay& essay, const std::vector<std::string>& vocabulary);

class LdaModel {
 public:
  std::size_t topics() const { return topics_; }
  std::size_t vocab_size() const { return vocabulary_.size(); }
  std::size_t docs() const { return doc_topic_.size() / (topics_ ? topics_ : 1); }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }

  /// Averaged document-topic distribution of training document d; all zeros
  /// for excluded (empty) documents.
  std::span<const double> theta(std::size_t d) const {
    return std::span(theta_).subspan(d * topics_, topics_);
  }
  bool excluded(std::size_t d) const { return excluded_[d] != 0; }
  /// Topic-word distribution of topic t.
  std::vector<double> phi(std::size_t t) const;

  std::uint32_t topic_word(std::size_t t, std::size_t w) const { return topic_word_[t * vocab_size() + w]; }
  std::uint32_t topic_total(std::size_t t) const { return topic_total_[t]; }
  std::uint32_t doc_topic(std::size_t d, std::size_t t) const { return doc_topic_[d * topics_ + t]; }
  std::size_t doc_length(std::size_t d) const { return doc_length_[d]; }

  /// Collapsed joint log-likelihood log p(w, z) after each sweep (empty unless
  /// likelihood tracking was enabled).
  const std::vector<double>& log_likelihood() const { return log_likelihood_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// True when every count table agrees with the token assignments.
  bool counts_consistent() const;

  /// Gibbs sampling of one unseen document against frozen topic-word counts;
  /// theta is averaged over the final quarter of the sweeps. An empty
  /// document yields the uniform distribution.
  std::vector<double> infer_theta(std::span<const std::uint32_t> doc, std::size_t iters,
                                  std::uint64_t seed) const;

  /// Top `top_n` words per topic with probabilities.
  void dump_topics(std::ostream& out, std::size_t top_n = 20) const;

  /// Drops training-time state that prediction does not need.
  void serialize(BinaryWriter& w) const;
  static LdaModel deserialize(BinaryReader& r);

  using SweepObserver = std::function<void(std::size_t sweep, const LdaModel&)>;
  friend LdaModel fit_lda(const LdaCorpus& corpus, const LdaConfig& config,
                          const SweepObserver& observer);

 private:
  double joint_log_likelihood() const;

  std::size_t topics_ = 0;
  double alpha_ = 0.0;
  double beta_ = 0.0;
  std::vector<std::string> vocabulary_;
  std::vector<std::uint32_t> topic_word_;
  std::vector<std::uint32_t> topic_total_;
  std::vector<std::uint32_t> doc_topic_;
  std::vector<std::size_t> doc_length_;
  std::vector<std::uint8_t> excluded_;
  std::vector<double> theta_;
  // Training-time only.
  std::vector<std::vector<std::uint32_t>> words_;
  std::vector<std::vector<std::uint32_t>> assignments_;
  std::vector<double> log_likelihood_;
  std::vector<std::string> warnings_;
};

/// Collapsed Gibbs sampling. After `burn_in` sweeps, `n_samples` theta
/// snapshots taken every `sample_every` sweeps are averaged. Throws
/// InvalidArgument on an empty corpus or vocabulary or a non-positive
/// setting. Empty documents are excluded with a warning.
LdaModel fit_lda(const LdaCorpus& corpus, const LdaConfig& config,
                 const LdaModel::SweepObserver& observer = {});

/// Concatenation of per-model blocks, each either a distribution or zeros.
std::vector<double> topic_features(std::size_t doc, std::span<const LdaModel> models);

}  // namespace cefr
