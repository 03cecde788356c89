#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cefr/binary_io.hpp"
#include "cefr/corpus.hpp"
#include "cefr/pos.hpp"

namespace cefr {

inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kUnk = "<unk>";

struct LmPreprocessConfig {
  /// Words seen fewer than this many times are replaced by their POS tag.
  std::size_t rare_threshold = 10;
  std::string number_token = "<number>";
};

/// Case-folded token counts over a language-model training corpus.
using TokenCounts = std::map<std::string, std::size_t, std::less<>>;

TokenCounts count_tokens(std::span<const Essay> essays);

/// Lowercases words, maps numbers to the number token and words rarer than
/// the threshold to their upper-case POS tag name. `tags` must be parallel
/// to `tokens`.
Tokens preprocess_for_lm(std::span<const std::string> tokens, std::span<const PosTag> tags,
                         const TokenCounts& vocab_counts, const LmPreprocessConfig& config);

struct LmScore {
  double total_log10_prob = 0.0;
  double per_token_log10_prob = 0.0;
  std::size_t tokens = 0;
};

/// Interpolated modified Kneser-Ney n-gram model (order 1..3).
///
/// Raw counts are collected at every predicted position of each sentence
/// padded with order-1 begin markers and one end marker. Lower orders use
/// continuation counts except for n-grams that start with the begin marker.
/// Unigrams interpolate with a uniform distribution over the vocabulary, which
/// gives `<unk>` its probability mass.
class LanguageModel {
 public:
  static constexpr int kMaxOrder = 3;

  LanguageModel() = default;

  /// Throws InvalidArgument on an empty corpus, fewer tokens than `order`, or
  /// an order outside 1..3.
  static LanguageModel train(std::span<const Tokens> sentences, int order = 3);

  int order() const { return order_; }

  /// p(word | context); only the last order-1 context words are used. Words
  /// outside the vocabulary are scored as `<unk>`.
  double prob(std::span<const std::string> context, std::string_view word) const;

  /// Sums log10 probabilities over every sentence, each padded with begin
  /// markers and closed by the end marker. Throws DataError when the input
  /// has no tokens.
  LmScore score(std::span<const Tokens> sentences) const;

  /// Every word the model can predict: training words, `</s>`, `<unk>`.
  std::vector<std::string> vocabulary() const;

  /// Distinct contexts of length order-1 observed in training.
  std::vector<std::vector<std::string>> observed_contexts() const;

  /// Discounts for adjusted counts 1, 2, and 3+ at the given order.
  std::array<double, 3> discounts(int n) const { return discounts_.at(n - 1); }

  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Same training corpus re-estimated with a lower maximum order.
  LanguageModel truncated(int order) const;

  /// One line per n-gram: `log10 p<TAB>n-gram[<TAB>log10 back-off]`.
  void dump(std::ostream& out) const;

  void serialize(BinaryWriter& w) const;
  static LanguageModel deserialize(BinaryReader& r);

 private:
  using Key = std::uint64_t;
  using WordId = std::uint32_t;

  struct ContextStats {
    double total = 0;
    std::array<double, 3> n_k{};  // followers with adjusted count 1, 2, 3+
  };

  WordId lookup(std::string_view w) const;
  void build();
  double prob_ids(int n, const WordId* ctx_end, WordId w) const;
  double discount_for(int n, double adjusted) const;
  double gamma(int n, const ContextStats& c) const;

  int order_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> ids_;
  std::array<std::unordered_map<Key, std::uint64_t>, kMaxOrder> raw_;

  std::array<std::unordered_map<Key, double>, kMaxOrder> adjusted_;
  std::array<std::unordered_map<Key, ContextStats>, kMaxOrder> contexts_;
  std::array<std::array<double, 3>, kMaxOrder> discounts_{};
  std::vector<std::string> warnings_;
};

inline LanguageModel train_kn(std::span<const Tokens> corpus, int order = 3) {
  return LanguageModel::train(corpus, order);
}

inline LmScore score(const LanguageModel& lm, std::span<const Tokens> sentences) {
  return lm.score(sentences);
}

/// A language model bundled with the counts and settings used to preprocess
/// its own input.
struct EssayLanguageModel {
  LmPreprocessConfig config;
  TokenCounts vocab_counts;
  LanguageModel lm;

  /// Preprocessed sentences of an essay under this model's counts.
  std::vector<Tokens> preprocess(const Essay& essay, std::span<const PosTag> tags) const;
  LmScore score(const Essay& essay, std::span<const PosTag> tags) const;

  void serialize(BinaryWriter& w) const;
  static EssayLanguageModel deserialize(BinaryReader& r);
};

/// `tags[i]` holds the tags of `essays[i]`.
EssayLanguageModel train_essay_lm(std::span<const Essay> essays,
                                  std::span<const std::vector<PosTag>> tags,
                                  const LmPreprocessConfig& config, int order = 3);

/// [per-token log10 p under low, per-token log10 p under high, high - low].
std::array<double, 3> lm_features(const Essay& essay, std::span<const PosTag> tags,
                                  const EssayLanguageModel& low, const EssayLanguageModel& high);

}  // namespace cefr
