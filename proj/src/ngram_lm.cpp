#include "cefr/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "cefr/errors.hpp"

namespace cefr {

namespace {

constexpr int kIdBits = 21;
constexpr std::uint64_t kIdMask = (1ULL << kIdBits) - 1;
constexpr std::uint32_t kUnkId = 0;
constexpr std::uint32_t kBosId = 1;
constexpr std::uint32_t kEosId = 2;
constexpr double kFallbackDiscount = 0.75;
constexpr double kMinDiscount = 1e-3;
constexpr double kMaxDiscount = 1.0 - 1e-3;
constexpr std::uint32_t kLmFormat = 1;

std::uint64_t pack(const std::uint32_t* ids, int n) {
  std::uint64_t k = 0;
  for (int i = 0; i < n; ++i) k = (k << kIdBits) | ids[i];
  return k;
}

std::uint32_t first_word(std::uint64_t key, int n) {
  return static_cast<std::uint32_t>((key >> (kIdBits * (n - 1))) & kIdMask);
}

template <class Map>
std::vector<typename Map::key_type> sorted_keys(const Map& m) {
  std::vector<typename Map::key_type> keys;
  keys.reserve(m.size());
  for (const auto& [k, _] : m) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

TokenCounts count_tokens(std::span<const Essay> essays) {
  TokenCounts counts;
  for (const auto& e : essays)
    for (const auto& t : e.tokens) ++counts[fold_case(t)];
  return counts;
}

Tokens preprocess_for_lm(std::span<const std::string> tokens, std::span<const PosTag> tags,
                         const TokenCounts& vocab_counts, const LmPreprocessConfig& config) {
  if (tokens.size() != tags.size())
    throw InvalidArgument("preprocess_for_lm: " + std::to_string(tags.size()) + " tags for " +
                          std::to_string(tokens.size()) + " tokens");
  Tokens out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string folded = fold_case(tokens[i]);
    if (is_numeric_token(folded)) {
      out.push_back(config.number_token);
      continue;
    }
    auto it = vocab_counts.find(folded);
    const std::size_t c = it == vocab_counts.end() ? 0 : it->second;
    if (c < config.rare_threshold)
      out.emplace_back(to_string(tags[i]));
    else
      out.push_back(std::move(folded));
  }
  return out;
}

LanguageModel LanguageModel::train(std::span<const Tokens> sentences, int order) {
  if (order < 1 || order > kMaxOrder)
    throw InvalidArgument("language model order must be in 1..3, got " + std::to_string(order));
  std::size_t total = 0;
  for (const auto& s : sentences) total += s.size();
  if (sentences.empty() || total == 0)
    throw InvalidArgument("language model corpus is empty");
  if (total < static_cast<std::size_t>(order))
    throw InvalidArgument("language model corpus has fewer tokens than the model order");

  LanguageModel lm;
  lm.order_ = order;
  lm.words_ = {std::string(kUnk), std::string(kBos), std::string(kEos)};
  for (std::uint32_t i = 0; i < lm.words_.size(); ++i) lm.ids_[lm.words_[i]] = i;

  std::vector<std::uint32_t> seq;
  for (const auto& sentence : sentences) {
    if (sentence.empty()) continue;
    seq.assign(static_cast<std::size_t>(order - 1), kBosId);
    for (const auto& tok : sentence) {
      auto [it, inserted] = lm.ids_.try_emplace(tok, static_cast<std::uint32_t>(lm.words_.size()));
      if (inserted) {
        if (lm.words_.size() > kIdMask) throw InvalidArgument("language model vocabulary too large");
        lm.words_.push_back(tok);
      }
      seq.push_back(it->second);
    }
    seq.push_back(kEosId);
    for (std::size_t i = static_cast<std::size_t>(order - 1); i < seq.size(); ++i)
      for (int n = 1; n <= order; ++n) ++lm.raw_[n - 1][pack(&seq[i + 1 - n], n)];
  }
  lm.build();
  return lm;
}

void LanguageModel::build() {
  const int top = order_;
  for (auto& m : adjusted_) m.clear();
  for (auto& m : contexts_) m.clear();
  warnings_.clear();

  for (const auto& [k, c] : raw_[top - 1]) adjusted_[top - 1][k] = static_cast<double>(c);
  for (int n = top - 1; n >= 1; --n) {
    auto& adj = adjusted_[n - 1];
    const std::uint64_t mask = (1ULL << (kIdBits * n)) - 1;
    for (const auto& [k, c] : raw_[n]) {
      const std::uint64_t suffix = k & mask;
      if (first_word(suffix, n) == kBosId) continue;
      adj[suffix] += 1.0;
    }
    for (const auto& [k, c] : raw_[n - 1])
      if (first_word(k, n) == kBosId) adj[k] = static_cast<double>(c);
  }

  for (int n = 1; n <= top; ++n) {
    std::array<std::uint64_t, 5> coc{};
    for (const auto& [k, a] : adjusted_[n - 1]) {
      const auto ai = static_cast<std::uint64_t>(a);
      if (ai >= 1 && ai <= 4) ++coc[ai];
    }
    auto& d = discounts_[n - 1];
    if (coc[1] == 0 || coc[2] == 0 || coc[3] == 0 || coc[4] == 0) {
      d = {kFallbackDiscount, kFallbackDiscount, kFallbackDiscount};
      warnings_.push_back("order " + std::to_string(n) +
                          ": count-of-counts has a zero entry; using absolute discount 0.75");
    } else {
      const double y = static_cast<double>(coc[1]) / static_cast<double>(coc[1] + 2 * coc[2]);
      for (int k = 1; k <= 3; ++k) {
        const double dk = k - (k + 1) * y * static_cast<double>(coc[k + 1]) /
                                  static_cast<double>(coc[k]);
        d[k - 1] = std::clamp(dk, kMinDiscount, kMaxDiscount);
      }
    }

    auto& ctx = contexts_[n - 1];
    for (const auto& [k, a] : adjusted_[n - 1]) {
      auto& s = ctx[n == 1 ? 0 : k >> kIdBits];
      s.total += a;
      s.n_k[a >= 3.0 ? 2 : static_cast<std::size_t>(a) - 1] += 1.0;
    }
  }
}

double LanguageModel::discount_for(int n, double adjusted) const {
  if (adjusted <= 0.0) return 0.0;
  const auto& d = discounts_[n - 1];
  return adjusted >= 3.0 ? d[2] : d[static_cast<std::size_t>(adjusted) - 1];
}

double LanguageModel::gamma(int n, const ContextStats& c) const {
  const auto& d = discounts_[n - 1];
  return d[0] * c.n_k[0] + d[1] * c.n_k[1] + d[2] * c.n_k[2];
}

double LanguageModel::prob_ids(int n, const WordId* ctx_end, WordId w) const {
  const Key ctx_key = n == 1 ? 0 : pack(ctx_end - (n - 1), n - 1);
  const double lower =
      n == 1 ? 1.0 / static_cast<double>(words_.size() - 1) : prob_ids(n - 1, ctx_end, w);
  auto it = contexts_[n - 1].find(ctx_key);
  if (it == contexts_[n - 1].end()) return lower;
  const ContextStats& c = it->second;
  const Key key = n == 1 ? w : (ctx_key << kIdBits) | w;
  double a = 0.0;
  if (auto a_it = adjusted_[n - 1].find(key); a_it != adjusted_[n - 1].end()) a = a_it->second;
  return (std::max(a - discount_for(n, a), 0.0) + gamma(n, c) * lower) / c.total;
}

LanguageModel::WordId LanguageModel::lookup(std::string_view w) const {
  auto it = ids_.find(std::string(w));
  if (it == ids_.end() || it->second == kBosId) return kUnkId;
  return it->second;
}

double LanguageModel::prob(std::span<const std::string> context, std::string_view word) const {
  std::vector<WordId> buf(static_cast<std::size_t>(order_ - 1), kBosId);
  const std::size_t take = std::min(context.size(), buf.size());
  for (std::size_t i = 0; i < take; ++i) {
    const auto& c = context[context.size() - take + i];
    buf[buf.size() - take + i] = c == kBos ? kBosId : lookup(c);
  }
  buf.push_back(lookup(word));
  return prob_ids(order_, buf.data() + buf.size() - 1, buf.back());
}

LmScore LanguageModel::score(std::span<const Tokens> sentences) const {
  LmScore out;
  std::vector<WordId> seq;
  for (const auto& sentence : sentences) {
    if (sentence.empty()) continue;
    seq.assign(static_cast<std::size_t>(order_ - 1), kBosId);
    for (const auto& t : sentence) seq.push_back(lookup(t));
    seq.push_back(kEosId);
    for (std::size_t i = static_cast<std::size_t>(order_ - 1); i < seq.size(); ++i)
      out.total_log10_prob += std::log10(prob_ids(order_, seq.data() + i, seq[i]));
    out.tokens += sentence.size();
  }
  if (out.tokens == 0) throw DataError("unscorable essay: no tokens");
  out.per_token_log10_prob = out.total_log10_prob / static_cast<double>(out.tokens);
  return out;
}

std::vector<std::string> LanguageModel::vocabulary() const {
  std::vector<std::string> out;
  out.reserve(words_.size() - 1);
  for (WordId i = 0; i < words_.size(); ++i)
    if (i != kBosId) out.push_back(words_[i]);
  return out;
}

std::vector<std::vector<std::string>> LanguageModel::observed_contexts() const {
  std::vector<std::vector<std::string>> out;
  if (order_ < 2) return {{}};
  const int len = order_ - 1;
  for (Key k : sorted_keys(contexts_[order_ - 1])) {
    std::vector<std::string> ctx(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) ctx[static_cast<std::size_t>(i)] = words_[first_word(k, len - i) & kIdMask];
    out.push_back(std::move(ctx));
  }
  return out;
}

LanguageModel LanguageModel::truncated(int order) const {
  if (order < 1 || order > order_)
    throw InvalidArgument("truncated: order must be in 1.." + std::to_string(order_));
  LanguageModel lm;
  lm.order_ = order;
  lm.words_ = words_;
  lm.ids_ = ids_;
  for (int n = 0; n < order; ++n) lm.raw_[n] = raw_[n];
  lm.build();
  return lm;
}

void LanguageModel::dump(std::ostream& out) const {
  std::vector<WordId> ids;
  out << std::setprecision(7);
  for (int n = 1; n <= order_; ++n) {
    out << "\\" << n << "-grams:\n";
    for (Key k : sorted_keys(adjusted_[n - 1])) {
      ids.clear();
      for (int i = n; i >= 1; --i) ids.push_back(first_word(k, i) & kIdMask);
      out << std::log10(prob_ids(n, ids.data() + n - 1, ids.back())) << '\t';
      for (int i = 0; i < n; ++i) out << (i ? " " : "") << words_[ids[static_cast<std::size_t>(i)]];
      if (n < order_) {
        if (auto it = contexts_[n].find(k); it != contexts_[n].end())
          out << '\t' << std::log10(gamma(n + 1, it->second) / it->second.total);
      }
      out << '\n';
    }
  }
  out << "\\end\\\n";
}

void LanguageModel::serialize(BinaryWriter& w) const {
  w.u32(kLmFormat);
  w.u32(static_cast<std::uint32_t>(order_));
  w.strs(words_);
  for (int n = 0; n < order_; ++n) {
    w.u64(raw_[n].size());
    for (Key k : sorted_keys(raw_[n])) {
      w.u64(k);
      w.u64(raw_[n].at(k));
    }
  }
}

LanguageModel LanguageModel::deserialize(BinaryReader& r) {
  if (const auto v = r.u32(); v != kLmFormat)
    throw ModelVersionError("language model section version " + std::to_string(v));
  LanguageModel lm;
  lm.order_ = static_cast<int>(r.u32());
  if (lm.order_ < 1 || lm.order_ > kMaxOrder) throw ModelFormatError("bad language model order");
  lm.words_ = r.strs();
  if (lm.words_.size() < 3) throw ModelFormatError("language model vocabulary too small");
  for (std::uint32_t i = 0; i < lm.words_.size(); ++i) lm.ids_[lm.words_[i]] = i;
  for (int n = 0; n < lm.order_; ++n) {
    const auto count = r.count(16);
    for (std::uint64_t i = 0; i < count; ++i) {
      const Key k = r.u64();
      lm.raw_[n][k] = r.u64();
    }
  }
  lm.build();
  return lm;
}

std::vector<Tokens> EssayLanguageModel::preprocess(const Essay& essay,
                                                   std::span<const PosTag> tags) const {
  if (tags.size() != essay.tokens.size())
    throw InvalidArgument("essay '" + essay.id + "': tag count differs from token count");
  std::vector<Tokens> out;
  out.reserve(essay.sentence_count());
  std::size_t begin = 0;
  for (std::size_t end : essay.sentence_ends) {
    out.push_back(preprocess_for_lm(std::span(essay.tokens).subspan(begin, end - begin),
                                    tags.subspan(begin, end - begin), vocab_counts, config));
    begin = end;
  }
  return out;
}

LmScore EssayLanguageModel::score(const Essay& essay, std::span<const PosTag> tags) const {
  return lm.score(preprocess(essay, tags));
}

void EssayLanguageModel::serialize(BinaryWriter& w) const {
  w.u64(config.rare_threshold);
  w.str(config.number_token);
  w.u64(vocab_counts.size());
  for (const auto& [tok, c] : vocab_counts) {
    w.str(tok);
    w.u64(c);
  }
  lm.serialize(w);
}

EssayLanguageModel EssayLanguageModel::deserialize(BinaryReader& r) {
  EssayLanguageModel m;
  m.config.rare_threshold = r.u64();
  m.config.number_token = r.str();
  const auto n = r.count(16);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string tok = r.str();
    m.vocab_counts[std::move(tok)] = r.u64();
  }
  m.lm = LanguageModel::deserialize(r);
  return m;
}

EssayLanguageModel train_essay_lm(std::span<const Essay> essays,
                                  std::span<const std::vector<PosTag>> tags,
                                  const LmPreprocessConfig& config, int order) {
  if (essays.size() != tags.size())
    throw InvalidArgument("train_essay_lm: essays and tag lists differ in length");
  EssayLanguageModel m;
  m.config = config;
  m.vocab_counts = count_tokens(essays);
  std::vector<Tokens> sentences;
  for (std::size_t i = 0; i < essays.size(); ++i)
    for (auto& s : m.preprocess(essays[i], tags[i])) sentences.push_back(std::move(s));
  m.lm = LanguageModel::train(sentences, order);
  return m;
}

std::array<double, 3> lm_features(const Essay& essay, std::span<const PosTag> tags,
                                  const EssayLanguageModel& low, const EssayLanguageModel& high) {
  const double lo = low.score(essay, tags).per_token_log10_prob;
  const double hi = high.score(essay, tags).per_token_log10_prob;
  return {lo, hi, hi - lo};
}

}  // namespace cefr
