#include "cefr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "cefr/errors.hpp"
#include "cefr/rng.hpp"

namespace cefr {

namespace {

constexpr std::size_t kTopics = 12;
constexpr std::size_t kGeneral = kTopics;  // pseudo-topic shared by every essay
constexpr std::size_t kTiers = 3;
constexpr std::size_t kEmbeddingDim = 16;
constexpr std::uint64_t kLexiconSeed = 0x5eed1e7;

struct FunctionWords {
  PosTag tag;
  std::vector<std::string> words;
};

const std::vector<FunctionWords>& function_words() {
  static const std::vector<FunctionWords> fw = {
      {PosTag::DET, {"the", "a", "this", "my", "every", "some", "our"}},
      {PosTag::PRON, {"i", "you", "he", "she", "we", "they", "it"}},
      {PosTag::ADP, {"in", "on", "with", "for", "about", "from", "near"}},
      {PosTag::CONJ, {"and", "but", "or", "so"}},
      {PosTag::SCONJ, {"because", "although", "while", "when", "if", "since", "unless", "whereas"}},
      {PosTag::AUX, {"can", "will", "should", "must", "might", "would"}},
      {PosTag::ADV, {"very", "really", "often", "also", "still"}},
  };
  return fw;
}

struct Lexicon {
  // words[topic][tag slot][tier]; slots: noun, verb, adj, adv
  std::vector<std::array<std::array<std::vector<std::string>, kTiers>, 4>> words;
  std::vector<std::string> dictionary;
  std::vector<std::string> easy;
  std::vector<std::pair<std::string, PosTag>> tags;
  EmbeddingTable embeddings{kEmbeddingDim};
};

constexpr std::array<PosTag, 4> kSlotTags = {PosTag::NOUN, PosTag::VERB, PosTag::ADJ, PosTag::ADV};

std::string syllables(Rng& rng, std::size_t n) {
  static const std::array<std::string_view, 18> onsets = {"b", "d", "f", "g", "k", "l", "m",
                                                          "n", "p", "r", "s", "t", "v", "z",
                                                          "br", "st", "tr", "pl"};
  static const std::array<std::string_view, 4> vowels = {"a", "i", "o", "u"};
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    s += onsets[rng.below(onsets.size())];
    s += vowels[rng.below(vowels.size())];
  }
  return s;
}

std::string make_word(Rng& rng, std::size_t slot, std::size_t tier) {
  switch (slot) {
    case 0: {  // noun
      static const std::array<std::string_view, 3> suf = {"tion", "ment", "ness"};
      static const std::array<char, 5> coda = {'n', 'm', 't', 'k', 's'};
      if (tier == 0) return syllables(rng, 1 + rng.below(2)) + coda[rng.below(coda.size())];
      if (tier == 1) return syllables(rng, 2) + (rng.below(2) ? "n" : "");
      return syllables(rng, 2 + rng.below(2)) + std::string(suf[rng.below(suf.size())]);
    }
    case 1:  // verb
      return syllables(rng, tier + 1) + "ed";
    case 2: {  // adjective
      static const std::array<std::string_view, 2> hard = {"ous", "ive"};
      if (tier == 0) return syllables(rng, 1) + "sh";
      if (tier == 1) return syllables(rng, 2) + "ful";
      return syllables(rng, 3) + std::string(hard[rng.below(hard.size())]);
    }
    default:  // adverb
      return syllables(rng, tier + 1) + "ly";
  }
}

Lexicon build_lexicon() {
  Lexicon lex;
  Rng rng(kLexiconSeed);
  std::set<std::string> used;
  for (const auto& fw : function_words())
    for (const auto& w : fw.words) {
      used.insert(w);
      lex.tags.emplace_back(w, fw.tag);
      lex.easy.push_back(w);
    }
  // Words per (slot, tier) in a topic; adverbs only exist in the general pool.
  constexpr std::array<std::array<std::size_t, kTiers>, 4> per_topic = {
      {{8, 8, 8}, {4, 4, 4}, {3, 3, 3}, {0, 0, 0}}};
  constexpr std::array<std::array<std::size_t, kTiers>, 4> general = {
      {{10, 8, 6}, {6, 5, 4}, {5, 4, 3}, {5, 4, 3}}};

  lex.words.resize(kTopics + 1);
  for (std::size_t t = 0; t <= kTopics; ++t) {
    const auto& sizes = t == kGeneral ? general : per_topic;
    for (std::size_t slot = 0; slot < 4; ++slot)
      for (std::size_t tier = 0; tier < kTiers; ++tier)
        for (std::size_t i = 0; i < sizes[slot][tier]; ++i) {
          std::string w;
          do {
            w = make_word(rng, slot, tier);
          } while (!used.insert(w).second);
          lex.words[t][slot][tier].push_back(w);
          lex.tags.emplace_back(w, kSlotTags[slot]);
          if (tier == 0) lex.easy.push_back(w);
        }
  }
  lex.dictionary.assign(used.begin(), used.end());
  std::sort(lex.easy.begin(), lex.easy.end());
  std::sort(lex.tags.begin(), lex.tags.end());

  // Vectors: a centroid per topic and per function-word class, a shared
  // difficulty direction scaled by tier, and isotropic noise.
  auto gaussian = [&](double scale) {
    std::vector<double> v(kEmbeddingDim);
    for (auto& x : v) x = scale * rng.normal();
    return v;
  };
  const auto difficulty = gaussian(1.0);
  std::vector<std::vector<double>> topic_centroid;
  for (std::size_t t = 0; t <= kTopics; ++t) topic_centroid.push_back(gaussian(1.0));
  std::vector<std::vector<double>> class_centroid;
  for (std::size_t c = 0; c < function_words().size(); ++c) class_centroid.push_back(gaussian(1.0));
  auto emit = [&](const std::string& w, const std::vector<double>& centre, double tier) {
    auto v = gaussian(0.35);
    for (std::size_t d = 0; d < kEmbeddingDim; ++d) v[d] += centre[d] + 0.5 * tier * difficulty[d];
    lex.embeddings.add(w, v);
  };
  for (std::size_t c = 0; c < function_words().size(); ++c)
    for (const auto& w : function_words()[c].words) emit(w, class_centroid[c], 0.0);
  for (std::size_t t = 0; t <= kTopics; ++t)
    for (std::size_t slot = 0; slot < 4; ++slot)
      for (std::size_t tier = 0; tier < kTiers; ++tier)
        for (const auto& w : lex.words[t][slot][tier]) emit(w, topic_centroid[t], static_cast<double>(tier));
  return lex;
}

const Lexicon& lexicon() {
  static const Lexicon lex = build_lexicon();
  return lex;
}

double clamp_level(double x) { return std::clamp(x, 0.0, static_cast<double>(kNumLevels - 1)); }

// Linear interpolation of a per-level table at a fractional level.
double interpolate(const std::array<double, kNumLevels>& table, double x) {
  const auto lo = static_cast<std::size_t>(std::floor(x));
  if (lo >= kNumLevels - 1) return table[kNumLevels - 1];
  const double f = x - static_cast<double>(lo);
  return table[lo] * (1.0 - f) + table[lo + 1] * f;
}

std::string misspell(const std::string& w, Rng& rng, const std::set<std::string, std::less<>>& dict) {
  if (w.size() < 3) return w + w.back();
  for (int attempt = 0; attempt < 8; ++attempt) {
    std::string m = w;
    const std::size_t n = m.size();
    switch (rng.below(3)) {
      case 0: {
        const auto i = 1 + rng.below(n - 2);
        std::swap(m[i], m[i + 1 < n ? i + 1 : i - 1]);
        break;
      }
      case 1: {
        const auto i = 1 + rng.below(n - 1);
        m.insert(m.begin() + static_cast<std::ptrdiff_t>(i), m[i]);
        break;
      }
      default:
        m.erase(m.begin() + static_cast<std::ptrdiff_t>(1 + rng.below(n - 1)));
    }
    if (m != w && !dict.contains(m)) return m;
  }
  return w + w.back();
}

class EssayWriter {
 public:
  EssayWriter(Rng& rng, double shape, double spelling_rate, std::size_t topic)
      : rng_(rng), p_(shape), spelling_rate_(spelling_rate), topic_(topic) {}

  std::string sentence() {
    tokens_.clear();
    clause();
    std::size_t extra = 0;
    while (extra < 4 && rng_.uniform() < std::min(0.75, 0.12 + 0.11 * p_)) {
      const bool subordinate = rng_.uniform() < 0.25 + 0.12 * p_;
      if (subordinate && rng_.uniform() < 0.5) tokens_.push_back(",");
      function(subordinate ? PosTag::SCONJ : PosTag::CONJ);
      clause();
      ++extra;
    }
    tokens_.push_back(".");
    std::string out;
    for (const auto& t : tokens_) {
      if (!out.empty() && t != "." && t != ",") out += ' ';
      out += t;
    }
    if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
    return out;
  }

 private:
  void clause() {
    if (rng_.uniform() < 0.45) {
      function(PosTag::PRON);
    } else {
      noun_phrase();
    }
    if (rng_.uniform() < 0.1 + 0.05 * p_) function(PosTag::AUX);
    content(1);
    noun_phrase();
    if (rng_.uniform() < 0.05 + 0.07 * p_) content(3);
    if (rng_.uniform() < 0.1 + 0.1 * p_) {
      function(PosTag::ADP);
      if (rng_.uniform() < 0.08) {
        tokens_.push_back(std::to_string(1900 + rng_.below(125)));
      } else {
        noun_phrase();
      }
    }
  }

  void noun_phrase() {
    function(PosTag::DET);
    const double adj = std::min(0.7, 0.1 + 0.08 * p_);
    for (int i = 0; i < 2 && rng_.uniform() < adj; ++i) content(2);
    content(0);
  }

  void function(PosTag tag) {
    for (const auto& fw : function_words())
      if (fw.tag == tag) {
        tokens_.push_back(fw.words[rng_.below(fw.words.size())]);
        return;
      }
  }

  void content(std::size_t slot) {
    const auto& lex = lexicon();
    std::size_t topic = rng_.uniform() < 0.8 ? topic_ : kGeneral;
    if (lex.words[topic][slot][0].empty()) topic = kGeneral;
    const double u = rng_.uniform();
    const double hard = 0.02 + 0.06 * p_;
    const double medium = 0.15 + 0.07 * p_;
    const std::size_t tier = u < hard ? 2 : (u < hard + medium ? 1 : 0);
    const auto& pool = lex.words[topic][slot][tier];
    std::string w = pool[rng_.below(pool.size())];
    if (rng_.uniform() < spelling_rate_) w = misspell(w, rng_, dictionary());
    tokens_.push_back(std::move(w));
  }

  static const std::set<std::string, std::less<>>& dictionary() {
    static const std::set<std::string, std::less<>> d(lexicon().dictionary.begin(),
                                                      lexicon().dictionary.end());
    return d;
  }

  Rng& rng_;
  double p_;
  double spelling_rate_;
  std::size_t topic_;
  std::vector<std::string> tokens_;
};

std::vector<std::size_t> level_quotas(const std::array<double, kNumLevels>& dist, std::size_t n) {
  std::vector<std::size_t> q(kNumLevels);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kNumLevels; ++c) {
    const double exact = dist[c] * static_cast<double>(n);
    q[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += q[c];
    remainders.emplace_back(exact - static_cast<double>(q[c]), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++q[remainders[i % kNumLevels].second];
  return q;
}

}  // namespace

Dataset gen_synthetic(const SynthOptions& o) {
  if (o.n == 0) throw InvalidArgument("gen_synthetic: n must be positive");
  double total = 0.0;
  for (double p : o.distribution) {
    if (!(p >= 0.0)) throw InvalidArgument("gen_synthetic: negative level probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw InvalidArgument("gen_synthetic: level distribution sums to " + std::to_string(total));
  if (o.min_sentences == 0 || o.max_sentences < o.min_sentences)
    throw InvalidArgument("gen_synthetic: invalid sentence count range");

  const auto quotas = level_quotas(o.distribution, o.n);
  std::vector<Level> labels;
  for (std::size_t c = 0; c < kNumLevels; ++c) labels.insert(labels.end(), quotas[c], level_from_index(c));
  Rng label_rng(derive_seed(o.seed, "synthetic/labels"));
  label_rng.shuffle(labels.begin(), labels.end());

  std::vector<Essay> essays;
  essays.reserve(o.n);
  char id[32];
  for (std::size_t i = 0; i < o.n; ++i) {
    const Level level = labels[i];
    const double l = static_cast<double>(index_of(level));
    Rng rng(derive_seed(o.seed, "synthetic/essay/" + std::to_string(i)));
    const double shape = clamp_level(l + o.proficiency_noise * rng.normal());
    const double spell = clamp_level(l + o.spelling_noise * rng.normal());
    const auto topic_base = static_cast<std::size_t>(std::lround(shape));
    const std::size_t topic = (2 * topic_base + rng.below(4)) % kTopics;
    EssayWriter writer(rng, shape, interpolate(o.misspelling_rate, spell), topic);
    const std::size_t sentences = o.min_sentences + rng.below(o.max_sentences - o.min_sentences + 1);
    std::string text;
    for (std::size_t s = 0; s < sentences; ++s) {
      if (s) text += ' ';
      text += writer.sentence();
    }
    std::snprintf(id, sizeof id, "syn-%06zu", i + 1);
    essays.push_back(make_essay(id, std::move(text), level));
  }
  return Dataset(std::move(essays));
}

const SynthResources& synthetic_resources() {
  static const SynthResources res = [] {
    const auto& lex = lexicon();
    return SynthResources{lex.dictionary, lex.easy, lex.tags, lex.embeddings};
  }();
  return res;
}

void write_synthetic_resources(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ResourceError("cannot create " + dir.string() + ": " + ec.message());
  const auto& res = synthetic_resources();
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw ResourceError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("dictionary.txt");
    for (const auto& w : res.dictionary) out << w << '\n';
  }
  {
    auto out = open("easy_words.txt");
    for (const auto& w : res.easy_words) out << w << '\n';
  }
  {
    auto out = open("lexicon.tsv");
    for (const auto& [w, t] : res.lexicon) out << w << '\t' << to_string(t) << '\n';
  }
  {
    auto out = open("embeddings.txt");
    const auto& emb = res.embeddings;
    out << emb.size() << ' ' << emb.dim() << '\n';
    char buf[32];
    for (std::size_t r = 0; r < emb.size(); ++r) {
      out << emb.words()[r];
      for (double v : emb.vector(r)) {
        std::snprintf(buf, sizeof buf, " %.6f", v);
        out << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace cefr
