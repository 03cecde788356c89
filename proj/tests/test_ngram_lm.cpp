#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "cefr/errors.hpp"
#include "cefr/ngram_lm.hpp"
#include "cefr/rng.hpp"

using namespace cefr;

namespace {

using Gram = std::vector<std::string>;

// Straightforward modified Kneser-Ney over string n-grams, used as an oracle.
struct KnOracle {
  int order;
  std::set<std::string> vocab;
  std::vector<std::map<Gram, double>> adj;
  std::vector<std::array<double, 3>> disc;

  KnOracle(const std::vector<Tokens>& corpus, int n_order) : order(n_order) {
    std::vector<std::map<Gram, double>> raw(order + 1);
    vocab = {"<unk>", "</s>"};
    for (const auto& s : corpus) {
      if (s.empty()) continue;
      Gram seq(order - 1, "<s>");
      for (const auto& t : s) {
        seq.push_back(t);
        vocab.insert(t);
      }
      seq.push_back("</s>");
      for (std::size_t i = order - 1; i < seq.size(); ++i)
        for (int n = 1; n <= order; ++n) raw[n][Gram(seq.begin() + (i + 1 - n), seq.begin() + i + 1)] += 1;
    }
    adj.resize(order + 1);
    adj[order] = raw[order];
    for (int n = order - 1; n >= 1; --n) {
      for (const auto& [g, c] : raw[n + 1]) {
        Gram suffix(g.begin() + 1, g.end());
        if (suffix.front() != "<s>") adj[n][suffix] += 1;
      }
      for (const auto& [g, c] : raw[n])
        if (g.front() == "<s>") adj[n][g] = c;
    }
    disc.resize(order + 1);
    for (int n = 1; n <= order; ++n) {
      double coc[5] = {};
      for (const auto& [g, a] : adj[n])
        if (a <= 4) coc[int(a)] += 1;
      if (coc[1] == 0 || coc[2] == 0 || coc[3] == 0 || coc[4] == 0) {
        disc[n] = {0.75, 0.75, 0.75};
        continue;
      }
      const double y = coc[1] / (coc[1] + 2 * coc[2]);
      for (int k = 1; k <= 3; ++k)
        disc[n][k - 1] = std::clamp(k - (k + 1) * y * coc[k + 1] / coc[k], 1e-3, 1 - 1e-3);
    }
  }

  double d(int n, double a) const {
    if (a == 0) return 0;
    return disc[n][a >= 3 ? 2 : int(a) - 1];
  }

  double p(Gram ctx, const std::string& w0) const {
    const std::string w = vocab.count(w0) && w0 != "<s>" ? w0 : "<unk>";
    return p_n(order, ctx, w);
  }

  double p_n(int n, const Gram& ctx, const std::string& w) const {
    const Gram c(ctx.end() - (n - 1), ctx.end());
    const double lower = n == 1 ? 1.0 / double(vocab.size()) : p_n(n - 1, ctx, w);
    double total = 0, n1 = 0, n2 = 0, n3 = 0, a = 0;
    for (const auto& [g, cnt] : adj[n]) {
      if (!std::equal(c.begin(), c.end(), g.begin())) continue;
      total += cnt;
      (cnt == 1 ? n1 : cnt == 2 ? n2 : n3) += 1;
      if (g.back() == w) a = cnt;
    }
    if (total == 0) return lower;
    const double gamma = disc[n][0] * n1 + disc[n][1] * n2 + disc[n][2] * n3;
    return (std::max(a - d(n, a), 0.0) + gamma * lower) / total;
  }
};

std::vector<Tokens> zipf_corpus(std::uint64_t seed, std::size_t sentences, std::size_t vocab) {
  Rng rng(seed);
  std::vector<double> cdf(vocab);
  double s = 0;
  for (std::size_t i = 0; i < vocab; ++i) cdf[i] = (s += 1.0 / double(i + 1));
  std::vector<Tokens> out;
  for (std::size_t k = 0; k < sentences; ++k) {
    Tokens t;
    const std::size_t len = 1 + rng.below(8);
    std::size_t prev = 0;
    for (std::size_t j = 0; j < len; ++j) {
      // Mild first-order dependence so trigram counts are not uniform.
      std::size_t w = rng.uniform() < 0.3 ? (prev + 1) % vocab
                                          : std::size_t(std::lower_bound(cdf.begin(), cdf.end(),
                                                                         rng.uniform() * s) -
                                                        cdf.begin());
      w = std::min(w, vocab - 1);
      t.push_back("w" + std::to_string(w));
      prev = w;
    }
    out.push_back(std::move(t));
  }
  return out;
}

double vocab_sum(const LanguageModel& lm, const Gram& ctx) {
  double sum = 0;
  for (const auto& w : lm.vocabulary()) sum += lm.prob(ctx, w);
  return sum;
}

PosTag tag_named(std::string_view s) { return *parse_tag(s); }

}  // namespace

TEST_SUITE("ngram-lm") {
  TEST_CASE("hand-computed bigram table on a two-sentence corpus") {
    const std::vector<Tokens> corpus = {{"a", "b"}, {"a", "c"}};
    const auto lm = LanguageModel::train(corpus, 2);
    // Count-of-counts has zeros, so every discount is 0.75 and a warning is recorded.
    CHECK(lm.discounts(1)[0] == 0.75);
    CHECK(lm.discounts(2)[2] == 0.75);
    CHECK(!lm.warnings().empty());
    // Unigram continuation counts a=1 b=1 c=1 </s>=2, uniform floor 1/5.
    CHECK(lm.prob(Gram{"a"}, "b") == doctest::Approx(0.2525).epsilon(1e-12));
    CHECK(lm.prob(Gram{"a"}, "</s>") == doctest::Approx(0.2775).epsilon(1e-12));
    CHECK(lm.prob(Gram{"<s>"}, "a") == doctest::Approx(0.68875).epsilon(1e-12));
    // Context b was seen only before </s>.
    CHECK(lm.prob(Gram{"b"}, "</s>") == doctest::Approx(0.25 + 0.75 * 0.37).epsilon(1e-12));
    // Unknown context falls back to the unigram distribution.
    CHECK(lm.prob(Gram{"zzz"}, "a") == doctest::Approx(0.17).epsilon(1e-12));
  }

  TEST_CASE("probabilities match the brute-force oracle") {
    for (int order = 1; order <= 3; ++order) {
      const auto corpus = zipf_corpus(100 + order, 400, 40);
      const auto lm = LanguageModel::train(corpus, order);
      const KnOracle oracle(corpus, order);
      for (int n = 1; n <= order; ++n)
        for (int k = 0; k < 3; ++k) CHECK(lm.discounts(n)[k] == doctest::Approx(oracle.disc[n][k]).epsilon(1e-12));
      Rng rng(order);
      const auto vocab = lm.vocabulary();
      for (int i = 0; i < 300; ++i) {
        Gram ctx;
        for (int j = 0; j < order - 1; ++j)
          ctx.push_back(rng.uniform() < 0.1 ? "<s>" : vocab[rng.below(vocab.size())]);
        const std::string w = rng.uniform() < 0.05 ? "never-seen" : vocab[rng.below(vocab.size())];
        CHECK(lm.prob(ctx, w) == doctest::Approx(oracle.p(ctx, w)).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("discounts come from count-of-counts and lie in [0,1)") {
    const auto lm = LanguageModel::train(zipf_corpus(5, 3000, 2000), 3);
    CHECK(lm.warnings().empty());
    for (int n = 1; n <= 3; ++n)
      for (double d : lm.discounts(n)) {
        CHECK(d >= 0.0);
        CHECK(d < 1.0);
      }
  }

  TEST_CASE("normalization over observed contexts") {
    const auto lm = LanguageModel::train(zipf_corpus(9, 1500, 50), 3);
    const auto contexts = lm.observed_contexts();
    REQUIRE(contexts.size() > 100);
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
      const auto& ctx = contexts[rng.below(contexts.size())];
      CHECK(vocab_sum(lm, ctx) == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(vocab_sum(lm, Gram{"<s>", "<s>"}) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(vocab_sum(lm, Gram{"nope", "nada"}) == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("single repeated token") {
    const auto lm = LanguageModel::train(std::vector<Tokens>{{"a", "a", "a", "a"}}, 3);
    CHECK(lm.prob(Gram{"a", "a"}, "a") > lm.prob(Gram{"a", "a"}, "<unk>"));
    CHECK(vocab_sum(lm, Gram{"a", "a"}) == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("truncating to bigrams equals a bigram model") {
    const auto corpus = zipf_corpus(21, 500, 30);
    const auto tri = LanguageModel::train(corpus, 3);
    const auto bi = LanguageModel::train(corpus, 2);
    const auto cut = tri.truncated(2);
    const auto test = zipf_corpus(22, 50, 35);
    CHECK(cut.score(test).total_log10_prob == doctest::Approx(bi.score(test).total_log10_prob).epsilon(1e-12));
    for (int k = 0; k < 3; ++k) CHECK(cut.discounts(2)[k] == bi.discounts(2)[k]);
    CHECK_THROWS_AS(bi.truncated(3), InvalidArgument);
  }

  TEST_CASE("scoring") {
    const auto corpus = zipf_corpus(31, 300, 20);
    const auto lm = LanguageModel::train(corpus, 3);
    SUBCASE("one out-of-vocabulary token") {
      const auto s = lm.score(std::vector<Tokens>{{"qqq"}});
      const double expect = std::log10(lm.prob(Gram{"<s>", "<s>"}, "<unk>")) +
                            std::log10(lm.prob(Gram{"<s>", "<unk>"}, "</s>"));
      CHECK(s.total_log10_prob == doctest::Approx(expect).epsilon(1e-12));
      CHECK(s.tokens == 1);
    }
    SUBCASE("additive over sentences") {
      const Tokens s1 = {"w1", "w2", "w3"}, s2 = {"w0", "zzz"};
      const double both = lm.score(std::vector<Tokens>{s1, s2}).total_log10_prob;
      const double sep = lm.score(std::vector<Tokens>{s1}).total_log10_prob +
                         lm.score(std::vector<Tokens>{s2}).total_log10_prob;
      CHECK(both == doctest::Approx(sep).epsilon(1e-12));
      const auto sc = lm.score(std::vector<Tokens>{s1, s2});
      CHECK(sc.per_token_log10_prob == doctest::Approx(sc.total_log10_prob / 5.0));
    }
    SUBCASE("negative on every sentence") {
      for (const auto& s : zipf_corpus(32, 50, 25)) CHECK(lm.score(std::vector<Tokens>{s}).total_log10_prob < 0.0);
    }
    CHECK_THROWS_AS(lm.score(std::vector<Tokens>{}), DataError);
    CHECK_THROWS_AS(lm.score(std::vector<Tokens>{{}}), DataError);
  }

  TEST_CASE("training errors") {
    CHECK_THROWS_AS(LanguageModel::train(std::vector<Tokens>{}, 3), InvalidArgument);
    CHECK_THROWS_AS(LanguageModel::train(std::vector<Tokens>{{}}, 3), InvalidArgument);
    CHECK_THROWS_AS(LanguageModel::train(std::vector<Tokens>{{"a"}}, 3), InvalidArgument);
    CHECK_THROWS_AS(LanguageModel::train(std::vector<Tokens>{{"a", "b"}}, 4), InvalidArgument);
  }

  TEST_CASE("deterministic and serializable") {
    const auto corpus = zipf_corpus(41, 300, 25);
    const auto a = LanguageModel::train(corpus, 3);
    const auto b = LanguageModel::train(corpus, 3);
    std::ostringstream da, db;
    a.dump(da);
    b.dump(db);
    CHECK(da.str() == db.str());
    BinaryWriter w;
    a.serialize(w);
    BinaryReader r(w.bytes());
    const auto c = LanguageModel::deserialize(r);
    std::ostringstream dc;
    c.dump(dc);
    CHECK(dc.str() == da.str());
    CHECK(da.str().find("\\3-grams:") != std::string::npos);
  }

  TEST_CASE("preprocessing") {
    const TokenCounts counts = {{"nine", 9}, {"ten", 10}};
    const LmPreprocessConfig cfg;
    const std::vector<std::string> toks = {"42", "Nine", "ten", "3.5"};
    const std::vector<PosTag> tags = {tag_named("NUM"), tag_named("NOUN"), tag_named("NOUN"),
                                      tag_named("NUM")};
    const auto out = preprocess_for_lm(toks, tags, counts, cfg);
    CHECK(out == Tokens{"<number>", "NOUN", "ten", "<number>"});
    CHECK_THROWS_AS(preprocess_for_lm(toks, std::span(tags).first(2), counts, cfg), InvalidArgument);
  }

  TEST_CASE("essay features") {
    std::vector<Essay> essays;
    for (int i = 0; i < 20; ++i) essays.push_back(make_essay("e" + std::to_string(i), "The cat sat. The dog ran far away."));
    const LexiconTagger tagger(std::map<std::string, PosTag>{});
    std::vector<std::vector<PosTag>> tags;
    for (const auto& e : essays) tags.push_back(tagger.tag(e));
    const auto m = train_essay_lm(essays, tags, {}, 3);
    const auto f = lm_features(essays[0], tags[0], m, m);
    CHECK(f[2] == 0.0);
    CHECK(f[0] == doctest::Approx(m.score(essays[0], tags[0]).per_token_log10_prob));
    CHECK(f[0] < 0.0);
    BinaryWriter w;
    m.serialize(w);
    BinaryReader r(w.bytes());
    const auto m2 = EssayLanguageModel::deserialize(r);
    CHECK(m2.score(essays[1], tags[1]).total_log10_prob == m.score(essays[1], tags[1]).total_log10_prob);
  }
}
