#include <doctest.h>

#include <filesystem>
#include <set>

#include "cefr/errors.hpp"
#include "cefr/readability.hpp"
#include "cefr/synthetic.hpp"

using namespace cefr;

namespace {

struct LevelMeans {
  std::array<double, kNumLevels> words_per_sentence{};
  std::array<double, kNumLevels> connector_rate{};
  std::array<double, kNumLevels> misspelled_rate{};
  std::array<double, kNumLevels> difficult_rate{};
  std::array<std::size_t, kNumLevels> count{};
};

LevelMeans level_means(const Dataset& ds) {
  const auto& res = synthetic_resources();
  LexicalResources lex;
  lex.dictionary = WordSet(res.dictionary.begin(), res.dictionary.end());
  lex.easy_words = WordSet(res.easy_words.begin(), res.easy_words.end());
  std::set<std::string> connectors;
  for (const auto& [w, t] : res.lexicon)
    if (t == PosTag::CONJ || t == PosTag::SCONJ) connectors.insert(w);
  LevelMeans m;
  for (const auto& e : ds.essays()) {
    const auto c = index_of(*e.label);
    const auto s = compute_text_stats(e);
    const auto l = lexical_counts(e, lex);
    std::size_t conn = 0;
    for (const auto& t : e.tokens) conn += connectors.contains(fold_case(t));
    m.words_per_sentence[c] += double(s.words) / double(s.sentences);
    m.connector_rate[c] += double(conn) / double(s.words);
    m.misspelled_rate[c] += double(l.misspelled) / double(s.words);
    m.difficult_rate[c] += double(l.difficult) / double(s.words);
    ++m.count[c];
  }
  for (std::size_t c = 0; c < kNumLevels; ++c) {
    const double n = double(m.count[c]);
    m.words_per_sentence[c] /= n;
    m.connector_rate[c] /= n;
    m.misspelled_rate[c] /= n;
    m.difficult_rate[c] /= n;
  }
  return m;
}

template <class A>
bool strictly_increasing(const A& a) {
  for (std::size_t i = 1; i < a.size(); ++i)
    if (!(a[i] > a[i - 1])) return false;
  return true;
}

}  // namespace

TEST_SUITE("synthetic") {
  TEST_CASE("label proportions at n = 10000") {
    const auto ds = gen_synthetic(kDefaultLevelDistribution, 10000, 3);
    REQUIRE(ds.size() == 10000);
    std::array<std::size_t, kNumLevels> counts{};
    for (const auto& e : ds.essays()) ++counts[index_of(*e.label)];
    for (std::size_t c = 0; c < kNumLevels; ++c)
      CHECK(std::abs(double(counts[c]) / 10000.0 - kDefaultLevelDistribution[c]) <= 0.02);
  }

  TEST_CASE("level-dependent statistics") {
    // A flat distribution keeps every level well populated.
    const auto ds = gen_synthetic({1 / 6.0, 1 / 6.0, 1 / 6.0, 1 / 6.0, 1 / 6.0, 1 / 6.0}, 1800, 5);
    const auto m = level_means(ds);
    CHECK(strictly_increasing(m.words_per_sentence));
    CHECK(strictly_increasing(m.connector_rate));
    CHECK(strictly_increasing(m.difficult_rate));
    auto neg = m.misspelled_rate;
    for (auto& v : neg) v = -v;
    CHECK(strictly_increasing(neg));
  }

  TEST_CASE("seeded determinism") {
    const auto a = gen_synthetic(kDefaultLevelDistribution, 300, 9);
    const auto b = gen_synthetic(kDefaultLevelDistribution, 300, 9);
    const auto c = gen_synthetic(kDefaultLevelDistribution, 300, 10);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id == b[i].id);
      CHECK(a[i].text == b[i].text);
      CHECK(a[i].label == b[i].label);
      differs = differs || a[i].text != c[i].text;
    }
    CHECK(differs);
    std::set<std::string> ids;
    for (const auto& e : a.essays()) ids.insert(e.id);
    CHECK(ids.size() == a.size());
  }

  TEST_CASE("argument errors") {
    CHECK_THROWS_AS(gen_synthetic(kDefaultLevelDistribution, 0, 1), InvalidArgument);
    CHECK_THROWS_AS(gen_synthetic({0.5, 0.5, 0.5, 0, 0, 0}, 10, 1), InvalidArgument);
    CHECK_THROWS_AS(gen_synthetic({1.2, -0.2, 0, 0, 0, 0}, 10, 1), InvalidArgument);
  }

  TEST_CASE("resource files") {
    const auto dir = std::filesystem::temp_directory_path() / "cefr_synth_res";
    std::filesystem::remove_all(dir);
    write_synthetic_resources(dir);
    for (const char* f : {"dictionary.txt", "easy_words.txt", "lexicon.tsv", "embeddings.txt"})
      CHECK(std::filesystem::exists(dir / f));
    const auto emb = load_embeddings(dir / "embeddings.txt");
    CHECK(emb.size() == synthetic_resources().embeddings.size());
    CHECK(load_word_list(dir / "dictionary.txt").size() == synthetic_resources().dictionary.size());
    std::filesystem::remove_all(dir);
  }
}
