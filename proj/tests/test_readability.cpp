#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cefr/errors.hpp"
#include "cefr/readability.hpp"
#include "cefr/rng.hpp"

using namespace cefr;

namespace {

TextStats stats(std::size_t words, std::size_t sentences, std::size_t syllables = 0,
                std::size_t complex = 0, std::size_t letters = 0) {
  TextStats s;
  s.words = words;
  s.sentences = sentences;
  s.syllables = syllables;
  s.complex_words = complex;
  s.letters = letters;
  return s;
}

}  // namespace

TEST_SUITE("readability") {
  TEST_CASE("Flesch reading ease") {
    CHECK(flesch_reading_ease(stats(3, 1, 3)) == doctest::Approx(119.19).epsilon(1e-9));
    CHECK(flesch_reading_ease(stats(100, 100, 100)) == doctest::Approx(121.22).epsilon(1e-9));
    CHECK_THROWS_AS(flesch_reading_ease(stats(3, 0, 3)), DegenerateInput);
  }

  TEST_CASE("Gunning fog") {
    CHECK(gunning_fog(stats(3, 1, 3, 0)) == doctest::Approx(1.2));
    CHECK(gunning_fog(stats(20, 2, 30, 2)) == doctest::Approx(8.0));
    CHECK(gunning_fog(stats(1, 1, 3, 1)) == doctest::Approx(40.4));
    CHECK(gunning_fog(stats(20, 2, 30, 3)) > gunning_fog(stats(20, 2, 30, 2)));
  }

  TEST_CASE("Coleman-Liau") {
    CHECK(coleman_liau(stats(100, 5, 0, 0, 500)) == doctest::Approx(12.12));
    CHECK(coleman_liau(stats(10, 1, 0, 0, 0)) == doctest::Approx(-18.76));
    CHECK_THROWS_AS(coleman_liau(stats(0, 1)), DegenerateInput);
  }

  TEST_CASE("index formulas agree with direct evaluation on random stats") {
    Rng rng(17);
    for (int i = 0; i < 500; ++i) {
      const std::size_t w = 1 + rng.below(300), s = 1 + rng.below(30);
      const std::size_t syl = w + rng.below(2 * w), cx = rng.below(w + 1), let = w + rng.below(6 * w);
      const TextStats t = stats(w, s, syl, cx, let);
      const double W = double(w), S = double(s);
      CHECK(flesch_reading_ease(t) == doctest::Approx(206.835 - 1.015 * W / S - 84.6 * double(syl) / W));
      CHECK(flesch_kincaid_grade(t) == doctest::Approx(0.39 * W / S + 11.8 * double(syl) / W - 15.59));
      CHECK(gunning_fog(t) == doctest::Approx(0.4 * (W / S + 100.0 * double(cx) / W)));
      CHECK(coleman_liau(t) ==
            doctest::Approx(0.0588 * 100.0 * double(let) / W - 0.296 * 100.0 * S / W - 15.8));
    }
  }

  TEST_CASE("text stats of a small essay") {
    const Essay e = make_essay("e", "The cat sat.");
    const TextStats s = compute_text_stats(e);
    CHECK(s.tokens == 4);
    CHECK(s.words == 3);
    CHECK(s.sentences == 1);
    CHECK(s.syllables == 3);
    CHECK(s.letters == 9);
    CHECK(s.punctuation == 1);
    CHECK(s.complex_words <= s.words);
    CHECK(flesch_reading_ease(s) == doctest::Approx(119.19));
    CHECK(gunning_fog(s) == doctest::Approx(1.2));
  }

  TEST_CASE("lexical counts") {
    LexicalResources res;
    res.dictionary = {"the", "cat"};
    CHECK(lexical_counts(make_essay("a", "teh cat"), res).misspelled == 1);
    CHECK(lexical_counts(make_essay("b", "the cat the"), res).duplicate == 1);
    CHECK(lexical_counts(make_essay("c", ""), res) == LexicalCounts{});
    res.easy_words = {"beautiful"};
    const auto c = lexical_counts(make_essay("d", "beautiful wonderful cat"), res);
    CHECK(c.difficult == 1);
  }

  TEST_CASE("low idf counts tokens below the mean idf") {
    const Dataset ds({make_essay("a", "common rare"), make_essay("b", "common"), make_essay("c", "common")});
    LexicalResources res;
    res.set_idf(build_idf_table(ds));
    CHECK(res.idf_table.at("common") == doctest::Approx(std::log(4.0 / 4.0) + 1.0));
    CHECK(res.idf_table.at("rare") == doctest::Approx(std::log(4.0 / 2.0) + 1.0));
    CHECK(lexical_counts(ds[0], res).low_idf == 1);
  }

  TEST_CASE("numeric vector: fixed length, determinism, degenerate flag") {
    LexicalResources res;
    const auto reg = NumericRegistry::standard();
    const auto a = extract_numeric(make_essay("a", "The cat sat. It was happy!"), res, reg);
    const auto b = extract_numeric(make_essay("b", "The cat sat. It was happy!"), res, reg);
    const auto empty = extract_numeric(make_essay("c", ""), res, reg);
    CHECK(a.size() == reg.size());
    CHECK(empty.size() == reg.size());
    CHECK(a == b);
    const auto names = reg.names();
    for (std::size_t i = 0; i < names.size(); ++i) {
      CHECK(std::isfinite(empty[i]));
      if (names[i] == "degenerate")
        CHECK(empty[i] == 1.0);
      else
        CHECK(empty[i] == 0.0);
    }
  }

  TEST_CASE("registry options drop resource features and rebuild from names") {
    const auto full = NumericRegistry::standard();
    const auto lean = NumericRegistry::standard({false, false, false});
    CHECK(lean.size() + 5 == full.size());
    const auto rebuilt = registry_from_names(full.names());
    CHECK(rebuilt.names() == full.names());
    CHECK_THROWS_AS(registry_from_names({"no_such_feature"}), DataError);
    auto reg = NumericRegistry::standard();
    CHECK_THROWS_AS(reg.add("words", [](const NumericContext&) { return 0.0; }), InvalidArgument);
  }

  TEST_CASE("word lists fold case and skip comments") {
    const auto path = std::filesystem::temp_directory_path() / "cefr_words.txt";
    {
      std::ofstream out(path);
      out << "# header\nHello\n\nworld  # trailing\n";
    }
    const auto words = load_word_list(path);
    CHECK(words.contains("hello"));
    CHECK(words.contains("world"));
    CHECK(words.size() == 2);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_word_list("/nonexistent/words.txt"), ResourceError);
  }
}
