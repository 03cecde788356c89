#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cefr/errors.hpp"
#include "cefr/pipeline.hpp"
#include "cefr/synthetic.hpp"

using namespace cefr;
namespace fs = std::filesystem;

namespace {

const fs::path& resource_dir() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "cefr_pipeline_res";
    fs::remove_all(d);
    write_synthetic_resources(d);
    return d;
  }();
  return dir;
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.seed = 5;
  c.resources.dictionary = resource_dir() / "dictionary.txt";
  c.resources.easy_words = resource_dir() / "easy_words.txt";
  c.resources.embeddings = resource_dir() / "embeddings.txt";
  c.resources.pos_lexicon = resource_dir() / "lexicon.tsv";
  c.lm.cross_fit_folds = 3;
  c.clusters.k = 8;
  c.topics.counts = {3, 5};
  c.topics.burn_in = 20;
  c.topics.n_samples = 2;
  c.topics.infer_iters = 20;
  c.model.n_rounds = 15;
  return c;
}

const Dataset& train_data() {
  static const Dataset ds = gen_synthetic({0.3, 0.25, 0.2, 0.15, 0.07, 0.03}, 240, 17);
  return ds;
}

const TrainedModel& trained() {
  static const TrainedModel m = train_model(train_data(), small_config());
  return m;
}

Dataset held_out() { return gen_synthetic(kDefaultLevelDistribution, 30, 99); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("layout arithmetic over all families") {
    const auto& p = trained().pipeline;
    const auto& l = p.layout();
    std::size_t off = 0;
    for (const auto& s : l.slices()) {
      CHECK(s.offset == off);
      off += s.width;
    }
    CHECK(off == l.width());
    const std::size_t expect = p.numeric_registry().size() + 3 + 8 + (3 + 5) + kNumTags + p.vectorizer()->size();
    CHECK(l.width() == expect);
    CHECK(l.find(Family::LanguageModel)->width == 3);
    CHECK(l.find(Family::Topics)->width == 8);
    CHECK(l.find(Family::Clusters)->width == 8);
    CHECK(l.find(Family::Pos)->width == kNumTags);
  }

  TEST_CASE("disabling a family removes its columns and changes the fingerprint") {
    auto c = small_config();
    c.families = {Family::Numeric, Family::Pos, Family::Bow};
    const auto r = fit_pipeline(train_data(), c);
    CHECK(r.pipeline.layout().find(Family::Topics) == nullptr);
    CHECK(r.pipeline.layout().find(Family::LanguageModel) == nullptr);
    CHECK(r.pipeline.fingerprint() != trained().pipeline.fingerprint());
    CHECK(c.fingerprint() != small_config().fingerprint());
  }

  TEST_CASE("per-family seeding makes subsets equal to column selections") {
    const auto full = fit_pipeline(train_data(), small_config());
    for (std::vector<Family> subset : {std::vector<Family>{Family::Numeric, Family::Clusters},
                                       std::vector<Family>{Family::LanguageModel, Family::Topics},
                                       std::vector<Family>{Family::Pos, Family::Bow, Family::Topics}}) {
      auto c = small_config();
      c.families = subset;
      const auto part = fit_pipeline(train_data(), c);
      CHECK(full.train_features.select_families(subset) == part.train_features);
      const auto test = held_out();
      CHECK(full.pipeline.transform(test.essays()).select_families(subset) ==
            part.pipeline.transform(test.essays()));
    }
  }

  TEST_CASE("fitting and transforming are deterministic and pure") {
    const auto a = fit_pipeline(train_data(), small_config());
    const auto b = fit_pipeline(train_data(), small_config());
    CHECK(a.pipeline.fingerprint() == b.pipeline.fingerprint());
    CHECK(a.train_features == b.train_features);
    const auto test = held_out();
    const auto x1 = a.pipeline.transform(test.essays());
    const auto x2 = a.pipeline.transform(test.essays());
    CHECK(x1 == x2);
    CHECK(x1.rows() == test.size());
    CHECK(a.train_features.rows() == train_data().size());
  }

  TEST_CASE("unseen vocabulary gives empty sparse blocks and valid dense blocks") {
    const auto& p = trained().pipeline;
    const std::vector<Essay> odd = {make_essay("odd", "Zzyzx qwrtp vvbnm. Grmph kkrrtt!")};
    const auto x = p.transform(odd);
    const auto* bow = p.layout().find(Family::Bow);
    const auto* clusters = p.layout().find(Family::Clusters);
    const auto* topics = p.layout().find(Family::Topics);
    for (std::size_t j = 0; j < bow->width; ++j) CHECK(x.at(0, bow->offset + j) == 0.0);
    for (std::size_t j = 0; j < clusters->width; ++j) CHECK(x.at(0, clusters->offset + j) == 0.0);
    for (std::size_t j = 0; j < topics->width; ++j) CHECK(std::isfinite(x.at(0, topics->offset + j)));
    const auto* lm = p.layout().find(Family::LanguageModel);
    CHECK(x.at(0, lm->offset) < 0.0);
  }

  TEST_CASE("model files round trip and are byte-stable") {
    const auto path = fs::temp_directory_path() / "cefr_model.bin";
    save_model(trained(), path);
    const auto loaded = load_model(path);
    const auto test = held_out();
    const auto a = trained().predict(test.essays()), b = loaded.predict(test.essays());
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t k = 0; k < kNumLevels; ++k) CHECK(std::abs(a[i][k] - b[i][k]) <= 1e-12);
    const auto again = train_model(train_data(), small_config());
    CHECK(model_bytes(again) == read_file(path));
    CHECK(model_bytes(loaded) == read_file(path));
    fs::remove(path);
  }

  TEST_CASE("damaged model files raise distinct errors") {
    const std::string bytes = model_bytes(trained());
    CHECK_THROWS_AS(model_from_bytes(std::string_view(bytes).substr(0, bytes.size() - 1)), ModelTruncatedError);
    CHECK_THROWS_AS(model_from_bytes(std::string_view(bytes).substr(0, 10)), ModelTruncatedError);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(model_from_bytes(bad_magic), ModelFormatError);
    std::string bad_version = bytes;
    bad_version[8] = 7;
    CHECK_THROWS_AS(model_from_bytes(bad_version), ModelVersionError);
    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x20;
    CHECK_THROWS_AS(model_from_bytes(flipped), ModelFormatError);
    CHECK_THROWS_AS(load_model("/nonexistent/model.bin"), ResourceError);
  }

  TEST_CASE("loading against a mismatched config") {
    const std::string bytes = model_bytes(trained());
    auto other = small_config();
    other.families = {Family::Numeric, Family::Bow};
    CHECK_THROWS_AS(model_from_bytes(bytes, &other), FingerprintMismatch);
    const auto same = small_config();
    CHECK_NOTHROW(model_from_bytes(bytes, &same));
    // Paths and the seed do not shape the layout.
    auto moved = small_config();
    moved.seed = 1234;
    CHECK_NOTHROW(model_from_bytes(bytes, &moved));
  }

  TEST_CASE("fit errors") {
    auto c = small_config();
    c.resources.embeddings = "/nonexistent/vectors.txt";
    try {
      fit_pipeline(train_data(), c);
      FAIL("expected ResourceError");
    } catch (const ResourceError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("clusters") != std::string::npos);
      CHECK(msg.find("/nonexistent/vectors.txt") != std::string::npos);
    }

    std::vector<Essay> low;
    for (const auto& e : train_data().essays())
      if (index_of(*e.label) <= 2) low.push_back(e);
    CHECK_THROWS_AS(fit_pipeline(Dataset(low), small_config()), DataError);

    auto numeric_only = small_config();
    numeric_only.families = {Family::Numeric};
    CHECK_NOTHROW(fit_pipeline(Dataset(low), numeric_only));

    std::vector<Essay> unlabeled = {make_essay("u1", "One two."), make_essay("u2", "Three four.")};
    CHECK_THROWS_AS(fit_pipeline(Dataset(unlabeled), small_config()), DataError);
  }

  TEST_CASE("configuration files") {
    const auto cfg = parse_config(R"(
families: [numeric, lda, bow]
seed: 9
resources:
  dictionary: words/dict.txt
topics:
  counts: [4, 6]
model:
  kind: logreg
  class_weights: uniform
)",
                                  "/base");
    CHECK(cfg.families == std::vector<Family>{Family::Numeric, Family::Topics, Family::Bow});
    CHECK(cfg.seed == 9);
    CHECK(cfg.resources.dictionary == fs::path("/base/words/dict.txt"));
    CHECK(cfg.topics.counts == std::vector<std::size_t>{4, 6});
    CHECK(cfg.model.kind == ClassifierKind::LogReg);
    CHECK(!cfg.model.class_weights);
    CHECK_THROWS_AS(parse_config("seeds: 3\n"), DataError);
    CHECK_THROWS_AS(parse_config("model:\n  depth_max: 3\n"), DataError);
    CHECK_THROWS_AS(parse_config("families: [numeric, words]\n"), DataError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), ResourceError);
    CHECK(parse_family_list("lm,pos") == std::vector<Family>{Family::LanguageModel, Family::Pos});
    CHECK(parse_family_list(" lm,,pos, lm") == std::vector<Family>{Family::LanguageModel, Family::Pos});
    CHECK_THROWS_AS(parse_family_list("lm,nouns"), DataError);
  }

  TEST_CASE("feature cache") {
    const auto path = fs::temp_directory_path() / "cefr_cache.bin";
    const auto& x = fit_pipeline(train_data(), small_config()).train_features;
    save_feature_cache(path, x, 77);
    const auto hit = load_feature_cache(path, 77, x.fingerprint());
    REQUIRE(hit.has_value());
    CHECK(*hit == x);
    CHECK(!load_feature_cache(path, 78).has_value());
    CHECK(!load_feature_cache(path, 77, x.fingerprint() + 1).has_value());
    fs::remove(path);
    CHECK(!load_feature_cache(path, 77).has_value());
  }

  TEST_CASE("logistic classifier through the pipeline") {
    auto c = small_config();
    c.families = {Family::Numeric, Family::Pos};
    c.model.kind = ClassifierKind::LogReg;
    const auto m = train_model(train_data(), c);
    const auto test = held_out();
    for (const auto& p : m.predict(test.essays())) {
      double s = 0;
      for (double v : p) s += v;
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
    const auto back = model_from_bytes(model_bytes(m));
    CHECK(back.predict(test.essays()) == m.predict(test.essays()));
  }
}
