#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cefr/errors.hpp"
#include "cefr/experiment.hpp"
#include "cefr/rng.hpp"
#include "cefr/synthetic.hpp"

using namespace cefr;
namespace fs = std::filesystem;

namespace {

const fs::path& resource_dir() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "cefr_experiment_res";
    fs::remove_all(d);
    write_synthetic_resources(d);
    return d;
  }();
  return dir;
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.seed = 3;
  c.resources.dictionary = resource_dir() / "dictionary.txt";
  c.resources.easy_words = resource_dir() / "easy_words.txt";
  c.resources.embeddings = resource_dir() / "embeddings.txt";
  c.resources.pos_lexicon = resource_dir() / "lexicon.tsv";
  c.lm.cross_fit_folds = 2;
  c.clusters.k = 6;
  c.topics.counts = {3};
  c.topics.burn_in = 10;
  c.topics.n_samples = 2;
  c.topics.infer_iters = 10;
  c.model.n_rounds = 10;
  c.model.min_samples_leaf = 3;
  return c;
}

const Dataset& data() {
  static const Dataset ds = gen_synthetic({0.3, 0.25, 0.2, 0.12, 0.08, 0.05}, 180, 23);
  return ds;
}

// Every essay carries a token naming its level amid shared filler.
Dataset revealing_data() {
  Rng rng(4);
  const char* filler[] = {"we", "walk", "home", "today", "and", "then", "read", "books"};
  std::vector<Essay> essays;
  for (std::size_t i = 0; i < 120; ++i) {
    const auto level = static_cast<Level>(i % kNumLevels);
    std::string text;
    for (int j = 0; j < 8; ++j) text += std::string(filler[rng.below(8)]) + " ";
    text += "marker" + std::string(to_string(level)) + " .";
    essays.push_back(make_essay("r" + std::to_string(i), text, level));
  }
  return Dataset(std::move(essays));
}

ExperimentOptions options(bool parallel = false) {
  ExperimentOptions o;
  o.k = 3;
  o.seed = 8;
  o.parallel_folds = parallel;
  return o;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("a label-revealing token is learned perfectly") {
    auto c = small_config();
    c.families = {Family::Bow};
    c.model.n_rounds = 30;
    const auto r = run_cv(revealing_data(), c, options());
    CHECK(r.pooled_error == 0.0);
    CHECK(r.pooled_accuracy == 1.0);
  }

  TEST_CASE("pooled results cover each essay once") {
    const auto r = run_cv(data(), small_config(), options());
    CHECK(r.pooled.total() == data().size());
    REQUIRE(r.predictions.size() == data().size());
    std::size_t n_test = 0;
    ConfusionMatrix sum;
    for (const auto& f : r.folds) {
      n_test += f.n_test;
      CHECK(f.n_train + f.n_test == data().size());
      sum += f.confusion;
    }
    CHECK(n_test == data().size());
    CHECK(sum == r.pooled);
    for (std::size_t i = 0; i < data().size(); ++i) {
      CHECK(r.predictions[i].id == data()[i].id);
      CHECK(r.predictions[i].truth == *data()[i].label);
      CHECK(r.predictions[i].predicted == argmax_level(r.predictions[i].probs));
    }
    CHECK(r.pooled_error == doctest::Approx(cost_error(r.pooled)));
  }

  // Fold numbers in records are 1-based.
  TEST_CASE("held-out essays never influence their own fold") {
    const auto base = run_cv(data(), small_config(), options());
    const std::size_t victim = [&] {
      for (std::size_t i = 0; i < base.predictions.size(); ++i)
        if (base.predictions[i].fold == 1) return i;
      return std::size_t(0);
    }();
    std::vector<Essay> changed = data().essays();
    changed[victim] = make_essay(changed[victim].id, "Completely different words appear here. Nothing else.",
                                 changed[victim].label);
    const auto r = run_cv(Dataset(std::move(changed)), small_config(), options());
    std::size_t compared = 0;
    for (std::size_t i = 0; i < data().size(); ++i) {
      if (i == victim || base.predictions[i].fold != 1) continue;
      CHECK(r.predictions[i].probs == base.predictions[i].probs);
      ++compared;
    }
    CHECK(compared > 0);
  }

  TEST_CASE("identical seeds give byte-identical reports, serial or parallel") {
    const auto dir = fs::temp_directory_path() / "cefr_cv_report";
    fs::remove_all(dir);
    const auto a = run_cv(data(), small_config(), options(false));
    const auto b = run_cv(data(), small_config(), options(true));
    CHECK(a.pooled == b.pooled);
    write_cv_report(dir / "a", a);
    write_cv_report(dir / "b", b);
    for (const char* f : {"summary.csv", "confusion.csv", "folds.csv", "predictions.csv"}) {
      CHECK(fs::exists(dir / "a" / f));
      CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
    }
    fs::remove_all(dir);
  }

  TEST_CASE("feature cache reuse keeps results identical") {
    const auto dir = fs::temp_directory_path() / "cefr_cv_cache";
    fs::remove_all(dir);
    auto o = options();
    o.cache_dir = dir;
    const auto first = run_cv(data(), small_config(), o);
    CHECK(!fs::is_empty(dir));
    const auto second = run_cv(data(), small_config(), o);
    CHECK(first.pooled == second.pooled);
    CHECK(first.predictions.front().probs == second.predictions.front().probs);
    fs::remove_all(dir);
  }

  TEST_CASE("ablation shapes") {
    const std::vector<Family> all(kFamilyOrder.begin(), kFamilyOrder.end());
    const auto loo = run_ablation(data(), small_config(), all, AblationMode::LeaveOneOut, options());
    REQUIRE(loo.size() == 7);
    CHECK(loo[0].name == "all");
    CHECK(loo[0].families == all);
    for (std::size_t i = 1; i < 7; ++i) {
      CHECK(loo[i].families.size() == 5);
      CHECK(std::find(loo[i].families.begin(), loo[i].families.end(), kFamilyOrder[i - 1]) == loo[i].families.end());
    }
    // The all-families row equals a standalone run.
    const auto direct = run_cv(data(), small_config(), options());
    CHECK(loo[0].result.pooled == direct.pooled);

    const std::vector<Family> shuffled = {Family::Bow, Family::Numeric, Family::Pos};
    const auto cum = run_ablation(data(), small_config(), shuffled, AblationMode::Cumulative, options());
    REQUIRE(cum.size() == 3);
    CHECK(cum[0].families == std::vector<Family>{Family::Numeric});
    CHECK(cum[1].families == std::vector<Family>{Family::Numeric, Family::Pos});
    CHECK(cum[2].families == std::vector<Family>{Family::Numeric, Family::Pos, Family::Bow});

    const auto dir = fs::temp_directory_path() / "cefr_ablation_report";
    fs::remove_all(dir);
    write_ablation_report(dir, cum, AblationMode::Cumulative);
    CHECK(fs::exists(dir / "ablation.csv"));
    CHECK(fs::exists(dir / "plot.dat"));
    fs::remove_all(dir);
  }

  TEST_CASE("removing an empty family leaves the baseline unchanged") {
    auto c = small_config();
    c.bow.min_df = 1000000;
    const std::vector<Family> fams = {Family::Numeric, Family::Pos, Family::Bow};
    const auto rows = run_ablation(data(), c, fams, AblationMode::LeaveOneOut, options());
    REQUIRE(rows.size() == 4);
    CHECK(rows[3].name == "-bow");
    CHECK(rows[3].result.pooled == rows[0].result.pooled);
    CHECK(rows[3].result.predictions.front().probs == rows[0].result.predictions.front().probs);
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(run_ablation(data(), small_config(), {}, AblationMode::Cumulative, options()), InvalidArgument);
    CHECK_THROWS_AS(run_ablation(data(), small_config(), {Family::Numeric}, AblationMode::LeaveOneOut, options()),
                    InvalidArgument);
    auto c = small_config();
    c.resources.embeddings = "/nonexistent/vectors.txt";
    try {
      run_cv(data(), c, options());
      FAIL("expected ResourceError");
    } catch (const ResourceError& e) {
      CHECK(std::string(e.what()).find("fold") != std::string::npos);
    }
  }
}
