#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "cefr/errors.hpp"
#include "cefr/eval.hpp"
#include "cefr/rng.hpp"

using namespace cefr;

namespace {

constexpr std::uint64_t kReported[6][6] = {{11224, 54, 3, 0, 1, 0},  {99, 7531, 42, 0, 0, 0},
                                           {30, 95, 5297, 23, 7, 1}, {0, 4, 32, 2273, 14, 1},
                                           {7, 2, 7, 35, 465, 19},   {1, 2, 2, 6, 4, 29}};

ConfusionMatrix reported() {
  ConfusionMatrix m;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) m.n[i][j] = kReported[i][j];
  return m;
}

Level lv(std::size_t i) { return static_cast<Level>(i); }

std::filesystem::path write_temp(const std::string& body) {
  const auto p = std::filesystem::temp_directory_path() / "cefr_cost.txt";
  std::ofstream(p) << body;
  return p;
}

void check_plan(const FoldPlan& plan, std::span<const Level> labels) {
  const std::size_t k = plan.k;
  std::vector<std::size_t> seen(labels.size(), 0);
  for (std::size_t f = 0; f < k; ++f) {
    const auto test = plan.test_indices(f), train = plan.train_indices(f);
    CHECK(test.size() + train.size() == labels.size());
    std::set<std::size_t> t(test.begin(), test.end());
    for (auto i : train) CHECK(!t.contains(i));
    for (auto i : test) ++seen[i];
  }
  for (auto s : seen) CHECK(s == 1);
  for (std::size_t c = 0; c < kNumLevels; ++c) {
    std::vector<std::size_t> per_fold(k, 0);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (index_of(labels[i]) == c) ++per_fold[plan.fold_of[i]];
    const auto [lo, hi] = std::minmax_element(per_fold.begin(), per_fold.end());
    CHECK(*hi - *lo <= 1);
  }
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("standard cost table") {
    const auto c = CostMatrix::standard();
    const double expect[6][6] = {{0, 1, 2, 3, 4, 6},   {1, 0, 1, 4, 5, 8},     {3, 2, 0, 3, 5, 8},
                                 {10, 7, 5, 0, 2, 7}, {20, 16, 12, 4, 0, 8}, {44, 38, 32, 19, 13, 0}};
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) CHECK(c(lv(i), lv(j)) == expect[i][j]);
  }

  TEST_CASE("cost error and accuracy") {
    ConfusionMatrix diag;
    for (std::size_t i = 0; i < 6; ++i) diag.add(lv(i), lv(i), 10 + i);
    CHECK(cost_error(diag) == 0.0);
    CHECK(accuracy(diag) == 1.0);

    ConfusionMatrix one;
    one.add(Level::C2, Level::A1);
    CHECK(cost_error(one) == doctest::Approx(4400.0));
    CHECK(accuracy(one) == 0.0);

    const auto m = reported();
    CHECK(m.total() == 27310);
    CHECK(m.trace() == 26819);
    CHECK(std::abs(cost_error(m) - 6.2907) < 1e-4);
    CHECK(std::abs(cost_error(m) - 100.0 * 1718.0 / 27310.0) < 1e-12);
    CHECK(std::abs(accuracy(m) - 0.98202) < 1e-4);

    CHECK_THROWS_AS(cost_error(ConfusionMatrix{}), InvalidArgument);
    CHECK_THROWS_AS(accuracy(ConfusionMatrix{}), InvalidArgument);
  }

  TEST_CASE("confusion from label lists") {
    const std::vector<Level> t = {Level::A1, Level::B1, Level::B1};
    const std::vector<Level> p = {Level::A1, Level::A2, Level::B1};
    const auto m = confusion(t, p);
    CHECK(m.total() == 3);
    CHECK(m.n[2][1] == 1);
    auto twice = m;
    twice += m;
    CHECK(twice.total() == 6);
    CHECK_THROWS_AS(confusion(t, std::span(p).first(2)), InvalidArgument);
  }

  TEST_CASE("cost matrix files") {
    const auto p = write_temp("0 1 2 3 4 6\n1 0 1 4 5 8\n3 2 0 3 5 8\n10 7 5 0 2 7\n20 16 12 4 0 8\n44 38 32 19 13 0\n");
    const auto c = load_cost_matrix(p);
    CHECK(c.c == CostMatrix::standard().c);
    write_temp("0 1\n1 0\n");
    CHECK_THROWS_AS(load_cost_matrix(p), DataError);
    write_temp("1 1 2 3 4 6\n1 0 1 4 5 8\n3 2 0 3 5 8\n10 7 5 0 2 7\n20 16 12 4 0 8\n44 38 32 19 13 0\n");
    CHECK_THROWS_AS(load_cost_matrix(p), DataError);
    write_temp("0 -1 2 3 4 6\n1 0 1 4 5 8\n3 2 0 3 5 8\n10 7 5 0 2 7\n20 16 12 4 0 8\n44 38 32 19 13 0\n");
    CHECK_THROWS_AS(load_cost_matrix(p), DataError);
    std::filesystem::remove(p);
    CHECK_THROWS_AS(load_cost_matrix(p), ResourceError);
  }

  TEST_CASE("stratified folds on a divisible label set") {
    std::vector<Level> labels;
    for (std::size_t c = 0; c < 6; ++c)
      for (int i = 0; i < 9; ++i) labels.push_back(lv(c));
    const auto plan = stratified_kfold(labels, 3, 7);
    for (std::size_t f = 0; f < 3; ++f) {
      const auto test = plan.test_indices(f);
      for (std::size_t c = 0; c < 6; ++c)
        CHECK(std::count_if(test.begin(), test.end(), [&](std::size_t i) { return labels[i] == lv(c); }) == 3);
    }
    check_plan(plan, labels);
    CHECK(plan.warnings.empty());
  }

  TEST_CASE("stratified folds on random label multisets") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<Level> labels(10 + rng.below(200));
      for (auto& l : labels) l = lv(rng.below(rng.uniform() < 0.5 ? 3 : 6));
      const std::size_t k = 2 + rng.below(4);
      const auto plan = stratified_kfold(labels, k, trial);
      check_plan(plan, labels);
      // Overall fold sizes stay balanced too.
      std::vector<std::size_t> sizes(k, 0);
      for (auto f : plan.fold_of) ++sizes[f];
      const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
      CHECK(*hi - *lo <= 1);
    }
  }

  TEST_CASE("fold errors, warnings and determinism") {
    const std::vector<Level> labels = {Level::A1, Level::A1, Level::A1, Level::C2};
    CHECK_THROWS_AS(stratified_kfold(labels, 1, 0), InvalidArgument);
    CHECK_THROWS_AS(stratified_kfold(labels, 5, 0), InvalidArgument);
    const auto plan = stratified_kfold(labels, 3, 0);
    CHECK(!plan.warnings.empty());
    CHECK(stratified_kfold(labels, 3, 0).fold_of == plan.fold_of);
  }
}
