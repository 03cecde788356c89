#include "cefr/eval.hpp"

#include <fstream>
#include <sstream>

#include "cefr/errors.hpp"
#include "cefr/rng.hpp"

namespace cefr {

CostMatrix CostMatrix::standard() {
  CostMatrix m;
  m.c = {{{0, 1, 2, 3, 4, 6},
          {1, 0, 1, 4, 5, 8},
          {3, 2, 0, 3, 5, 8},
          {10, 7, 5, 0, 2, 7},
          {20, 16, 12, 4, 0, 8},
          {44, 38, 32, 19, 13, 0}}};
  return m;
}

CostMatrix load_cost_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot open cost matrix " + path.string());
  CostMatrix m;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (!ls.eof()) throw DataError(path.string() + ": non-numeric entry on line " + std::to_string(row + 1));
    if (vals.empty()) continue;
    if (vals.size() != kNumLevels || row >= kNumLevels)
      throw DataError(path.string() + ": cost matrix must be 6 lines of 6 numbers");
    for (std::size_t j = 0; j < kNumLevels; ++j) {
      if (vals[j] < 0.0) throw DataError(path.string() + ": negative cost");
      m.c[row][j] = vals[j];
    }
    if (m.c[row][row] != 0.0) throw DataError(path.string() + ": cost matrix diagonal must be zero");
    ++row;
  }
  if (row != kNumLevels) throw DataError(path.string() + ": cost matrix must be 6 lines of 6 numbers");
  return m;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (const auto& r : n)
    for (auto v : r) s += v;
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < kNumLevels; ++i) s += n[i][i];
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  for (std::size_t i = 0; i < kNumLevels; ++i)
    for (std::size_t j = 0; j < kNumLevels; ++j) n[i][j] += o.n[i][j];
  return *this;
}

ConfusionMatrix confusion(std::span<const Level> truth, std::span<const Level> predicted) {
  if (truth.size() != predicted.size())
    throw InvalidArgument("confusion: label sequences differ in length");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], predicted[i]);
  return m;
}

double cost_error(const ConfusionMatrix& m, const CostMatrix& cost) {
  const auto n = m.total();
  if (n == 0) throw InvalidArgument("cost_error: empty confusion matrix");
  double s = 0.0;
  for (std::size_t i = 0; i < kNumLevels; ++i)
    for (std::size_t j = 0; j < kNumLevels; ++j) s += cost.c[i][j] * static_cast<double>(m.n[i][j]);
  return 100.0 * s / static_cast<double>(n);
}

double accuracy(const ConfusionMatrix& m) {
  const auto n = m.total();
  if (n == 0) throw InvalidArgument("accuracy: empty confusion matrix");
  return static_cast<double>(m.trace()) / static_cast<double>(n);
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) out.push_back(i);
  return out;
}

FoldPlan stratified_kfold(std::span<const Level> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("stratified_kfold: k must be >= 2");
  if (k > labels.size())
    throw InvalidArgument("stratified_kfold: k=" + std::to_string(k) + " exceeds " +
                          std::to_string(labels.size()) + " labels");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.fold_of.assign(labels.size(), 0);
  std::array<std::vector<std::size_t>, kNumLevels> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[index_of(labels[i])].push_back(i);
  Rng rng(seed);
  std::size_t start = 0;
  for (std::size_t c = 0; c < kNumLevels; ++c) {
    auto& idx = members[c];
    if (idx.empty()) continue;
    if (idx.size() < k)
      plan.warnings.push_back("level " + std::string(to_string(level_from_index(c))) + " has " +
                              std::to_string(idx.size()) + " essays, fewer than k=" +
                              std::to_string(k));
    rng.shuffle(idx.begin(), idx.end());
    for (std::size_t j = 0; j < idx.size(); ++j) plan.fold_of[idx[j]] = (start + j) % k;
    start = (start + idx.size()) % k;
  }
  return plan;
}

}  // namespace cefr
