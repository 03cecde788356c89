#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cefr/level.hpp"

namespace cefr {

/// Rows are true levels, columns predicted levels.
struct CostMatrix {
  std::array<std::array<double, kNumLevels>, kNumLevels> c{};

  /// The ordinal cost table used by the shared task.
  static CostMatrix standard();
  double operator()(Level truth, Level predicted) const {
    return c[index_of(truth)][index_of(predicted)];
  }
};

/// Six lines of six non-negative numbers. Throws DataError on malformed
/// content or a nonzero diagonal, ResourceError if unreadable.
CostMatrix load_cost_matrix(const std::filesystem::path& path);

struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumLevels>, kNumLevels> n{};

  void add(Level truth, Level predicted, std::uint64_t count = 1) {
    n[index_of(truth)][index_of(predicted)] += count;
  }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const Level> truth, std::span<const Level> predicted);

/// 100/n times the cost-weighted sum of the confusion counts. Throws
/// InvalidArgument when the matrix is empty.
double cost_error(const ConfusionMatrix& m, const CostMatrix& cost = CostMatrix::standard());

/// trace / n. Throws InvalidArgument when the matrix is empty.
double accuracy(const ConfusionMatrix& m);

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> fold_of;  // per essay
  std::vector<std::string> warnings;

  std::vector<std::size_t> train_indices(std::size_t fold) const;
  std::vector<std::size_t> test_indices(std::size_t fold) const;
};

/// Seeded shuffle within each class, then round-robin assignment. The
/// round-robin start rotates across classes so fold sizes stay balanced.
/// Throws InvalidArgument when k < 2 or k exceeds the number of labels; a
/// class with fewer than k members only produces a warning.
FoldPlan stratified_kfold(std::span<const Level> labels, std::size_t k, std::uint64_t seed);

}  // namespace cefr
