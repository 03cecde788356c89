#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cefr {

struct GossParams {
  /// Fraction of examples with the largest gradient magnitudes kept as-is.
  double top_rate = 0.2;
  /// Fraction of all examples sampled uniformly from the remainder.
  double other_rate = 0.1;
};

struct GossSample {
  std::vector<std::size_t> indices;   // ascending
  std::vector<double> multipliers;    // parallel to indices
};

/// Gradient-based one-side sampling. Keeps the ceil(a*n) examples with the
/// largest |gradient| at weight 1 and ceil(b*n) uniformly drawn examples of
/// the rest at weight (1-a)/b. Requires 0 < a <= 1, 0 <= b <= 1-a, and b > 0
/// whenever a < 1; throws InvalidArgument otherwise.
GossSample goss_sample(std::span<const double> gradients, double a, double b, std::uint64_t seed);

}  // namespace cefr
