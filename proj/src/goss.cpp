#include "cefr/goss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cefr/errors.hpp"
#include "cefr/rng.hpp"

namespace cefr {

namespace {
std::size_t ceil_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}
}  // namespace

GossSample goss_sample(std::span<const double> gradients, double a, double b, std::uint64_t seed) {
  if (!(a > 0.0 && a <= 1.0)) throw InvalidArgument("goss: top rate must be in (0, 1]");
  if (!(b >= 0.0 && b <= 1.0 - a + 1e-12))
    throw InvalidArgument("goss: other rate must be in [0, 1 - top rate]");
  if (a < 1.0 && b <= 0.0)
    throw InvalidArgument("goss: other rate must be positive when top rate < 1");

  const std::size_t n = gradients.size();
  GossSample out;
  if (a >= 1.0) {
    out.indices.resize(n);
    std::iota(out.indices.begin(), out.indices.end(), std::size_t{0});
    out.multipliers.assign(n, 1.0);
    return out;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return std::abs(gradients[i]) > std::abs(gradients[j]);
  });
  const std::size_t top = std::min(ceil_count(a, n), n);
  std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(top), order.end());
  std::sort(rest.begin(), rest.end());
  const std::size_t draw = std::min(ceil_count(b, n), rest.size());

  Rng rng(seed);
  for (std::size_t i = 0; i < draw; ++i) {
    const std::size_t j = i + rng.below(rest.size() - i);
    std::swap(rest[i], rest[j]);
  }
  const double amplify = (1.0 - a) / b;
  std::vector<std::pair<std::size_t, double>> picked;
  picked.reserve(top + draw);
  for (std::size_t i = 0; i < top; ++i) picked.emplace_back(order[i], 1.0);
  for (std::size_t i = 0; i < draw; ++i) picked.emplace_back(rest[i], amplify);
  std::sort(picked.begin(), picked.end());
  for (const auto& [idx, m] : picked) {
    out.indices.push_back(idx);
    out.multipliers.push_back(m);
  }
  return out;
}

}  // namespace cefr
