#include "cefr/level.hpp"

namespace cefr {

namespace {
constexpr std::array<std::string_view, kNumLevels> kNames = {"A1", "A2", "B1",
                                                             "B2", "C1", "C2"};
}

std::string_view to_string(Level l) { return kNames[index_of(l)]; }

std::optional<Level> parse_level(std::string_view s) {
  for (std::size_t i = 0; i < kNumLevels; ++i)
    if (kNames[i] == s) return level_from_index(i);
  return std::nullopt;
}

}  // namespace cefr
