#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace cefr {

/// CEFR proficiency level. Enumerator values are the ordinal indices 0..5.
enum class Level : unsigned char { A1 = 0, A2, B1, B2, C1, C2 };

inline constexpr std::size_t kNumLevels = 6;

inline constexpr std::array<Level, kNumLevels> kAllLevels = {
    Level::A1, Level::A2, Level::B1, Level::B2, Level::C1, Level::C2};

constexpr std::size_t index_of(Level l) { return static_cast<std::size_t>(l); }

/// Precondition: i < kNumLevels.
constexpr Level level_from_index(std::size_t i) { return static_cast<Level>(i); }

std::string_view to_string(Level l);

/// Exact match on "A1".."C2"; anything else yields nullopt.
std::optional<Level> parse_level(std::string_view s);

/// Levels A1..B1 form the low group used for the low-level language model.
constexpr bool is_low_group(Level l) { return index_of(l) <= index_of(Level::B1); }

}  // namespace cefr
