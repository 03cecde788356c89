#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cefr/clusters.hpp"
#include "cefr/corpus.hpp"
#include "cefr/level.hpp"
#include "cefr/pos.hpp"

namespace cefr {

/// Share of essays per level in the shared-task training data.
inline constexpr std::array<double, kNumLevels> kDefaultLevelDistribution = {
    0.4131, 0.2809, 0.1997, 0.0851, 0.0196, 0.0016};

/// Knobs of the synthetic essay generator. Every rate is a function of the
/// essay's latent proficiency, a noisy copy of its level index.
struct SynthOptions {
  std::array<double, kNumLevels> distribution = kDefaultLevelDistribution;
  std::size_t n = 3000;
  std::uint64_t seed = 1;
  std::size_t min_sentences = 6;
  std::size_t max_sentences = 10;
  /// Standard deviation of the latent proficiency used for sentence shape,
  /// word choice and topic.
  double proficiency_noise = 0.6;
  /// Standard deviation of the latent used for the misspelling rate.
  double spelling_noise = 0.3;
  /// Misspelled share of content words per level.
  std::array<double, kNumLevels> misspelling_rate = {0.16, 0.12, 0.085, 0.055, 0.03, 0.015};
};

/// Essays whose sentence length, clause-connector rate, word difficulty,
/// misspelling rate and topic vocabulary all vary with level. Level counts
/// follow the distribution by largest remainder, so proportions are exact up
/// to rounding. Throws InvalidArgument when n is 0 or the distribution is
/// not a probability vector.
Dataset gen_synthetic(const SynthOptions& options);

inline Dataset gen_synthetic(const std::array<double, kNumLevels>& distribution, std::size_t n,
                             std::uint64_t seed) {
  SynthOptions o;
  o.distribution = distribution;
  o.n = n;
  o.seed = seed;
  return gen_synthetic(o);
}

/// Side resources matching the generator's vocabulary.
struct SynthResources {
  std::vector<std::string> dictionary;
  std::vector<std::string> easy_words;
  std::vector<std::pair<std::string, PosTag>> lexicon;
  EmbeddingTable embeddings;
};

/// Fixed for every data seed.
const SynthResources& synthetic_resources();

/// Writes dictionary.txt, easy_words.txt, lexicon.tsv and embeddings.txt.
/// Throws ResourceError when the directory cannot be written.
void write_synthetic_resources(const std::filesystem::path& dir);

}  // namespace cefr
