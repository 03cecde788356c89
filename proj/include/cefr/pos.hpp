#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cefr/corpus.hpp"

namespace cefr {

/// Universal part-of-speech categories. The enumerator order is the
/// serialized tag-set order and must not change.
enum class PosTag : unsigned char {
  NOUN, VERB, ADJ, ADV, PRON, DET, ADP, NUM, CONJ, PRT, PUNCT, X, PROPN, AUX, INTJ, SYM, SCONJ
};

inline constexpr std::size_t kNumTags = 17;

std::string_view to_string(PosTag t);
std::optional<PosTag> parse_tag(std::string_view s);
/// Tag names in tag-set order.
std::vector<std::string> tagset_names();

class Tagger {
 public:
  virtual ~Tagger() = default;
  /// Exactly one tag per essay token.
  virtual std::vector<PosTag> tag(const Essay& essay) const = 0;
};

/// Lexicon lookup, then suffix rules, then digits/punctuation, then NOUN.
class LexiconTagger final : public Tagger {
 public:
  LexiconTagger() = default;
  explicit LexiconTagger(std::map<std::string, PosTag> lexicon) : lexicon_(std::move(lexicon)) {}

  std::vector<PosTag> tag(const Essay& essay) const override { return tag_tokens(essay.tokens); }
  std::vector<PosTag> tag_tokens(std::span<const std::string> tokens) const;
  PosTag tag_token(std::string_view token) const;

  const std::map<std::string, PosTag>& lexicon() const { return lexicon_; }

 private:
  std::map<std::string, PosTag> lexicon_;
};

/// `word<TAB>TAG` per line; keys are case-folded.
LexiconTagger load_lexicon(const std::filesystem::path& path);

/// Tags produced elsewhere, keyed by essay id.
class ExternalTagger final : public Tagger {
 public:
  explicit ExternalTagger(std::unordered_map<std::string, std::vector<PosTag>> tags)
      : tags_(std::move(tags)) {}
  /// Throws DataError if the essay is missing or the tag count differs from
  /// the token count.
  std::vector<PosTag> tag(const Essay& essay) const override;

 private:
  std::unordered_map<std::string, std::vector<PosTag>> tags_;
};

/// Each line: essay id, then space-separated tag names.
ExternalTagger load_external_tags(const std::filesystem::path& path);

inline std::vector<PosTag> tag(const Essay& essay, const Tagger& tagger) {
  return tagger.tag(essay);
}

/// Occurrence count per tag, in tag-set order.
std::array<double, kNumTags> pos_bow(std::span<const PosTag> tags);
/// Same, from tag names. Throws DataError on a name outside the tag set.
std::array<double, kNumTags> pos_bow(std::span<const std::string> tags);

}  // namespace cefr
