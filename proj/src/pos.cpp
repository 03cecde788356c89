#include "cefr/pos.hpp"

#include <fstream>
#include <sstream>

#include "cefr/errors.hpp"

namespace cefr {

namespace {

constexpr std::array<std::string_view, kNumTags> kTagNames = {
    "NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "CONJ",
    "PRT", "PUNCT", "X", "PROPN", "AUX", "INTJ", "SYM", "SCONJ"};

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

struct SuffixRule {
  std::string_view suffix;
  PosTag tag;
};

constexpr std::array<SuffixRule, 9> kSuffixRules = {{
    {"ly", PosTag::ADV},
    {"ing", PosTag::VERB},
    {"ed", PosTag::VERB},
    {"tion", PosTag::NOUN},
    {"ness", PosTag::NOUN},
    {"ment", PosTag::NOUN},
    {"ous", PosTag::ADJ},
    {"ful", PosTag::ADJ},
    {"ive", PosTag::ADJ},
}};

}  // namespace

std::string_view to_string(PosTag t) { return kTagNames[static_cast<std::size_t>(t)]; }

std::optional<PosTag> parse_tag(std::string_view s) {
  for (std::size_t i = 0; i < kNumTags; ++i)
    if (kTagNames[i] == s) return static_cast<PosTag>(i);
  return std::nullopt;
}

std::vector<std::string> tagset_names() {
  return std::vector<std::string>(kTagNames.begin(), kTagNames.end());
}

PosTag LexiconTagger::tag_token(std::string_view token) const {
  const std::string folded = fold_case(token);
  if (auto it = lexicon_.find(folded); it != lexicon_.end()) return it->second;
  if (is_alphabetic_token(folded)) {
    for (const auto& rule : kSuffixRules)
      if (ends_with(folded, rule.suffix)) return rule.tag;
  }
  if (is_numeric_token(folded)) return PosTag::NUM;
  if (!is_word_token(folded)) return PosTag::PUNCT;
  return PosTag::NOUN;
}

std::vector<PosTag> LexiconTagger::tag_tokens(std::span<const std::string> tokens) const {
  std::vector<PosTag> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(tag_token(t));
  return out;
}

LexiconTagger load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot open POS lexicon " + path.string());
  std::map<std::string, PosTag> lexicon;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected word<TAB>TAG");
    const auto tag = parse_tag(std::string_view(line).substr(tab + 1));
    if (!tag)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": unknown tag '" +
                      line.substr(tab + 1) + "'");
    lexicon[fold_case(std::string_view(line).substr(0, tab))] = *tag;
  }
  return LexiconTagger(std::move(lexicon));
}

std::vector<PosTag> ExternalTagger::tag(const Essay& essay) const {
  auto it = tags_.find(essay.id);
  if (it == tags_.end()) throw DataError("no external tags for essay '" + essay.id + "'");
  if (it->second.size() != essay.tokens.size())
    throw DataError("essay '" + essay.id + "': " + std::to_string(it->second.size()) +
                    " external tags for " + std::to_string(essay.tokens.size()) + " tokens");
  return it->second;
}

ExternalTagger load_external_tags(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot open external tag file " + path.string());
  std::unordered_map<std::string, std::vector<PosTag>> tags;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string id;
    if (!(ss >> id)) continue;
    std::vector<PosTag> seq;
    std::string name;
    while (ss >> name) {
      const auto t = parse_tag(name);
      if (!t)
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": unknown tag '" +
                        name + "'");
      seq.push_back(*t);
    }
    tags[id] = std::move(seq);
  }
  return ExternalTagger(std::move(tags));
}

std::array<double, kNumTags> pos_bow(std::span<const PosTag> tags) {
  std::array<double, kNumTags> counts{};
  for (auto t : tags) counts[static_cast<std::size_t>(t)] += 1.0;
  return counts;
}

std::array<double, kNumTags> pos_bow(std::span<const std::string> tags) {
  std::vector<PosTag> parsed;
  parsed.reserve(tags.size());
  for (const auto& name : tags) {
    const auto t = parse_tag(name);
    if (!t) throw DataError("tag '" + name + "' is not in the tag set");
    parsed.push_back(*t);
  }
  return pos_bow(parsed);
}

}  // namespace cefr
