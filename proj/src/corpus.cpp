#include "cefr/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "cefr/errors.hpp"
#include "cefr/rng.hpp"

namespace cefr {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_ascii_alnum(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::isalnum(u) != 0;
}

bool is_ascii_alpha(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::isalpha(u) != 0;
}

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && !std::isalnum(u) && !std::isspace(u);
}

void tokenize_chunk(std::string_view chunk, Tokens& out) {
  std::size_t b = 0;
  std::size_t e = chunk.size();
  while (b < e && is_punct(chunk[b])) out.emplace_back(1, chunk[b++]);
  std::size_t core_end = e;
  while (core_end > b && is_punct(chunk[core_end - 1])) --core_end;
  if (core_end > b) out.emplace_back(chunk.substr(b, core_end - b));
  for (std::size_t i = core_end; i < e; ++i) out.emplace_back(1, chunk[i]);
}

constexpr std::array<std::string_view, 12> kAbbreviations = {
    "mr", "mrs", "ms", "dr", "prof", "st", "etc", "e.g", "i.e", "vs", "jr", "sr"};

bool is_abbreviation(std::string_view word) {
  while (!word.empty() && is_punct(word.front()) ) word.remove_prefix(1);
  const std::string folded = fold_case(word);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), folded) !=
         kAbbreviations.end();
}

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) tokenize_chunk(text.substr(start, i - start), out);
  }
  return out;
}

std::vector<SentenceSpan> split_sentences(std::string_view text) {
  std::vector<SentenceSpan> spans;
  const std::size_t n = text.size();
  std::size_t begin = 0;
  auto skip_blank = [&](std::size_t p) {
    while (p < n && is_space(text[p])) ++p;
    return p;
  };
  begin = skip_blank(0);
  for (std::size_t i = begin; i < n; ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 < n && !is_space(text[i + 1])) continue;
    if (c == '.') {
      std::size_t j = i;
      while (j > begin && !is_space(text[j - 1])) --j;
      if (is_abbreviation(text.substr(j, i - j))) continue;
    }
    spans.push_back({begin, i + 1});
    begin = skip_blank(i + 1);
    i = begin - 1;
  }
  if (begin < n) {
    std::size_t end = n;
    while (end > begin && is_space(text[end - 1])) --end;
    if (end > begin) spans.push_back({begin, end});
  }
  return spans;
}

int count_syllables(std::string_view word) {
  std::string letters;
  for (char c : word)
    if (is_ascii_alpha(c))
      letters.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (letters.empty())
    throw InvalidArgument("count_syllables: no alphabetic character in '" +
                          std::string(word) + "'");
  int groups = 0;
  bool in_group = false;
  for (char c : letters) {
    const bool v = is_vowel(c);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  const std::size_t len = letters.size();
  if (letters.back() == 'e') {
    const bool consonant_le =
        len >= 3 && letters[len - 2] == 'l' && !is_vowel(letters[len - 3]);
    if (!consonant_le) --groups;
  }
  return std::max(groups, 1);
}

std::string fold_case(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (static_cast<unsigned char>(c) < 0x80)
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_word_token(std::string_view tok) {
  return std::any_of(tok.begin(), tok.end(), [](char c) {
    return is_ascii_alnum(c) || static_cast<unsigned char>(c) >= 0x80;
  });
}

bool is_numeric_token(std::string_view tok) {
  if (tok.empty() || !std::isdigit(static_cast<unsigned char>(tok.front())) ||
      !std::isdigit(static_cast<unsigned char>(tok.back())))
    return false;
  return std::all_of(tok.begin(), tok.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == ',';
  });
}

bool is_alphabetic_token(std::string_view tok) {
  bool letter = false;
  for (char c : tok) {
    if (std::isdigit(static_cast<unsigned char>(c))) return false;
    letter = letter || is_ascii_alpha(c);
  }
  return letter;
}

std::size_t count_letters(std::string_view tok) {
  return static_cast<std::size_t>(std::count_if(tok.begin(), tok.end(), is_ascii_alpha));
}

std::span<const std::string> Essay::sentence(std::size_t i) const {
  const std::size_t b = i == 0 ? 0 : sentence_ends[i - 1];
  return std::span<const std::string>(tokens).subspan(b, sentence_ends[i] - b);
}

Essay make_essay(std::string id, std::string text, std::optional<Level> label) {
  if (id.empty()) throw DataError("essay id must be non-empty");
  Essay e;
  e.id = std::move(id);
  e.text = std::move(text);
  e.label = label;
  for (const auto& span : split_sentences(e.text)) {
    for (auto& t : tokenize(std::string_view(e.text).substr(span.begin, span.end - span.begin)))
      e.tokens.push_back(std::move(t));
    e.sentence_ends.push_back(e.tokens.size());
  }
  return e;
}

Vocabulary build_vocabulary(std::span<const Essay> essays) {
  Vocabulary vocab;
  for (const auto& e : essays) {
    std::unordered_set<std::string> seen;
    for (const auto& t : e.tokens) {
      std::string key = fold_case(t);
      auto& entry = vocab[key];
      ++entry.count;
      if (seen.insert(std::move(key)).second) ++entry.doc_freq;
    }
  }
  return vocab;
}

Dataset::Dataset(std::vector<Essay> essays) : essays_(std::move(essays)) {
  std::unordered_set<std::string_view> ids;
  for (std::size_t i = 0; i < essays_.size(); ++i) {
    if (essays_[i].id.empty()) throw DataError("row " + std::to_string(i + 1) + ": empty id");
    if (!ids.insert(essays_[i].id).second)
      throw DataError("row " + std::to_string(i + 1) + ": duplicate essay id '" +
                      essays_[i].id + "'");
  }
  vocabulary_ = build_vocabulary(essays_);
}

bool Dataset::fully_labeled() const {
  return std::all_of(essays_.begin(), essays_.end(),
                     [](const Essay& e) { return e.label.has_value(); });
}

std::vector<Level> Dataset::labels() const {
  std::vector<Level> out;
  out.reserve(essays_.size());
  for (const auto& e : essays_) {
    if (!e.label) throw DataError("essay '" + e.id + "' has no label");
    out.push_back(*e.label);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Essay> picked;
  picked.reserve(indices.size());
  for (auto i : indices) picked.push_back(essays_.at(i));
  return Dataset(std::move(picked));
}

namespace {

using Row = std::vector<std::string>;

// RFC 4180 records; quoted fields may span lines.
std::vector<Row> parse_csv(std::string_view s) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < s.size() && s[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c == '\r') {
      // tolerate CRLF
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field at end of input");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::optional<Level> parse_label_field(std::string_view value, std::size_t row,
                                       std::string_view source) {
  if (value.empty()) return std::nullopt;
  if (auto l = parse_level(value)) return l;
  throw DataError(std::string(source) + ": row " + std::to_string(row) +
                  ": invalid label '" + std::string(value) + "'");
}

Dataset parse_csv_dataset(std::string_view content, std::string_view source) {
  const auto rows = parse_csv(content);
  if (rows.empty()) throw DataError(std::string(source) + ": missing header row");
  const Row& header = rows.front();
  auto col = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  const auto id_col = col("id");
  const auto text_col = col("text");
  const auto label_col = col("label");
  if (!id_col || !text_col)
    throw DataError(std::string(source) + ": header must name 'id' and 'text' columns");
  std::vector<Essay> essays;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const Row& row = rows[r];
    if (row.size() <= *id_col || row.size() <= *text_col)
      throw DataError(std::string(source) + ": row " + std::to_string(r) +
                      ": missing id or text field");
    std::optional<Level> label;
    if (label_col && *label_col < row.size())
      label = parse_label_field(row[*label_col], r, source);
    if (row[*id_col].empty())
      throw DataError(std::string(source) + ": row " + std::to_string(r) + ": empty id");
    essays.push_back(make_essay(row[*id_col], row[*text_col], label));
  }
  return Dataset(std::move(essays));
}

Dataset parse_jsonl_dataset(std::string_view content, std::string_view source) {
  std::vector<Essay> essays;
  std::size_t row = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    const std::string_view line = content.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    ++row;
    const std::string where = std::string(source) + ": row " + std::to_string(row);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!rec.is_object()) throw DataError(where + ": record is not an object");
    std::string id;
    if (auto it = rec.find("id"); it != rec.end()) {
      id = it->is_string() ? it->get<std::string>() : it->dump();
    }
    if (id.empty()) throw DataError(where + ": missing id");
    auto text_it = rec.find("text");
    if (text_it == rec.end() || !text_it->is_string())
      throw DataError(where + ": missing text");
    std::optional<Level> label;
    if (auto it = rec.find("label"); it != rec.end() && !it->is_null()) {
      if (!it->is_string()) throw DataError(where + ": label must be a string");
      label = parse_label_field(it->get<std::string>(), row, source);
    }
    essays.push_back(make_essay(std::move(id), text_it->get<std::string>(), label));
  }
  return Dataset(std::move(essays));
}

void write_csv_field(std::ostream& out, std::string_view f) {
  const bool quote = f.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!quote) {
    out << f;
    return;
  }
  out << '"';
  for (char c : f) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

}  // namespace

Dataset parse_dataset(std::string_view content, std::string_view source_name) {
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && content[first] == '{')
    return parse_jsonl_dataset(content, source_name);
  return parse_csv_dataset(content, source_name);
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot open dataset file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), path.string());
}

void write_dataset_csv(const Dataset& ds, std::ostream& out) {
  const bool labeled = std::any_of(ds.essays().begin(), ds.essays().end(),
                                   [](const Essay& e) { return e.label.has_value(); });
  out << (labeled ? "id,text,label\n" : "id,text\n");
  for (const auto& e : ds.essays()) {
    write_csv_field(out, e.id);
    out << ',';
    write_csv_field(out, e.text);
    if (labeled) out << ',' << (e.label ? to_string(*e.label) : std::string_view{});
    out << '\n';
  }
}

std::uint64_t dataset_hash(const Dataset& ds) {
  std::uint64_t h = fnv1a("dataset");
  for (const auto& e : ds.essays()) {
    h = fnv1a(e.id, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
    h = fnv1a(e.text, h);
    h = fnv1a(e.label ? to_string(*e.label) : std::string_view("-"), h);
    h = fnv1a(std::string_view("\x1e", 1), h);
  }
  return h;
}

}  // namespace cefr
