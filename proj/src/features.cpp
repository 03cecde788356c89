#include "cefr/features.hpp"

#include <algorithm>
#include <cmath>

#include "cefr/errors.hpp"
#include "cefr/rng.hpp"

namespace cefr {

namespace {
constexpr std::array<std::string_view, 6> kFamilyNames = {"numeric", "lm",  "clusters",
                                                          "lda",     "pos", "bow"};
}

std::string_view to_string(Family f) { return kFamilyNames[static_cast<std::size_t>(f)]; }

std::optional<Family> parse_family(std::string_view s) {
  for (std::size_t i = 0; i < kFamilyNames.size(); ++i)
    if (kFamilyNames[i] == s) return static_cast<Family>(i);
  return std::nullopt;
}

void FeatureLayout::push(Family f, std::size_t width, std::uint64_t descriptor_hash) {
  slices_.push_back({f, width_, width, descriptor_hash});
  width_ += width;
  std::uint64_t h = fingerprint_ ? fingerprint_ : fnv1a("cefr-layout");
  h = fnv1a(to_string(f), h);
  h = fnv1a(std::to_string(width), h);
  h = fnv1a(std::to_string(descriptor_hash), h);
  fingerprint_ = splitmix64(h);
}

void FeatureLayout::append(Family f, std::size_t width, std::string_view descriptor) {
  push(f, width, fnv1a(descriptor));
}

FeatureLayout FeatureLayout::select(std::span<const Family> families) const {
  FeatureLayout out;
  for (const auto& s : slices_)
    if (std::find(families.begin(), families.end(), s.family) != families.end())
      out.push(s.family, s.width, s.descriptor_hash);
  return out;
}

FeatureLayout FeatureLayout::plain(std::size_t width) {
  FeatureLayout l;
  l.append(Family::Numeric, width, "plain");
  return l;
}

const FamilySlice* FeatureLayout::find(Family f) const {
  for (const auto& s : slices_)
    if (s.family == f) return &s;
  return nullptr;
}

void FeatureLayout::serialize(BinaryWriter& w) const {
  w.u64(fingerprint_);
  w.u64(slices_.size());
  for (const auto& s : slices_) {
    w.u8(static_cast<std::uint8_t>(s.family));
    w.u64(s.offset);
    w.u64(s.width);
    w.u64(s.descriptor_hash);
  }
}

FeatureLayout FeatureLayout::deserialize(BinaryReader& r) {
  FeatureLayout l;
  const auto fingerprint = r.u64();
  const auto n = r.count(25);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto fam = r.u8();
    if (fam >= kFamilyNames.size()) throw ModelFormatError("unknown feature family id");
    const auto offset = r.u64();
    const auto width = r.u64();
    const auto hash = r.u64();
    if (offset != l.width_) throw ModelFormatError("feature layout does not tile its width");
    l.push(static_cast<Family>(fam), width, hash);
  }
  if (l.fingerprint_ != fingerprint) throw ModelFormatError("feature layout fingerprint inconsistent");
  return l;
}

FeatureMatrix FeatureMatrix::from_dense(const std::vector<std::vector<double>>& rows) {
  const std::size_t width = rows.empty() ? 0 : rows.front().size();
  FeatureMatrix m(FeatureLayout::plain(width));
  std::vector<std::pair<std::uint32_t, double>> entries;
  for (const auto& r : rows) {
    if (r.size() != width) throw DataError("from_dense: ragged rows");
    entries.clear();
    for (std::size_t j = 0; j < r.size(); ++j)
      entries.emplace_back(static_cast<std::uint32_t>(j), r[j]);
    m.add_row(entries);
  }
  return m;
}

void FeatureMatrix::add_row(std::span<const std::pair<std::uint32_t, double>> entries) {
  std::int64_t prev = -1;
  for (const auto& [c, v] : entries) {
    if (c >= cols()) throw DataError("feature column " + std::to_string(c) + " out of range");
    if (static_cast<std::int64_t>(c) <= prev) throw DataError("feature row columns not sorted");
    if (!std::isfinite(v)) throw InvalidArgument("non-finite feature value");
    prev = c;
  }
  for (const auto& [c, v] : entries) {
    if (v == 0.0) continue;
    cols_.push_back(c);
    values_.push_back(v);
  }
  row_ptr_.push_back(values_.size());
}

FeatureMatrix::RowView FeatureMatrix::row(std::size_t i) const {
  const std::size_t b = row_ptr_[i], e = row_ptr_[i + 1];
  return {std::span(cols_).subspan(b, e - b), std::span(values_).subspan(b, e - b)};
}

double FeatureMatrix::at(std::size_t i, std::size_t j) const {
  const auto r = row(i);
  auto it = std::lower_bound(r.cols.begin(), r.cols.end(), j);
  if (it == r.cols.end() || *it != j) return 0.0;
  return r.values[static_cast<std::size_t>(it - r.cols.begin())];
}

std::vector<double> FeatureMatrix::dense_row(std::size_t i) const {
  std::vector<double> out(cols(), 0.0);
  const auto r = row(i);
  for (std::size_t k = 0; k < r.cols.size(); ++k) out[r.cols[k]] = r.values[k];
  return out;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix m(layout_);
  for (auto i : indices) {
    const auto r = row(i);
    m.cols_.insert(m.cols_.end(), r.cols.begin(), r.cols.end());
    m.values_.insert(m.values_.end(), r.values.begin(), r.values.end());
    m.row_ptr_.push_back(m.values_.size());
  }
  return m;
}

FeatureMatrix FeatureMatrix::select_families(std::span<const Family> families) const {
  FeatureLayout layout = layout_.select(families);
  // New column of every old column, or -1 when its family is dropped.
  std::vector<std::int64_t> remap(cols(), -1);
  for (const auto& s : layout_.slices()) {
    const FamilySlice* dst = layout.find(s.family);
    if (!dst) continue;
    for (std::size_t j = 0; j < s.width; ++j)
      remap[s.offset + j] = static_cast<std::int64_t>(dst->offset + j);
  }
  FeatureMatrix m(std::move(layout));
  for (std::size_t i = 0; i < rows(); ++i) {
    const auto r = row(i);
    for (std::size_t k = 0; k < r.cols.size(); ++k) {
      if (remap[r.cols[k]] < 0) continue;
      m.cols_.push_back(static_cast<std::uint32_t>(remap[r.cols[k]]));
      m.values_.push_back(r.values[k]);
    }
    m.row_ptr_.push_back(m.values_.size());
  }
  return m;
}

void FeatureMatrix::serialize(BinaryWriter& w) const {
  layout_.serialize(w);
  w.u64(rows());
  for (auto p : row_ptr_) w.u64(p);
  w.u64(cols_.size());
  for (auto c : cols_) w.u32(c);
  w.f64s(values_);
}

FeatureMatrix FeatureMatrix::deserialize(BinaryReader& r) {
  FeatureMatrix m(FeatureLayout::deserialize(r));
  const auto rows = r.count(8);
  m.row_ptr_.clear();
  for (std::uint64_t i = 0; i <= rows; ++i) m.row_ptr_.push_back(r.u64());
  const auto nnz = r.count(4);
  m.cols_.resize(nnz);
  for (auto& c : m.cols_) c = r.u32();
  m.values_ = r.f64s();
  if (m.values_.size() != nnz || m.row_ptr_.back() != nnz)
    throw ModelFormatError("feature matrix arrays inconsistent");
  return m;
}

}  // namespace cefr
