#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cefr/binary_io.hpp"
#include "cefr/bow.hpp"

namespace cefr {

enum class Family : unsigned char { Numeric, LanguageModel, Clusters, Topics, Pos, Bow };

/// The order in which families are added in cumulative experiments.
inline constexpr std::array<Family, 6> kFamilyOrder = {
    Family::Numeric, Family::LanguageModel, Family::Clusters,
    Family::Topics,  Family::Pos,           Family::Bow};

/// Column order inside a feature matrix: dense families, then sparse ones.
inline constexpr std::array<Family, 6> kColumnOrder = {
    Family::Numeric, Family::LanguageModel, Family::Topics,
    Family::Clusters, Family::Pos,          Family::Bow};

std::string_view to_string(Family f);
std::optional<Family> parse_family(std::string_view s);

struct FamilySlice {
  Family family;
  std::size_t offset = 0;
  std::size_t width = 0;
  std::uint64_t descriptor_hash = 0;
  bool operator==(const FamilySlice&) const = default;
};

/// Column layout of a feature matrix and its fingerprint.
class FeatureLayout {
 public:
  FeatureLayout() = default;

  /// Appends the next family block. `descriptor` folds the block's column
  /// identity (feature names, term list...) into the fingerprint.
  void append(Family f, std::size_t width, std::string_view descriptor = {});

  /// Single anonymous block, for matrices built outside a pipeline.
  static FeatureLayout plain(std::size_t width);

  const std::vector<FamilySlice>& slices() const { return slices_; }
  std::size_t width() const { return width_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  const FamilySlice* find(Family f) const;

  /// Layout holding only the listed families, in this layout's order.
  FeatureLayout select(std::span<const Family> families) const;

  void serialize(BinaryWriter& w) const;
  static FeatureLayout deserialize(BinaryReader& r);

  bool operator==(const FeatureLayout&) const = default;

 private:
  void push(Family f, std::size_t width, std::uint64_t descriptor_hash);

  std::vector<FamilySlice> slices_;
  std::size_t width_ = 0;
  std::uint64_t fingerprint_ = 0;
};

/// Row-major sparse matrix (CSR). Absent entries are zero.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(FeatureLayout layout = {}) : layout_(std::move(layout)) {}

  static FeatureMatrix from_dense(const std::vector<std::vector<double>>& rows);

  /// Appends a row from (column, value) pairs sorted by column; zeros are
  /// dropped. Throws DataError on an out-of-range column or unsorted input,
  /// InvalidArgument on a non-finite value.
  void add_row(std::span<const std::pair<std::uint32_t, double>> entries);

  std::size_t rows() const { return row_ptr_.size() - 1; }
  std::size_t cols() const { return layout_.width(); }
  std::size_t nnz() const { return values_.size(); }
  const FeatureLayout& layout() const { return layout_; }
  std::uint64_t fingerprint() const { return layout_.fingerprint(); }

  struct RowView {
    std::span<const std::uint32_t> cols;
    std::span<const double> values;
  };
  RowView row(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;
  std::vector<double> dense_row(std::size_t i) const;

  /// Rows in `indices`, in that order.
  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;

  /// Columns of the listed families only; the result's fingerprint is the
  /// one a pipeline with exactly those families would produce.
  FeatureMatrix select_families(std::span<const Family> families) const;

  bool operator==(const FeatureMatrix&) const = default;

  void serialize(BinaryWriter& w) const;
  static FeatureMatrix deserialize(BinaryReader& r);

 private:
  FeatureLayout layout_;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> cols_;
  std::vector<double> values_;
};

}  // namespace cefr
