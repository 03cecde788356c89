#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cefr/binary_io.hpp"
#include "cefr/corpus.hpp"

namespace cefr {

/// Word vectors of a uniform dimension, stored row-major.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  /// Throws DataError on a duplicate word or a dimension mismatch.
  void add(std::string word, std::span<const double> vec);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  std::span<const double> vector(std::size_t row) const {
    return std::span(data_).subspan(row * dim_, dim_);
  }
  /// Row of `word`, or -1.
  std::ptrdiff_t find(const std::string& word) const;

  /// Scales every vector to unit L2 norm (zero vectors stay zero).
  void normalize();

 private:
  std::size_t dim_;
  std::vector<std::string> words_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Text word-vector format: `word v1 ... vd` per line, with an optional
/// `count dim` header line. Words are case-folded.
EmbeddingTable load_embeddings(const std::filesystem::path& path, bool normalize = false);

struct KMeansResult {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;          // k * dim
  std::vector<std::uint32_t> labels;      // per point
  std::vector<double> inertia_history;    // after every assignment step
  std::size_t iterations = 0;

  double inertia() const { return inertia_history.empty() ? 0.0 : inertia_history.back(); }
};

/// Lloyd's algorithm with k-means++ seeding. `points` is n * dim row-major.
/// Stops when no centroid moves more than `tol` or after `max_iters`
/// updates. An emptied cluster is reseeded at the point farthest from its
/// centroid. Throws InvalidArgument on empty input or k outside
/// [1, distinct points].
KMeansResult kmeans(std::span<const double> points, std::size_t dim, std::size_t k,
                    std::uint64_t seed, std::size_t max_iters = 100, double tol = 1e-6);

struct ClusterModel {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::vector<double> centroids;
  std::map<std::string, std::uint32_t> assignment;

  void serialize(BinaryWriter& w) const;
  static ClusterModel deserialize(BinaryReader& r);
};

/// Clusters the embeddings of `words` that exist in the table; an empty
/// `words` list clusters the whole table.
ClusterModel fit_cluster_model(const EmbeddingTable& table, const std::vector<std::string>& words,
                               std::size_t k, std::uint64_t seed, std::size_t max_iters = 100,
                               double tol = 1e-6);

/// Length-k indicator: position c is 1 iff some case-folded essay token is
/// assigned to cluster c.
std::vector<double> cluster_encode(const Essay& essay, const ClusterModel& model);

}  // namespace cefr
