#include "cefr/clusters.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cefr/errors.hpp"
#include "cefr/rng.hpp"

namespace cefr {

void EmbeddingTable::add(std::string word, std::span<const double> vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_ || dim_ == 0)
    throw DataError("embedding for '" + word + "' has dimension " + std::to_string(vec.size()) +
                    ", expected " + std::to_string(dim_));
  if (!index_.emplace(word, words_.size()).second)
    throw DataError("duplicate embedding for '" + word + "'");
  words_.push_back(std::move(word));
  data_.insert(data_.end(), vec.begin(), vec.end());
}

std::ptrdiff_t EmbeddingTable::find(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

void EmbeddingTable::normalize() {
  for (std::size_t r = 0; r < words_.size(); ++r) {
    double* v = data_.data() + r * dim_;
    double norm = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) norm += v[j] * v[j];
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (std::size_t j = 0; j < dim_; ++j) v[j] /= norm;
  }
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, bool normalize) {
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot open embeddings " + path.string());
  EmbeddingTable table;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> vec;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    vec.clear();
    std::string field;
    while (ss >> field) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad number '" +
                        field + "'");
      }
    }
    if (lineno == 1 && vec.size() == 1 &&
        std::all_of(word.begin(), word.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      continue;  // "count dim" header
    try {
      table.add(fold_case(word), vec);
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (normalize) table.normalize();
  return table;
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

std::size_t count_distinct(std::span<const double> points, std::size_t n, std::size_t dim) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto row = [&](std::size_t i) { return points.subspan(i * dim, dim); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = row(a), rb = row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  std::size_t distinct = n == 0 ? 0 : 1;
  for (std::size_t i = 1; i < n; ++i) {
    const auto ra = row(order[i - 1]), rb = row(order[i]);
    if (!std::equal(ra.begin(), ra.end(), rb.begin())) ++distinct;
  }
  return distinct;
}

// Assigns every point to its nearest centroid; returns the inertia.
double assign(std::span<const double> points, std::size_t n, std::size_t dim,
              const std::vector<double>& centroids, std::size_t k,
              std::vector<std::uint32_t>& labels, std::vector<double>& dist) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = points.data() + i * dim;
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double d = sq_dist(p, centroids.data() + c * dim, dim);
      if (d < best) {
        best = d;
        arg = static_cast<std::uint32_t>(c);
      }
    }
    labels[i] = arg;
    dist[i] = best;
    inertia += best;
  }
  return inertia;
}

}  // namespace

KMeansResult kmeans(std::span<const double> points, std::size_t dim, std::size_t k,
                    std::uint64_t seed, std::size_t max_iters, double tol) {
  if (dim == 0 || points.empty()) throw InvalidArgument("kmeans: empty input");
  if (points.size() % dim != 0) throw InvalidArgument("kmeans: data size not a multiple of dim");
  const std::size_t n = points.size() / dim;
  if (k == 0) throw InvalidArgument("kmeans: k must be at least 1");
  const std::size_t distinct = count_distinct(points, n, dim);
  if (k > distinct)
    throw InvalidArgument("kmeans: k = " + std::to_string(k) + " exceeds " +
                          std::to_string(distinct) + " distinct points");

  Rng rng(seed);
  KMeansResult res;
  res.k = k;
  res.dim = dim;
  res.centroids.resize(k * dim);
  auto point = [&](std::size_t i) { return points.data() + i * dim; };
  auto set_centroid = [&](std::size_t c, std::size_t i) {
    std::copy(point(i), point(i) + dim, res.centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
  };

  // k-means++ seeding
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t chosen = rng.below(n);
  for (std::size_t c = 0; c < k; ++c) {
    set_centroid(c, chosen);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(point(i), point(chosen), dim));
      total += nearest[i];
    }
    if (c + 1 == k) break;
    double target = rng.uniform() * total;
    chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] <= 0.0) continue;
      target -= nearest[i];
      if (target < 0.0) {
        chosen = i;
        break;
      }
    }
    while (nearest[chosen] <= 0.0) chosen = (chosen + n - 1) % n;
  }

  res.labels.assign(n, 0);
  std::vector<double> dist(n);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> sizes(k);
  res.inertia_history.push_back(assign(points, n, dim, res.centroids, k, res.labels, dist));

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = res.labels[i];
      ++sizes[c];
      for (std::size_t j = 0; j < dim; ++j) sums[c * dim + j] += point(i)[j];
    }
    double shift = 0.0;
    std::vector<double> updated(k * dim);
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j)
        updated[c * dim + j] = sums[c * dim + j] / static_cast<double>(sizes[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      const auto far = static_cast<std::size_t>(
          std::max_element(dist.begin(), dist.end()) - dist.begin());
      std::copy(point(far), point(far) + dim, updated.begin() + static_cast<std::ptrdiff_t>(c * dim));
      dist[far] = 0.0;
    }
    for (std::size_t c = 0; c < k; ++c)
      shift = std::max(shift, std::sqrt(sq_dist(updated.data() + c * dim,
                                                res.centroids.data() + c * dim, dim)));
    res.centroids = std::move(updated);
    res.inertia_history.push_back(assign(points, n, dim, res.centroids, k, res.labels, dist));
    res.iterations = iter + 1;
    if (shift < tol) break;
  }
  return res;
}

void ClusterModel::serialize(BinaryWriter& w) const {
  w.u64(k);
  w.u64(dim);
  w.u64(seed);
  w.f64s(centroids);
  w.u64(assignment.size());
  for (const auto& [word, c] : assignment) {
    w.str(word);
    w.u32(c);
  }
}

ClusterModel ClusterModel::deserialize(BinaryReader& r) {
  ClusterModel m;
  m.k = r.u64();
  m.dim = r.u64();
  m.seed = r.u64();
  m.centroids = r.f64s();
  const auto n = r.count(12);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string word = r.str();
    const auto c = r.u32();
    if (c >= m.k) throw ModelFormatError("cluster id out of range");
    m.assignment.emplace(std::move(word), c);
  }
  return m;
}

ClusterModel fit_cluster_model(const EmbeddingTable& table, const std::vector<std::string>& words,
                               std::size_t k, std::uint64_t seed, std::size_t max_iters,
                               double tol) {
  std::vector<std::string> kept;
  if (words.empty()) {
    kept = table.words();
  } else {
    for (const auto& w : words)
      if (table.find(w) >= 0) kept.push_back(w);
  }
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  std::vector<double> data;
  data.reserve(kept.size() * table.dim());
  for (const auto& w : kept) {
    const auto v = table.vector(static_cast<std::size_t>(table.find(w)));
    data.insert(data.end(), v.begin(), v.end());
  }
  const KMeansResult res = kmeans(data, table.dim(), k, seed, max_iters, tol);
  ClusterModel m;
  m.k = k;
  m.dim = table.dim();
  m.seed = seed;
  m.centroids = res.centroids;
  for (std::size_t i = 0; i < kept.size(); ++i) m.assignment.emplace(kept[i], res.labels[i]);
  return m;
}

std::vector<double> cluster_encode(const Essay& essay, const ClusterModel& model) {
  std::vector<double> out(model.k, 0.0);
  for (const auto& tok : essay.tokens) {
    auto it = model.assignment.find(fold_case(tok));
    if (it != model.assignment.end()) out[it->second] = 1.0;
  }
  return out;
}

}  // namespace cefr
