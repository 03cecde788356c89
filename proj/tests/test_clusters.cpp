#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "cefr/clusters.hpp"
#include "cefr/errors.hpp"
#include "cefr/rng.hpp"

using namespace cefr;

namespace {

double sq(double x) { return x * x; }

// Minimum inertia over every labelling of the points into exactly two groups.
double brute_force_two_means(const std::vector<double>& pts, std::size_t dim,
                             std::vector<int>* best_labels) {
  const std::size_t n = pts.size() / dim;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 1; mask + 1 < (1u << n); ++mask) {
    double inertia = 0;
    for (int g = 0; g < 2; ++g) {
      std::vector<double> mean(dim, 0.0);
      double cnt = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (((mask >> i) & 1) == std::size_t(g)) {
          for (std::size_t d = 0; d < dim; ++d) mean[d] += pts[i * dim + d];
          cnt += 1;
        }
      for (auto& m : mean) m /= cnt;
      for (std::size_t i = 0; i < n; ++i)
        if (((mask >> i) & 1) == std::size_t(g))
          for (std::size_t d = 0; d < dim; ++d) inertia += sq(pts[i * dim + d] - mean[d]);
    }
    if (inertia < best) {
      best = inertia;
      best_labels->assign(n, 0);
      for (std::size_t i = 0; i < n; ++i) (*best_labels)[i] = int((mask >> i) & 1);
    }
  }
  return best;
}

std::vector<double> blobs(std::uint64_t seed, std::size_t n, std::size_t dim, std::size_t centers) {
  Rng rng(seed);
  std::vector<double> c(centers * dim);
  for (auto& v : c) v = 10.0 * rng.normal();
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = rng.below(centers);
    for (std::size_t d = 0; d < dim; ++d) out.push_back(c[k * dim + d] + rng.normal());
  }
  return out;
}

ClusterModel manual_model() {
  ClusterModel m;
  m.k = 10;
  m.dim = 1;
  m.centroids.assign(10, 0.0);
  m.assignment = {{"cat", 3}, {"dog", 7}, {"sat", 3}};
  return m;
}

}  // namespace

TEST_SUITE("clusters") {
  TEST_CASE("k equal to the number of distinct points fits exactly") {
    const std::vector<double> pts = {0, 0, 1, 0, 0, 1, 5, 5, 2, 3};
    const auto r = kmeans(pts, 2, 5, 1);
    CHECK(r.inertia() == doctest::Approx(0.0));
    std::set<std::uint32_t> labels(r.labels.begin(), r.labels.end());
    CHECK(labels.size() == 5);
  }

  TEST_CASE("two distant pairs match the brute-force optimum") {
    const std::vector<double> pts = {0, 0, 0.5, 0.2, 10, 10, 10.3, 9.8};
    std::vector<int> best;
    const double opt = brute_force_two_means(pts, 2, &best);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto r = kmeans(pts, 2, 2, seed);
      CHECK(r.inertia() == doctest::Approx(opt).epsilon(1e-12));
      CHECK(r.labels[0] == r.labels[1]);
      CHECK(r.labels[2] == r.labels[3]);
      CHECK(r.labels[0] != r.labels[2]);
    }
  }

  TEST_CASE("random small sets reach the two-partition optimum from some seed") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> pts(8 * 2);
      for (auto& v : pts) v = rng.normal();
      std::vector<int> best;
      const double opt = brute_force_two_means(pts, 2, &best);
      double found = std::numeric_limits<double>::infinity();
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto r = kmeans(pts, 2, 2, seed);
        CHECK(r.inertia() >= opt - 1e-9);
        found = std::min(found, r.inertia());
      }
      CHECK(found == doctest::Approx(opt).epsilon(1e-9));
    }
  }

  TEST_CASE("inertia never increases and the run is deterministic") {
    const auto pts = blobs(5, 600, 4, 8);
    const auto a = kmeans(pts, 4, 8, 11);
    const auto b = kmeans(pts, 4, 8, 11);
    CHECK(a.labels == b.labels);
    CHECK(a.centroids == b.centroids);
    REQUIRE(a.inertia_history.size() >= 2);
    for (std::size_t i = 1; i < a.inertia_history.size(); ++i)
      CHECK(a.inertia_history[i] <= a.inertia_history[i - 1] * (1 + 1e-12) + 1e-12);
    for (auto l : a.labels) CHECK(l < 8u);
  }

  TEST_CASE("errors") {
    const std::vector<double> dup = {1, 1, 1, 1, 2, 2};
    CHECK_THROWS_AS(kmeans(std::vector<double>{}, 2, 1, 0), InvalidArgument);
    CHECK_THROWS_AS(kmeans(dup, 2, 3, 0), InvalidArgument);
    CHECK_THROWS_AS(kmeans(dup, 2, 0, 0), InvalidArgument);
    CHECK_NOTHROW(kmeans(dup, 2, 2, 0));
  }

  TEST_CASE("encoding is a set indicator") {
    const auto m = manual_model();
    const auto v = cluster_encode(make_essay("a", "The Cat and the dog"), m);
    REQUIRE(v.size() == 10);
    for (std::size_t c = 0; c < 10; ++c) CHECK(v[c] == (c == 3 || c == 7 ? 1.0 : 0.0));
    CHECK(cluster_encode(make_essay("b", "nothing known here"), m) == std::vector<double>(10, 0.0));
    CHECK(cluster_encode(make_essay("c", "cat cat cat cat cat"), m) ==
          cluster_encode(make_essay("d", "cat"), m));
    CHECK(cluster_encode(make_essay("e", "dog sat cat"), m) == cluster_encode(make_essay("f", "cat dog"), m));
  }

  TEST_CASE("fitting on a table, loading and persistence") {
    const auto path = std::filesystem::temp_directory_path() / "cefr_emb.txt";
    {
      std::ofstream out(path);
      out << "4 2\nApple 0 0\npear 0.1 0\ncar 10 10\nbus 10 10.2\n";
    }
    const auto table = load_embeddings(path);
    CHECK(table.size() == 4);
    CHECK(table.dim() == 2);
    CHECK(table.find("apple") == 0);
    const auto model = fit_cluster_model(table, {"apple", "pear", "car", "bus", "missing"}, 2, 3);
    CHECK(model.assignment.size() == 4);
    CHECK(model.assignment.at("apple") == model.assignment.at("pear"));
    CHECK(model.assignment.at("car") == model.assignment.at("bus"));
    CHECK(model.assignment.at("car") != model.assignment.at("pear"));
    BinaryWriter w;
    model.serialize(w);
    BinaryReader r(w.bytes());
    const auto back = ClusterModel::deserialize(r);
    CHECK(back.assignment == model.assignment);
    CHECK(back.centroids == model.centroids);
    CHECK(back.k == 2);

    {
      std::ofstream out(path);
      out << "a 1 2\nb 1 2 3\n";
    }
    CHECK_THROWS_AS(load_embeddings(path), DataError);
    {
      std::ofstream out(path);
      out << "a 1 2\na 3 4\n";
    }
    CHECK_THROWS_AS(load_embeddings(path), DataError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_embeddings(path), ResourceError);
  }

  TEST_CASE("normalization") {
    EmbeddingTable t(2);
    t.add("a", std::vector<double>{3, 4});
    t.add("z", std::vector<double>{0, 0});
    t.normalize();
    CHECK(t.vector(0)[0] == doctest::Approx(0.6));
    CHECK(t.vector(1)[1] == 0.0);
    CHECK_THROWS_AS(t.add("b", std::vector<double>{1}), DataError);
  }
}
