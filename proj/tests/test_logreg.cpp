#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cefr/errors.hpp"
#include "cefr/logreg.hpp"
#include "cefr/rng.hpp"

using namespace cefr;

namespace {

constexpr ClassWeights kUniform = {1, 1, 1, 1, 1, 1};

struct Data {
  FeatureMatrix x;
  std::vector<Level> y;
};

Data make_data(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
  Data d;
  for (auto& r : rows) {
    for (auto& v : r) v = rng.uniform() < 0.3 ? 0.0 : rng.normal() * 3;
    d.y.push_back(static_cast<Level>(rng.below(kNumLevels)));
  }
  d.x = FeatureMatrix::from_dense(rows);
  return d;
}

// Direct evaluation of the weighted, scaled cross-entropy objective.
double direct_objective(const Data& d, const ClassWeights& w, double l2, const std::vector<double>& scale,
                        const std::vector<double>& p) {
  const std::size_t dim = d.x.cols();
  double loss = 0, wsum = 0;
  for (std::size_t i = 0; i < d.x.rows(); ++i) {
    const auto row = d.x.dense_row(i);
    std::array<double, kNumLevels> s{};
    for (std::size_t c = 0; c < kNumLevels; ++c) {
      s[c] = p[c * (dim + 1) + dim];
      for (std::size_t j = 0; j < dim; ++j) s[c] += p[c * (dim + 1) + j] * row[j] / scale[j];
    }
    const double mx = *std::max_element(s.begin(), s.end());
    double z = 0;
    for (double v : s) z += std::exp(v - mx);
    const auto k = static_cast<std::size_t>(d.y[i]);
    loss += w[k] * (std::log(z) + mx - s[k]);
    wsum += w[k];
  }
  double reg = 0;
  for (std::size_t c = 0; c < kNumLevels; ++c)
    for (std::size_t j = 0; j < dim; ++j) reg += p[c * (dim + 1) + j] * p[c * (dim + 1) + j];
  return loss / wsum + 0.5 * l2 * reg;
}

}  // namespace

TEST_SUITE("logreg") {
  TEST_CASE("objective value and gradient against independent oracles") {
    Rng rng(2);
    for (int trial = 0; trial < 5; ++trial) {
      const auto d = make_data(25, 4, 10 + trial);
      const ClassWeights w = {0.5, 1, 2, 1.5, 3, 0.7};
      const auto scale = rms_column_scale(d.x);
      const LogRegObjective obj(d.x, d.y, w, 0.1, scale);
      std::vector<double> p(obj.n_params()), g(obj.n_params()), scratch(obj.n_params());
      for (auto& v : p) v = rng.normal() * 0.5;
      const double f = obj.evaluate(p, g);
      CHECK(f == doctest::Approx(direct_objective(d, w, 0.1, scale, p)).epsilon(1e-12));
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double h = 1e-5;
        auto pp = p, pm = p;
        pp[k] += h;
        pm[k] -= h;
        const double fd = (obj.evaluate(pp, scratch) - obj.evaluate(pm, scratch)) / (2 * h);
        CHECK(std::abs(fd - g[k]) <= 1e-5 * std::max(1.0, std::abs(g[k])));
      }
    }
  }

  TEST_CASE("column scale") {
    const auto x = FeatureMatrix::from_dense({{3, 0}, {4, 0}});
    const auto s = rms_column_scale(x);
    CHECK(s[0] == doctest::Approx(std::sqrt(12.5)));
    CHECK(s[1] == 1.0);
  }

  TEST_CASE("separable toy is fit exactly at small l2") {
    Rng rng(3);
    std::vector<std::vector<double>> rows;
    std::vector<Level> y;
    for (int i = 0; i < 60; ++i) {
      const auto c = static_cast<std::size_t>(i % 3);
      rows.push_back({double(c) * 4 + rng.uniform(), rng.normal()});
      y.push_back(static_cast<Level>(c * 2));
    }
    const auto x = FeatureMatrix::from_dense(rows);
    LogRegOptions o;
    o.l2 = 1e-4;
    const auto m = train_logreg(x, y, kUniform, o);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) ok += argmax_level(m.predict_proba(x, i)) == y[i];
    CHECK(ok == x.rows());
  }

  TEST_CASE("converges to the gradient tolerance") {
    const auto d = make_data(80, 5, 4);
    const auto m = train_logreg(d.x, d.y, kUniform, {1e-2, 1e-5, 20000});
    CHECK(m.final_grad_norm() < 1e-5);
    CHECK(m.iterations() < 20000);
  }

  TEST_CASE("mirror-symmetric data gives mirror-symmetric probabilities") {
    std::vector<std::vector<double>> rows;
    std::vector<Level> y;
    for (double v : {0.5, 1.0, 1.5, 2.0}) {
      for (int rep = 0; rep < 2; ++rep) {
        rows.push_back({v});
        y.push_back(Level::B2);
        rows.push_back({-v});
        y.push_back(Level::B1);
      }
    }
    rows.push_back({0.2});
    y.push_back(Level::B1);
    rows.push_back({-0.2});
    y.push_back(Level::B2);
    const auto x = FeatureMatrix::from_dense(rows);
    const auto m = train_logreg(x, y, kUniform, {1e-2, 1e-5, 20000});
    // Exact symmetry holds at the optimum; the solver stops at gradient norm 1e-5.
    for (std::size_t i = 0; i + 1 < x.rows(); i += 2) {
      const auto a = m.predict_proba(x, i), b = m.predict_proba(x, i + 1);
      CHECK(std::abs(a[3] - b[2]) < 1e-4);
      CHECK(std::abs(a[2] - b[3]) < 1e-4);
      CHECK(std::accumulate(a.begin(), a.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  TEST_CASE("persistence and fingerprint checks") {
    const auto d = make_data(40, 3, 5);
    const auto m = train_logreg(d.x, d.y, kUniform);
    BinaryWriter w;
    m.serialize(w);
    BinaryReader r(w.bytes());
    const auto back = LogRegModel::deserialize(r);
    for (std::size_t i = 0; i < d.x.rows(); ++i) CHECK(back.predict_proba(d.x, i) == m.predict_proba(d.x, i));
    const auto other = FeatureMatrix::from_dense({{1, 2}});
    CHECK_THROWS_AS(m.predict_proba(other, 0), FingerprintMismatch);
    const FeatureMatrix empty(FeatureLayout::plain(3));
    CHECK_THROWS_AS(train_logreg(empty, {}, kUniform), InvalidArgument);
    const std::vector<Level> short_y(3, Level::A1);
    CHECK_THROWS_AS(train_logreg(d.x, short_y, kUniform), InvalidArgument);
  }
}
