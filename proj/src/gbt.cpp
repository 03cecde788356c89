#include "cefr/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cefr/errors.hpp"
#include "cefr/rng.hpp"

namespace cefr {

namespace {

constexpr std::uint32_t kGbtFormat = 1;
constexpr double kMinHessian = 1e-16;
constexpr double kMinGain = 1e-12;
constexpr double kDegenerateScore = 30.0;

double feature_value(const FeatureMatrix::RowView& row, std::uint32_t f) {
  auto it = std::lower_bound(row.cols.begin(), row.cols.end(), f);
  if (it == row.cols.end() || *it != f) return 0.0;
  return row.values[static_cast<std::size_t>(it - row.cols.begin())];
}

struct Entry {
  double value;
  std::uint32_t row;
};

// Column-major copy of the nonzeros, each column sorted by value.
struct ColumnStore {
  std::vector<std::vector<Entry>> columns;
  std::vector<std::size_t> first_positive;

  explicit ColumnStore(const FeatureMatrix& x) : columns(x.cols()), first_positive(x.cols()) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto r = x.row(i);
      for (std::size_t k = 0; k < r.cols.size(); ++k)
        columns[r.cols[k]].push_back({r.values[k], static_cast<std::uint32_t>(i)});
    }
    for (std::size_t j = 0; j < columns.size(); ++j) {
      auto& col = columns[j];
      std::stable_sort(col.begin(), col.end(),
                       [](const Entry& a, const Entry& b) { return a.value < b.value; });
      first_positive[j] = static_cast<std::size_t>(
          std::partition_point(col.begin(), col.end(), [](const Entry& e) { return e.value < 0.0; }) -
          col.begin());
    }
  }
};

struct Sums {
  double g = 0.0;
  double h = 0.0;
  std::size_t n = 0;

  void add(double gi, double hi, std::size_t ni = 1) {
    g += gi;
    h += hi;
    n += ni;
  }
  Sums minus(const Sums& o) const { return {g - o.g, h - o.h, n - o.n}; }
};

struct Split {
  double gain = kMinGain;
  std::int32_t feature = -1;
  double threshold = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, const ColumnStore& store, const GBTConfig& cfg)
      : x_(x), store_(store), cfg_(cfg) {}

  // `node_of` marks the rows that take part (-1 = excluded).
  RegressionTree build(std::span<const double> grad, std::span<const double> hess,
                       std::vector<std::int32_t> node_of) {
    RegressionTree tree;
    tree.nodes.emplace_back();
    std::vector<Sums> node_sums(1);
    for (std::size_t i = 0; i < node_of.size(); ++i)
      if (node_of[i] >= 0) node_sums[0].add(grad[i], hess[i]);

    std::vector<std::int32_t> level = {0};
    for (int depth = 0; depth < cfg_.max_depth && !level.empty(); ++depth) {
      std::vector<std::int32_t> open;
      for (auto id : level)
        if (node_sums[static_cast<std::size_t>(id)].n >= 2 * cfg_.min_samples_leaf) open.push_back(id);
      if (open.empty()) break;
      const auto splits = find_splits(open, node_sums, grad, hess, node_of);

      std::vector<std::int32_t> next;
      for (std::size_t s = 0; s < open.size(); ++s) {
        const Split& sp = splits[s];
        if (sp.feature < 0) continue;
        auto& node = tree.nodes[static_cast<std::size_t>(open[s])];
        node.feature = sp.feature;
        node.threshold = sp.threshold;
        node.left = static_cast<std::int32_t>(tree.nodes.size());
        node.right = node.left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        node_sums.emplace_back();
        node_sums.emplace_back();
        next.push_back(node.left);
        next.push_back(node.right);
      }
      for (std::size_t i = 0; i < node_of.size(); ++i) {
        const auto id = node_of[i];
        if (id < 0) continue;
        const auto& node = tree.nodes[static_cast<std::size_t>(id)];
        if (node.feature < 0) continue;
        const double v = feature_value(x_.row(i), static_cast<std::uint32_t>(node.feature));
        const auto child = v <= node.threshold ? node.left : node.right;
        node_of[i] = child;
        node_sums[static_cast<std::size_t>(child)].add(grad[i], hess[i]);
      }
      level = std::move(next);
    }
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      auto& node = tree.nodes[id];
      if (node.feature >= 0) continue;
      const Sums& s = node_sums[id];
      node.value = -cfg_.learning_rate * s.g / (s.h + cfg_.lambda);
    }
    return tree;
  }

 private:
  std::vector<Split> find_splits(const std::vector<std::int32_t>& open,
                                 const std::vector<Sums>& node_sums, std::span<const double> grad,
                                 std::span<const double> hess,
                                 const std::vector<std::int32_t>& node_of) const {
    const std::size_t slots = open.size();
    std::vector<std::int32_t> slot_of(node_sums.size(), -1);
    for (std::size_t s = 0; s < slots; ++s) slot_of[static_cast<std::size_t>(open[s])] = static_cast<std::int32_t>(s);
    auto slot = [&](std::uint32_t row) -> std::int32_t {
      const auto id = node_of[row];
      return id < 0 ? -1 : slot_of[static_cast<std::size_t>(id)];
    };

    std::vector<Split> best(slots);
    std::vector<double> parent_score(slots);
    for (std::size_t s = 0; s < slots; ++s) {
      const Sums& t = node_sums[static_cast<std::size_t>(open[s])];
      parent_score[s] = t.g * t.g / (t.h + cfg_.lambda);
    }
    std::vector<Sums> nonzero(slots), left(slots);
    std::vector<double> prev(slots);
    std::vector<char> has_prev(slots);

    for (std::size_t f = 0; f < store_.columns.size(); ++f) {
      const auto& col = store_.columns[f];
      std::fill(nonzero.begin(), nonzero.end(), Sums{});
      for (const auto& e : col)
        if (const auto s = slot(e.row); s >= 0) nonzero[static_cast<std::size_t>(s)].add(grad[e.row], hess[e.row]);
      std::fill(left.begin(), left.end(), Sums{});
      std::fill(has_prev.begin(), has_prev.end(), 0);

      auto consider = [&](std::size_t s, double v) {
        if (!has_prev[s] || !(v > prev[s])) return;
        const Sums& total = node_sums[static_cast<std::size_t>(open[s])];
        const Sums& l = left[s];
        const Sums r = total.minus(l);
        if (l.n < cfg_.min_samples_leaf || r.n < cfg_.min_samples_leaf) return;
        const double gain = 0.5 * (l.g * l.g / (l.h + cfg_.lambda) + r.g * r.g / (r.h + cfg_.lambda) -
                                   parent_score[s]);
        if (gain > best[s].gain) {
          double thr = prev[s] + (v - prev[s]) * 0.5;
          if (!(thr < v)) thr = prev[s];
          best[s] = {gain, static_cast<std::int32_t>(f), thr};
        }
      };
      auto push = [&](std::size_t s, double v, double g, double h, std::size_t n) {
        consider(s, v);
        left[s].add(g, h, n);
        prev[s] = v;
        has_prev[s] = 1;
      };

      const std::size_t split_at = store_.first_positive[f];
      for (std::size_t k = 0; k < split_at; ++k) {
        const auto& e = col[k];
        if (const auto s = slot(e.row); s >= 0) push(static_cast<std::size_t>(s), e.value, grad[e.row], hess[e.row], 1);
      }
      for (std::size_t s = 0; s < slots; ++s) {
        const Sums zero = node_sums[static_cast<std::size_t>(open[s])].minus(nonzero[s]);
        if (zero.n > 0) push(s, 0.0, zero.g, zero.h, zero.n);
      }
      for (std::size_t k = split_at; k < col.size(); ++k) {
        const auto& e = col[k];
        if (const auto s = slot(e.row); s >= 0) push(static_cast<std::size_t>(s), e.value, grad[e.row], hess[e.row], 1);
      }
    }
    for (auto& b : best)
      if (b.feature < 0) b.gain = 0.0;
    return best;
  }

  const FeatureMatrix& x_;
  const ColumnStore& store_;
  const GBTConfig& cfg_;
};

}  // namespace

std::vector<double> inverse_frequency_weights(std::span<const std::size_t> counts) {
  const std::size_t k = counts.size();
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  std::string missing;
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] == 0) missing += (missing.empty() ? "" : ", ") + std::to_string(c);
  if (!missing.empty()) throw DataError("class weights: classes absent from labels: " + missing);
  std::vector<double> w(k);
  for (std::size_t c = 0; c < k; ++c)
    w[c] = static_cast<double>(n) / (static_cast<double>(k) * static_cast<double>(counts[c]));
  return w;
}

ClassWeights default_class_weights(std::span<const Level> labels) {
  std::array<std::size_t, kNumLevels> counts{};
  for (auto l : labels) ++counts[index_of(l)];
  std::string missing;
  for (std::size_t c = 0; c < kNumLevels; ++c)
    if (counts[c] == 0)
      missing += (missing.empty() ? "" : ", ") + std::string(to_string(level_from_index(c)));
  if (!missing.empty()) throw DataError("class weights: levels absent from labels: " + missing);
  const auto w = inverse_frequency_weights(counts);
  ClassWeights out{};
  std::copy(w.begin(), w.end(), out.begin());
  return out;
}

void GBTConfig::validate() const {
  if (max_depth < 1) throw InvalidArgument("gbt: max_depth must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw InvalidArgument("gbt: learning_rate must be in (0, 1]");
  if (lambda < 0.0) throw InvalidArgument("gbt: lambda must be >= 0");
  if (min_samples_leaf < 1) throw InvalidArgument("gbt: min_samples_leaf must be >= 1");
  for (double w : class_weights)
    if (!(w > 0.0)) throw InvalidArgument("gbt: class weights must be positive");
  if (goss) {
    if (!(goss->top_rate > 0.0 && goss->top_rate <= 1.0) || goss->other_rate < 0.0 ||
        goss->top_rate + goss->other_rate > 1.0 + 1e-12)
      throw InvalidArgument("gbt: goss rates must satisfy 0 < a <= 1, b >= 0, a + b <= 1");
  }
}

double RegressionTree::predict(const FeatureMatrix::RowView& row) const {
  std::size_t id = 0;
  while (nodes[id].feature >= 0) {
    const auto& n = nodes[id];
    id = static_cast<std::size_t>(
        feature_value(row, static_cast<std::uint32_t>(n.feature)) <= n.threshold ? n.left : n.right);
  }
  return nodes[id].value;
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int out = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    out = std::max(out, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return out;
}

std::array<double, kNumLevels> GBTModel::scores(const FeatureMatrix::RowView& row) const {
  auto s = base_;
  for (std::size_t c = 0; c < kNumLevels; ++c)
    for (const auto& t : trees_[c]) s[c] += t.predict(row);
  return s;
}

GBTModel GBTModel::untrained(std::uint64_t fingerprint, std::size_t width) {
  GBTModel m;
  m.fingerprint_ = fingerprint;
  m.n_features_ = width;
  m.config_.n_rounds = 0;
  return m;
}

ClassProbs softmax(const std::array<double, kNumLevels>& scores) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  ClassProbs p{};
  double z = 0.0;
  for (std::size_t c = 0; c < kNumLevels; ++c) {
    p[c] = std::exp(scores[c] - mx);
    z += p[c];
  }
  for (auto& v : p) v /= z;
  return p;
}

Level argmax_level(const ClassProbs& p) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumLevels; ++c)
    if (p[c] > p[best]) best = c;
  return level_from_index(best);
}

double weighted_log_loss(std::span<const ClassProbs> probs, std::span<const Level> y,
                         const ClassWeights& weights) {
  double loss = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double w = weights[index_of(y[i])];
    loss -= w * std::log(std::max(probs[i][index_of(y[i])], 1e-300));
    wsum += w;
  }
  return wsum > 0.0 ? loss / wsum : 0.0;
}

GBTModel train_gbt(const FeatureMatrix& x, std::span<const Level> y, const GBTConfig& config) {
  config.validate();
  if (x.rows() == 0) throw InvalidArgument("train_gbt: empty training matrix");
  if (x.rows() != y.size())
    throw InvalidArgument("train_gbt: " + std::to_string(x.rows()) + " rows but " +
                          std::to_string(y.size()) + " labels");
  const std::size_t n = x.rows();

  GBTModel model;
  model.fingerprint_ = x.fingerprint();
  model.n_features_ = x.cols();
  model.config_ = config;

  const bool single_class =
      std::all_of(y.begin(), y.end(), [&](Level l) { return l == y.front(); });
  if (single_class) {
    model.base_[index_of(y.front())] = kDegenerateScore;
    model.config_.n_rounds = 0;
    return model;
  }

  const ColumnStore store(x);
  TreeBuilder builder(x, store, config);
  std::vector<std::array<double, kNumLevels>> f(n, model.base_);
  std::vector<ClassProbs> p(n);
  std::array<std::vector<double>, kNumLevels> grad, hess;
  for (auto& g : grad) g.resize(n);
  for (auto& h : hess) h.resize(n);
  std::vector<double> magnitude(n);

  for (std::size_t round = 0; round < config.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = softmax(f[i]);
      const double w = config.class_weights[index_of(y[i])];
      magnitude[i] = 0.0;
      for (std::size_t c = 0; c < kNumLevels; ++c) {
        const double target = index_of(y[i]) == c ? 1.0 : 0.0;
        grad[c][i] = w * (p[i][c] - target);
        hess[c][i] = w * std::max(p[i][c] * (1.0 - p[i][c]), kMinHessian);
        magnitude[i] += std::abs(grad[c][i]);
      }
    }

    std::vector<std::int32_t> active(n, 0);
    std::array<std::vector<double>, kNumLevels> g_used = grad, h_used = hess;
    if (config.goss) {
      const auto sample = goss_sample(magnitude, config.goss->top_rate, config.goss->other_rate,
                                      derive_seed(config.seed, "goss/" + std::to_string(round)));
      std::fill(active.begin(), active.end(), -1);
      for (std::size_t k = 0; k < sample.indices.size(); ++k) {
        const auto i = sample.indices[k];
        active[i] = 0;
        for (std::size_t c = 0; c < kNumLevels; ++c) {
          g_used[c][i] *= sample.multipliers[k];
          h_used[c][i] *= sample.multipliers[k];
        }
      }
    }

    for (std::size_t c = 0; c < kNumLevels; ++c) {
      RegressionTree tree = builder.build(g_used[c], h_used[c], active);
      for (std::size_t i = 0; i < n; ++i) f[i][c] += tree.predict(x.row(i));
      model.trees_[c].push_back(std::move(tree));
    }

    if (config.track_loss) {
      for (std::size_t i = 0; i < n; ++i) p[i] = softmax(f[i]);
      model.train_loss_.push_back(weighted_log_loss(p, y, config.class_weights));
    }
  }
  return model;
}

ClassProbs predict_proba(const GBTModel& model, const FeatureMatrix& x, std::size_t row) {
  if (x.fingerprint() != model.fingerprint())
    throw FingerprintMismatch("feature fingerprint does not match the model");
  return softmax(model.scores(x.row(row)));
}

std::vector<ClassProbs> predict_proba(const GBTModel& model, const FeatureMatrix& x) {
  if (x.fingerprint() != model.fingerprint())
    throw FingerprintMismatch("feature fingerprint does not match the model");
  std::vector<ClassProbs> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = softmax(model.scores(x.row(i)));
  return out;
}

void GBTModel::serialize(BinaryWriter& w) const {
  w.u32(kGbtFormat);
  w.u64(fingerprint_);
  w.u64(n_features_);
  w.u32(static_cast<std::uint32_t>(config_.max_depth));
  w.f64(config_.learning_rate);
  w.u64(config_.n_rounds);
  w.u64(config_.min_samples_leaf);
  w.f64(config_.lambda);
  w.u64(config_.seed);
  w.u8(config_.goss ? 1 : 0);
  w.f64(config_.goss ? config_.goss->top_rate : 0.0);
  w.f64(config_.goss ? config_.goss->other_rate : 0.0);
  for (double cw : config_.class_weights) w.f64(cw);
  for (double b : base_) w.f64(b);
  for (const auto& per_class : trees_) {
    w.u64(per_class.size());
    for (const auto& t : per_class) {
      w.u64(t.nodes.size());
      for (const auto& nd : t.nodes) {
        w.u32(static_cast<std::uint32_t>(nd.feature));
        w.f64(nd.threshold);
        w.u32(static_cast<std::uint32_t>(nd.left));
        w.u32(static_cast<std::uint32_t>(nd.right));
        w.f64(nd.value);
      }
    }
  }
}

GBTModel GBTModel::deserialize(BinaryReader& r) {
  if (const auto v = r.u32(); v != kGbtFormat)
    throw ModelVersionError("boosted model section version " + std::to_string(v));
  GBTModel m;
  m.fingerprint_ = r.u64();
  m.n_features_ = r.u64();
  m.config_.max_depth = static_cast<int>(r.u32());
  m.config_.learning_rate = r.f64();
  m.config_.n_rounds = r.u64();
  m.config_.min_samples_leaf = r.u64();
  m.config_.lambda = r.f64();
  m.config_.seed = r.u64();
  const bool goss = r.u8() != 0;
  const double a = r.f64(), b = r.f64();
  if (goss) m.config_.goss = GossParams{a, b};
  for (double& cw : m.config_.class_weights) cw = r.f64();
  for (double& bs : m.base_) bs = r.f64();
  for (auto& per_class : m.trees_) {
    const auto nt = r.count(8);
    per_class.resize(nt);
    for (auto& t : per_class) {
      const auto nn = r.count(28);
      t.nodes.resize(nn);
      for (auto& nd : t.nodes) {
        nd.feature = static_cast<std::int32_t>(r.u32());
        nd.threshold = r.f64();
        nd.left = static_cast<std::int32_t>(r.u32());
        nd.right = static_cast<std::int32_t>(r.u32());
        nd.value = r.f64();
      }
      for (const auto& nd : t.nodes) {
        if (nd.feature < 0) continue;
        if (static_cast<std::size_t>(nd.feature) >= m.n_features_ || nd.left <= 0 ||
            nd.right <= 0 || static_cast<std::size_t>(nd.left) >= nn ||
            static_cast<std::size_t>(nd.right) >= nn)
          throw ModelFormatError("corrupt tree node");
      }
    }
  }
  return m;
}

}  // namespace cefr
