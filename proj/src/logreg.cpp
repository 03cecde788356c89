#include "cefr/logreg.hpp"

#include <algorithm>
#include <cmath>

#include "cefr/errors.hpp"

namespace cefr {

namespace {

constexpr std::uint32_t kLogRegFormat = 1;

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::array<double, kNumLevels> linear_scores(std::span<const double> params, std::size_t dim,
                                             std::span<const double> scale,
                                             const FeatureMatrix::RowView& row) {
  std::array<double, kNumLevels> s{};
  for (std::size_t c = 0; c < kNumLevels; ++c) {
    const double* w = params.data() + c * (dim + 1);
    double acc = w[dim];
    for (std::size_t k = 0; k < row.cols.size(); ++k)
      acc += w[row.cols[k]] * row.values[k] / scale[row.cols[k]];
    s[c] = acc;
  }
  return s;
}

}  // namespace

std::vector<double> rms_column_scale(const FeatureMatrix& x) {
  std::vector<double> sq(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = x.row(i);
    for (std::size_t k = 0; k < r.cols.size(); ++k) sq[r.cols[k]] += r.values[k] * r.values[k];
  }
  for (auto& v : sq) {
    v = x.rows() ? std::sqrt(v / static_cast<double>(x.rows())) : 0.0;
    if (!(v > 0.0)) v = 1.0;
  }
  return sq;
}

LogRegObjective::LogRegObjective(const FeatureMatrix& x, std::span<const Level> y,
                                 const ClassWeights& weights, double l2,
                                 std::vector<double> column_scale)
    : x_(x), y_(y), weights_(weights), l2_(l2), dim_(x.cols()), scale_(std::move(column_scale)) {
  if (scale_.empty()) scale_.assign(dim_, 1.0);
  if (scale_.size() != dim_) throw InvalidArgument("logreg: column scale has wrong length");
  for (auto l : y_) weight_sum_ += weights_[index_of(l)];
}

double LogRegObjective::evaluate(std::span<const double> params, std::span<double> grad) const {
  if (params.size() != n_params() || grad.size() != n_params())
    throw InvalidArgument("logreg: parameter vector has wrong length");
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < x_.rows(); ++i) {
    const auto row = x_.row(i);
    const auto p = softmax(linear_scores(params, dim_, scale_, row));
    const std::size_t yi = index_of(y_[i]);
    const double w = weights_[yi] / weight_sum_;
    loss -= w * std::log(std::max(p[yi], 1e-300));
    for (std::size_t c = 0; c < kNumLevels; ++c) {
      const double d = w * (p[c] - (c == yi ? 1.0 : 0.0));
      double* g = grad.data() + c * (dim_ + 1);
      for (std::size_t k = 0; k < row.cols.size(); ++k)
        g[row.cols[k]] += d * row.values[k] / scale_[row.cols[k]];
      g[dim_] += d;
    }
  }
  for (std::size_t c = 0; c < kNumLevels; ++c) {
    const std::size_t base = c * (dim_ + 1);
    for (std::size_t j = 0; j < dim_; ++j) {
      loss += 0.5 * l2_ * params[base + j] * params[base + j];
      grad[base + j] += l2_ * params[base + j];
    }
  }
  return loss;
}

std::array<double, kNumLevels> LogRegModel::scores(const FeatureMatrix::RowView& row) const {
  return linear_scores(params_, dim_, scale_, row);
}

ClassProbs LogRegModel::predict_proba(const FeatureMatrix& x, std::size_t row) const {
  if (x.fingerprint() != fingerprint_)
    throw FingerprintMismatch("feature fingerprint does not match the model");
  return softmax(scores(x.row(row)));
}

LogRegModel train_logreg(const FeatureMatrix& x, std::span<const Level> y,
                         const ClassWeights& weights, const LogRegOptions& options) {
  if (x.rows() == 0) throw InvalidArgument("train_logreg: empty training matrix");
  if (x.rows() != y.size())
    throw InvalidArgument("train_logreg: " + std::to_string(x.rows()) + " rows but " +
                          std::to_string(y.size()) + " labels");
  if (options.l2 < 0.0) throw InvalidArgument("train_logreg: l2 must be >= 0");

  LogRegModel m;
  m.fingerprint_ = x.fingerprint();
  m.dim_ = x.cols();
  m.scale_ = rms_column_scale(x);
  const LogRegObjective obj(x, y, weights, options.l2, m.scale_);

  std::vector<double> theta(obj.n_params(), 0.0), grad(obj.n_params()), trial(obj.n_params()),
      trial_grad(obj.n_params());
  double f = obj.evaluate(theta, grad);
  double step = 1.0;
  std::size_t it = 0;
  double gn = norm(grad);
  for (; it < options.max_iters && gn >= options.grad_tol; ++it) {
    // Armijo backtracking; the step is allowed to grow again afterwards.
    double t = step;
    double ft = 0.0;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t j = 0; j < theta.size(); ++j) trial[j] = theta[j] - t * grad[j];
      ft = obj.evaluate(trial, trial_grad);
      if (ft <= f - 0.5 * t * gn * gn) break;
      t *= 0.5;
    }
    if (!(ft < f)) break;
    theta.swap(trial);
    grad.swap(trial_grad);
    f = ft;
    gn = norm(grad);
    step = std::min(t * 2.0, 1e6);
  }
  m.params_ = std::move(theta);
  m.iterations_ = it;
  m.grad_norm_ = gn;
  return m;
}

void LogRegModel::serialize(BinaryWriter& w) const {
  w.u32(kLogRegFormat);
  w.u64(fingerprint_);
  w.u64(dim_);
  w.f64s(scale_);
  w.f64s(params_);
}

LogRegModel LogRegModel::deserialize(BinaryReader& r) {
  if (const auto v = r.u32(); v != kLogRegFormat)
    throw ModelVersionError("logistic model section version " + std::to_string(v));
  LogRegModel m;
  m.fingerprint_ = r.u64();
  m.dim_ = r.u64();
  m.scale_ = r.f64s();
  m.params_ = r.f64s();
  if (m.scale_.size() != m.dim_ || m.params_.size() != kNumLevels * (m.dim_ + 1))
    throw ModelFormatError("logistic model: inconsistent parameter lengths");
  return m;
}

}  // namespace cefr
