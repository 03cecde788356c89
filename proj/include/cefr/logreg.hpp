#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cefr/binary_io.hpp"
#include "cefr/features.hpp"
#include "cefr/gbt.hpp"
#include "cefr/level.hpp"

namespace cefr {

struct LogRegOptions {
  double l2 = 1e-3;
  double grad_tol = 1e-5;
  std::size_t max_iters = 20000;
};

/// Weighted multinomial cross-entropy with an L2 penalty on the weights
/// (biases unpenalized), over a fixed training set. Parameters are laid out
/// class-major: for class c, `dim` weights followed by one bias.
class LogRegObjective {
 public:
  LogRegObjective(const FeatureMatrix& x, std::span<const Level> y, const ClassWeights& weights,
                  double l2, std::vector<double> column_scale);

  std::size_t n_params() const { return kNumLevels * (dim_ + 1); }
  std::size_t dim() const { return dim_; }

  /// Returns the objective and writes its gradient into `grad`.
  double evaluate(std::span<const double> params, std::span<double> grad) const;

 private:
  const FeatureMatrix& x_;
  std::span<const Level> y_;
  ClassWeights weights_;
  double l2_;
  std::size_t dim_;
  std::vector<double> scale_;
  double weight_sum_ = 0.0;
};

class LogRegModel {
 public:
  std::uint64_t fingerprint() const { return fingerprint_; }
  const std::vector<double>& params() const { return params_; }
  const std::vector<double>& column_scale() const { return scale_; }
  std::size_t iterations() const { return iterations_; }
  double final_grad_norm() const { return grad_norm_; }

  std::array<double, kNumLevels> scores(const FeatureMatrix::RowView& row) const;
  ClassProbs predict_proba(const FeatureMatrix& x, std::size_t row) const;

  void serialize(BinaryWriter& w) const;
  static LogRegModel deserialize(BinaryReader& r);

  friend LogRegModel train_logreg(const FeatureMatrix& x, std::span<const Level> y,
                                  const ClassWeights& weights, const LogRegOptions& options);

 private:
  std::uint64_t fingerprint_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> scale_;
  std::vector<double> params_;
  std::size_t iterations_ = 0;
  double grad_norm_ = 0.0;
};

/// Per-column root-mean-square over all rows (zeros included); columns that
/// are entirely zero get scale 1.
std::vector<double> rms_column_scale(const FeatureMatrix& x);

/// Batch gradient descent with backtracking line search, stopping when the
/// gradient norm drops below `grad_tol` or after `max_iters` steps. Columns
/// are divided by their RMS before fitting. Throws InvalidArgument on an
/// empty or mismatched training set.
LogRegModel train_logreg(const FeatureMatrix& x, std::span<const Level> y,
                         const ClassWeights& weights, const LogRegOptions& options = {});

}  // namespace cefr
