#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cefr/binary_io.hpp"
#include "cefr/features.hpp"
#include "cefr/goss.hpp"
#include "cefr/level.hpp"

namespace cefr {

using ClassWeights = std::array<double, kNumLevels>;
using ClassProbs = std::array<double, kNumLevels>;

/// n / (K * n_c) for K = counts.size(). Throws DataError naming every class
/// with a zero count.
std::vector<double> inverse_frequency_weights(std::span<const std::size_t> counts);

/// Inverse-frequency weights over the six levels.
ClassWeights default_class_weights(std::span<const Level> labels);

struct GBTConfig {
  int max_depth = 3;
  double learning_rate = 0.06;
  std::size_t n_rounds = 4000;
  ClassWeights class_weights{1, 1, 1, 1, 1, 1};
  std::optional<GossParams> goss;
  std::size_t min_samples_leaf = 20;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  /// Record the weighted training log-loss after every round.
  bool track_loss = false;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

/// Depth-limited regression tree over sparse rows (absent features read 0).
/// Rows with value <= threshold go left.
struct RegressionTree {
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double predict(const FeatureMatrix::RowView& row) const;
  /// Edges on the longest root-to-leaf path.
  int depth() const;
};

class GBTModel {
 public:
  std::uint64_t fingerprint() const { return fingerprint_; }
  std::size_t n_features() const { return n_features_; }
  std::size_t rounds() const { return trees_[0].size(); }
  const std::vector<RegressionTree>& trees(Level c) const { return trees_[index_of(c)]; }
  const GBTConfig& config() const { return config_; }
  const std::vector<double>& train_loss() const { return train_loss_; }
  const std::array<double, kNumLevels>& base_scores() const { return base_; }

  /// Raw additive scores per class.
  std::array<double, kNumLevels> scores(const FeatureMatrix::RowView& row) const;

  void serialize(BinaryWriter& w) const;
  static GBTModel deserialize(BinaryReader& r);

  /// Zero-round model over `width` features: uniform predictions.
  static GBTModel untrained(std::uint64_t fingerprint, std::size_t width);

  friend GBTModel train_gbt(const FeatureMatrix& x, std::span<const Level> y,
                            const GBTConfig& config);

 private:
  std::uint64_t fingerprint_ = 0;
  std::size_t n_features_ = 0;
  GBTConfig config_;
  std::array<double, kNumLevels> base_{};
  std::array<std::vector<RegressionTree>, kNumLevels> trees_;
  std::vector<double> train_loss_;
};

/// Softmax multiclass boosting: each round fits one tree per class to
/// weighted cross-entropy gradients and hessians with exact greedy splits
/// and Newton leaf values. Throws InvalidArgument on an empty or
/// mismatched training set.
GBTModel train_gbt(const FeatureMatrix& x, std::span<const Level> y, const GBTConfig& config);

ClassProbs softmax(const std::array<double, kNumLevels>& scores);

/// Checks the matrix fingerprint against the model; throws
/// FingerprintMismatch on disagreement.
ClassProbs predict_proba(const GBTModel& model, const FeatureMatrix& x, std::size_t row);
std::vector<ClassProbs> predict_proba(const GBTModel& model, const FeatureMatrix& x);

/// Argmax with ties resolved toward the lower level.
Level argmax_level(const ClassProbs& p);

/// Weighted mean cross-entropy.
double weighted_log_loss(std::span<const ClassProbs> probs, std::span<const Level> y,
                         const ClassWeights& weights);

}  // namespace cefr
