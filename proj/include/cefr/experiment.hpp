#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cefr/eval.hpp"
#include "cefr/pipeline.hpp"

namespace cefr {

struct ExperimentOptions {
  std::size_t k = 3;
  std::uint64_t seed = 42;
  /// Run folds on separate threads; results are reduced in fold order.
  bool parallel_folds = true;
  /// Directory for per-fold feature caches; empty disables caching.
  std::filesystem::path cache_dir;
  CostMatrix cost = CostMatrix::standard();
  std::function<void(const std::string&)> log;
};

struct FoldRecord {
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  ConfusionMatrix confusion;
  double error = 0.0;
  double accuracy = 0.0;
};

struct EssayPrediction {
  std::string id;
  Level truth = Level::A1;
  Level predicted = Level::A1;
  ClassProbs probs{};
  std::size_t fold = 0;
};

struct CvResult {
  std::vector<Family> families;
  ConfusionMatrix pooled;
  double pooled_error = 0.0;
  double pooled_accuracy = 0.0;
  double mean_error = 0.0;
  double mean_accuracy = 0.0;
  std::vector<FoldRecord> folds;
  std::vector<EssayPrediction> predictions;  // dataset order
  std::vector<std::string> warnings;
};

/// Stratified k-fold cross-validation. Every fitted component sees only
/// the training split of its fold; predictions are pooled into one
/// confusion matrix. Component errors are rethrown with the fold number.
CvResult run_cv(const Dataset& data, const PipelineConfig& config, const ExperimentOptions& options);

enum class AblationMode { Cumulative, LeaveOneOut };

struct AblationRow {
  std::string name;
  std::vector<Family> families;
  CvResult result;
};

/// One cross-validated row per named family set. Fold features are fitted
/// once for the union of the sets and shared by every row. Throws
/// InvalidArgument when there are no sets or a set is empty.
std::vector<AblationRow> run_family_sets(const Dataset& data, const PipelineConfig& config,
                                         const std::vector<std::pair<std::string, std::vector<Family>>>& sets,
                                         const ExperimentOptions& options);

/// Cumulative mode: one row per prefix of `families` taken in the standard
/// family order. Leave-one-out: the all-families row first, then one row
/// per removed family. Folds and features are shared by every row. Throws
/// InvalidArgument when `families` is empty (or has a single family in
/// leave-one-out mode).
std::vector<AblationRow> run_ablation(const Dataset& data, const PipelineConfig& config,
                                      const std::vector<Family>& families, AblationMode mode,
                                      const ExperimentOptions& options);

/// summary.csv, confusion.csv, folds.csv and predictions.csv.
void write_cv_report(const std::filesystem::path& dir, const CvResult& result);
/// ablation.csv and plot.dat (x, E, accuracy per row).
void write_ablation_report(const std::filesystem::path& dir, const std::vector<AblationRow>& rows,
                           AblationMode mode);

/// Fixed-precision text renderings used by the report files.
std::string format_confusion(const ConfusionMatrix& m);
std::string family_list(const std::vector<Family>& families);

}  // namespace cefr
