#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cefr/bow.hpp"
#include "cefr/clusters.hpp"
#include "cefr/corpus.hpp"
#include "cefr/features.hpp"
#include "cefr/gbt.hpp"
#include "cefr/lda.hpp"
#include "cefr/logreg.hpp"
#include "cefr/ngram_lm.hpp"
#include "cefr/pos.hpp"
#include "cefr/readability.hpp"

namespace cefr {

enum class ClassifierKind : unsigned char { Gbt, LogReg };

struct PipelineConfig {
  std::vector<Family> families{kFamilyOrder.begin(), kFamilyOrder.end()};
  std::uint64_t seed = 42;

  struct Resources {
    std::filesystem::path dictionary;
    std::filesystem::path easy_words;
    std::filesystem::path embeddings;
    std::filesystem::path pos_lexicon;
    /// Optional pre-computed tags (`id TAG TAG ...` per line) replacing the
    /// built-in tagger.
    std::filesystem::path pos_tags;
  } resources;

  struct Numeric {
    bool idf = true;
  } numeric;

  struct Lm {
    int order = 3;
    std::size_t rare_threshold = 10;
    /// Training rows get LM features from models fitted on the other inner
    /// folds, so they carry no in-sample advantage; below 2 disables this.
    std::size_t cross_fit_folds = 5;
  } lm;

  struct Clusters {
    std::size_t k = 1000;
    std::size_t max_iters = 100;
    /// Cluster only words seen in the training essays instead of the whole
    /// embedding table.
    bool corpus_vocabulary = true;
  } clusters;

  struct Topics {
    std::vector<std::size_t> counts{30, 40, 50, 60};
    std::size_t burn_in = 200;
    std::size_t sample_every = 10;
    std::size_t n_samples = 5;
    std::size_t infer_iters = 50;
    std::size_t min_doc_freq = 2;
  } topics;

  struct Bow {
    std::size_t min_df = 2;
    bool bigrams_only = false;
  } bow;

  struct Model {
    ClassifierKind kind = ClassifierKind::Gbt;
    int max_depth = 3;
    double learning_rate = 0.06;
    std::size_t n_rounds = 4000;
    std::size_t min_samples_leaf = 20;
    double lambda = 1.0;
    /// Inverse-frequency class weights; uniform when false.
    bool class_weights = true;
    bool goss = false;
    double goss_a = 0.2;
    double goss_b = 0.1;
    double l2 = 1e-3;
  } model;

  bool has(Family f) const;
  /// Throws InvalidArgument on an out-of-range setting.
  void validate() const;
  /// Hash of every setting that shapes the feature layout or the model.
  std::uint64_t fingerprint() const;
};

/// YAML mapping with optional sections `families`, `seed`, `resources`,
/// `numeric`, `lm`, `clusters`, `topics`, `bow`, `model`. Relative resource
/// paths resolve against the file's directory. Throws DataError on unknown
/// keys or bad values, ResourceError when unreadable.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(std::string_view yaml, const std::filesystem::path& base_dir = {});
/// Comma-separated family names. Throws DataError on an unknown name.
std::vector<Family> parse_family_list(std::string_view list);

class FittedPipeline {
 public:
  const PipelineConfig& config() const { return config_; }
  const FeatureLayout& layout() const { return layout_; }
  std::uint64_t fingerprint() const { return layout_.fingerprint(); }

  /// Features of `essays`; fitted state is never modified. `tagger`
  /// overrides the built-in tagger.
  FeatureMatrix transform(std::span<const Essay> essays, const Tagger* tagger = nullptr) const;

  const NumericRegistry& numeric_registry() const { return registry_; }
  const LexicalResources& lexical() const { return lexical_; }
  const EssayLanguageModel* lm_low() const { return lm_low_ ? &*lm_low_ : nullptr; }
  const EssayLanguageModel* lm_high() const { return lm_high_ ? &*lm_high_ : nullptr; }
  const ClusterModel* clusters() const { return clusters_ ? &*clusters_ : nullptr; }
  const std::vector<LdaModel>& topic_models() const { return lda_; }
  const Vectorizer* vectorizer() const { return bow_ ? &*bow_ : nullptr; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  void serialize(BinaryWriter& w) const;
  static FittedPipeline deserialize(BinaryReader& r);

  friend struct PipelineFitter;

 private:
  std::vector<double> topic_block(const Essay& essay) const;
  struct RowOverrides {
    const std::vector<std::vector<double>>* topics = nullptr;
    const std::vector<std::array<double, 3>>* lm = nullptr;
  };
  FeatureMatrix transform_with(std::span<const Essay> essays,
                               const std::vector<std::vector<PosTag>>& tags,
                               RowOverrides overrides) const;

  PipelineConfig config_;
  FeatureLayout layout_;
  NumericRegistry registry_;
  LexicalResources lexical_;
  LexiconTagger tagger_;
  std::optional<EssayLanguageModel> lm_low_, lm_high_;
  std::optional<ClusterModel> clusters_;
  std::vector<LdaModel> lda_;
  std::optional<Vectorizer> bow_;
  std::vector<std::string> warnings_;
};

struct FitResult {
  FittedPipeline pipeline;
  /// Features of the training essays. Topic columns hold the sampler's own
  /// averaged distributions and LM columns are cross-fitted.
  FeatureMatrix train_features;
};

/// Fits every enabled family on `train` only. Throws ResourceError naming
/// the family and path of a missing resource, DataError when the LM family
/// lacks essays of either level group or the data is unlabeled.
FitResult fit_pipeline(const Dataset& train, const PipelineConfig& config,
                       const Tagger* tagger = nullptr);

using Classifier = std::variant<GBTModel, LogRegModel>;

ClassProbs predict_proba(const Classifier& model, const FeatureMatrix& x, std::size_t row);
std::vector<ClassProbs> predict_proba(const Classifier& model, const FeatureMatrix& x);

/// Per-class weights per the config: inverse frequency or all ones.
ClassWeights configured_class_weights(const PipelineConfig& config, std::span<const Level> labels);

Classifier train_classifier(const FeatureMatrix& x, std::span<const Level> y,
                            const PipelineConfig& config);

struct TrainedModel {
  FittedPipeline pipeline;
  Classifier classifier;

  std::vector<ClassProbs> predict(std::span<const Essay> essays, const Tagger* tagger = nullptr) const;
};

TrainedModel train_model(const Dataset& train, const PipelineConfig& config,
                         const Tagger* tagger = nullptr);

/// Single-file container: magic, format version, payload length, layout and
/// config fingerprints, payload, checksum. Written atomically.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
std::string model_bytes(const TrainedModel& model);

/// Throws ModelVersionError, ModelTruncatedError or ModelFormatError on a
/// damaged file, and FingerprintMismatch when `expected` is given and its
/// fingerprint differs from the one the model was trained with.
TrainedModel load_model(const std::filesystem::path& path, const PipelineConfig* expected = nullptr);
TrainedModel model_from_bytes(std::string_view bytes, const PipelineConfig* expected = nullptr);

/// Feature cache keyed by layout fingerprint and dataset hash, written via a
/// temporary file and rename.
void save_feature_cache(const std::filesystem::path& path, const FeatureMatrix& x,
                        std::uint64_t dataset_hash);
/// The cached matrix, or nothing when the file is absent, unreadable or keyed
/// differently.
std::optional<FeatureMatrix> load_feature_cache(const std::filesystem::path& path,
                                                std::uint64_t dataset_hash,
                                                std::optional<std::uint64_t> fingerprint = {});

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace cefr
