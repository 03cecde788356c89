#include "cefr/pipeline.hpp"

#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "cefr/errors.hpp"
#include "cefr/eval.hpp"
#include "cefr/rng.hpp"

namespace cefr {

namespace {

constexpr std::string_view kModelMagic = "CEFRMODL";
constexpr std::string_view kCacheMagic = "CEFRFEAT";
constexpr std::uint32_t kModelVersion = 1;
constexpr std::uint32_t kCacheVersion = 1;

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

// ---------------------------------------------------------------- config

void write_config(BinaryWriter& w, const PipelineConfig& c, bool include_paths) {
  std::vector<Family> fams;
  for (auto f : kColumnOrder)
    if (c.has(f)) fams.push_back(f);
  w.u64(fams.size());
  for (auto f : fams) w.u8(static_cast<std::uint8_t>(f));
  if (include_paths) {
    w.u64(c.seed);
    w.str(c.resources.dictionary.string());
    w.str(c.resources.easy_words.string());
    w.str(c.resources.embeddings.string());
    w.str(c.resources.pos_lexicon.string());
    w.str(c.resources.pos_tags.string());
  }
  w.u8(c.numeric.idf);
  w.u32(static_cast<std::uint32_t>(c.lm.order));
  w.u64(c.lm.rare_threshold);
  w.u64(c.lm.cross_fit_folds);
  w.u64(c.clusters.k);
  w.u64(c.clusters.max_iters);
  w.u8(c.clusters.corpus_vocabulary);
  w.u64(c.topics.counts.size());
  for (auto t : c.topics.counts) w.u64(t);
  w.u64(c.topics.burn_in);
  w.u64(c.topics.sample_every);
  w.u64(c.topics.n_samples);
  w.u64(c.topics.infer_iters);
  w.u64(c.topics.min_doc_freq);
  w.u64(c.bow.min_df);
  w.u8(c.bow.bigrams_only);
  w.u8(static_cast<std::uint8_t>(c.model.kind));
  if (include_paths) {
    w.u32(static_cast<std::uint32_t>(c.model.max_depth));
    w.f64(c.model.learning_rate);
    w.u64(c.model.n_rounds);
    w.u64(c.model.min_samples_leaf);
    w.f64(c.model.lambda);
    w.u8(c.model.class_weights);
    w.u8(c.model.goss);
    w.f64(c.model.goss_a);
    w.f64(c.model.goss_b);
    w.f64(c.model.l2);
  }
}

PipelineConfig read_config(BinaryReader& r) {
  PipelineConfig c;
  c.families.clear();
  const auto nf = r.count(1);
  for (std::uint64_t i = 0; i < nf; ++i) {
    const auto f = r.u8();
    if (f >= kFamilyOrder.size()) throw ModelFormatError("unknown feature family id");
    c.families.push_back(static_cast<Family>(f));
  }
  c.seed = r.u64();
  c.resources.dictionary = r.str();
  c.resources.easy_words = r.str();
  c.resources.embeddings = r.str();
  c.resources.pos_lexicon = r.str();
  c.resources.pos_tags = r.str();
  c.numeric.idf = r.u8() != 0;
  c.lm.order = static_cast<int>(r.u32());
  c.lm.rare_threshold = r.u64();
  c.lm.cross_fit_folds = r.u64();
  c.clusters.k = r.u64();
  c.clusters.max_iters = r.u64();
  c.clusters.corpus_vocabulary = r.u8() != 0;
  c.topics.counts.resize(r.count(8));
  for (auto& t : c.topics.counts) t = r.u64();
  c.topics.burn_in = r.u64();
  c.topics.sample_every = r.u64();
  c.topics.n_samples = r.u64();
  c.topics.infer_iters = r.u64();
  c.topics.min_doc_freq = r.u64();
  c.bow.min_df = r.u64();
  c.bow.bigrams_only = r.u8() != 0;
  const auto kind = r.u8();
  if (kind > 1) throw ModelFormatError("unknown classifier kind");
  c.model.kind = static_cast<ClassifierKind>(kind);
  c.model.max_depth = static_cast<int>(r.u32());
  c.model.learning_rate = r.f64();
  c.model.n_rounds = r.u64();
  c.model.min_samples_leaf = r.u64();
  c.model.lambda = r.f64();
  c.model.class_weights = r.u8() != 0;
  c.model.goss = r.u8() != 0;
  c.model.goss_a = r.f64();
  c.model.goss_b = r.f64();
  c.model.l2 = r.f64();
  return c;
}

// ---------------------------------------------------------------- yaml

[[noreturn]] void bad_config(const std::string& what) { throw DataError("config: " + what); }

template <class T>
T scalar(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    bad_config("bad value for '" + key + "'");
  }
}

void check_keys(const YAML::Node& n, const std::string& section,
                std::initializer_list<std::string_view> allowed) {
  if (!n.IsMap()) bad_config("'" + section + "' must be a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      bad_config("unknown key '" + (section.empty() ? key : section + "." + key) + "'");
  }
}

template <class T>
void read(const YAML::Node& sec, const char* key, T& out, const std::string& section) {
  if (const auto n = sec[key]) out = scalar<T>(n, section + "." + key);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

// ---------------------------------------------------------------- resources

void require_file(Family family, std::string_view what, const std::filesystem::path& path) {
  if (path.empty())
    throw ResourceError(std::string(to_string(family)) + ": no " + std::string(what) +
                        " path configured");
  if (!std::filesystem::is_regular_file(path))
    throw ResourceError(std::string(to_string(family)) + ": " + std::string(what) +
                        " not found: " + path.string());
}

template <class F>
auto with_family(Family family, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ResourceError& e) {
    throw ResourceError(std::string(to_string(family)) + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string(to_string(family)) + ": " + e.what());
  }
}

std::vector<std::string> sorted(const WordSet& s) {
  std::vector<std::string> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  return v;
}

std::uint64_t topic_infer_seed(std::uint64_t seed, std::size_t topics, const Essay& essay) {
  return derive_seed(derive_seed(seed, "lda/infer/" + std::to_string(topics)), essay.text);
}

}  // namespace

// ---------------------------------------------------------------- PipelineConfig

bool PipelineConfig::has(Family f) const {
  return std::find(families.begin(), families.end(), f) != families.end();
}

void PipelineConfig::validate() const {
  if (families.empty()) throw InvalidArgument("config: at least one feature family is required");
  for (std::size_t i = 0; i < families.size(); ++i)
    for (std::size_t j = i + 1; j < families.size(); ++j)
      if (families[i] == families[j])
        throw InvalidArgument("config: family '" + std::string(to_string(families[i])) + "' listed twice");
  if (lm.order < 1 || lm.order > LanguageModel::kMaxOrder)
    throw InvalidArgument("config: lm.order must be in 1..3");
  if (lm.rare_threshold < 1) throw InvalidArgument("config: lm.rare_threshold must be >= 1");
  if (clusters.k < 1) throw InvalidArgument("config: clusters.k must be >= 1");
  if (has(Family::Topics)) {
    if (topics.counts.empty()) throw InvalidArgument("config: topics.counts is empty");
    for (auto t : topics.counts)
      if (t < 1) throw InvalidArgument("config: topic counts must be >= 1");
    if (topics.sample_every < 1 || topics.n_samples < 1 || topics.infer_iters < 1)
      throw InvalidArgument("config: topics sampling settings must be >= 1");
  }
  if (bow.min_df < 1) throw InvalidArgument("config: bow.min_df must be >= 1");
  if (model.l2 < 0.0) throw InvalidArgument("config: model.l2 must be >= 0");
  GBTConfig g;
  g.max_depth = model.max_depth;
  g.learning_rate = model.learning_rate;
  g.min_samples_leaf = model.min_samples_leaf;
  g.lambda = model.lambda;
  if (model.goss) g.goss = GossParams{model.goss_a, model.goss_b};
  g.validate();
}

std::uint64_t PipelineConfig::fingerprint() const {
  BinaryWriter w;
  write_config(w, *this, false);
  return splitmix64(fnv1a(w.bytes(), fnv1a("cefr-config")));
}

std::vector<Family> parse_family_list(std::string_view list) {
  std::vector<Family> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    auto end = list.find(',', pos);
    if (end == std::string_view::npos) end = list.size();
    auto name = list.substr(pos, end - pos);
    while (!name.empty() && name.front() == ' ') name.remove_prefix(1);
    while (!name.empty() && name.back() == ' ') name.remove_suffix(1);
    if (!name.empty()) {
      const auto f = parse_family(name);
      if (!f)
        throw DataError("unknown feature family '" + std::string(name) +
                        "' (expected numeric, lm, clusters, lda, pos, bow)");
      if (std::find(out.begin(), out.end(), *f) == out.end()) out.push_back(*f);
    }
    pos = end + 1;
  }
  return out;
}

PipelineConfig parse_config(std::string_view yaml, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    bad_config(e.what());
  }
  PipelineConfig c;
  if (!root || root.IsNull()) return c;
  check_keys(root, "", {"families", "seed", "resources", "numeric", "lm", "clusters", "topics", "bow",
                        "model"});
  if (const auto f = root["families"]) {
    if (f.IsSequence()) {
      std::string list;
      for (const auto& item : f) list += scalar<std::string>(item, "families") + ",";
      c.families = parse_family_list(list);
    } else {
      c.families = parse_family_list(scalar<std::string>(f, "families"));
    }
  }
  read(root, "seed", c.seed, "");
  if (const auto r = root["resources"]) {
    check_keys(r, "resources", {"dictionary", "easy_words", "embeddings", "pos_lexicon", "pos_tags"});
    auto path = [&](const char* key, std::filesystem::path& out) {
      if (const auto n = r[key]) out = resolve(base_dir, scalar<std::string>(n, std::string("resources.") + key));
    };
    path("dictionary", c.resources.dictionary);
    path("easy_words", c.resources.easy_words);
    path("embeddings", c.resources.embeddings);
    path("pos_lexicon", c.resources.pos_lexicon);
    path("pos_tags", c.resources.pos_tags);
  }
  if (const auto s = root["numeric"]) {
    check_keys(s, "numeric", {"idf"});
    read(s, "idf", c.numeric.idf, "numeric");
  }
  if (const auto s = root["lm"]) {
    check_keys(s, "lm", {"order", "rare_threshold", "cross_fit_folds"});
    read(s, "order", c.lm.order, "lm");
    read(s, "rare_threshold", c.lm.rare_threshold, "lm");
    read(s, "cross_fit_folds", c.lm.cross_fit_folds, "lm");
  }
  if (const auto s = root["clusters"]) {
    check_keys(s, "clusters", {"k", "max_iters", "corpus_vocabulary"});
    read(s, "k", c.clusters.k, "clusters");
    read(s, "max_iters", c.clusters.max_iters, "clusters");
    read(s, "corpus_vocabulary", c.clusters.corpus_vocabulary, "clusters");
  }
  if (const auto s = root["topics"]) {
    check_keys(s, "topics", {"counts", "burn_in", "sample_every", "n_samples", "infer_iters", "min_doc_freq"});
    if (const auto n = s["counts"]) {
      if (!n.IsSequence()) bad_config("topics.counts must be a list");
      c.topics.counts.clear();
      for (const auto& item : n) c.topics.counts.push_back(scalar<std::size_t>(item, "topics.counts"));
    }
    read(s, "burn_in", c.topics.burn_in, "topics");
    read(s, "sample_every", c.topics.sample_every, "topics");
    read(s, "n_samples", c.topics.n_samples, "topics");
    read(s, "infer_iters", c.topics.infer_iters, "topics");
    read(s, "min_doc_freq", c.topics.min_doc_freq, "topics");
  }
  if (const auto s = root["bow"]) {
    check_keys(s, "bow", {"min_df", "bigrams_only"});
    read(s, "min_df", c.bow.min_df, "bow");
    read(s, "bigrams_only", c.bow.bigrams_only, "bow");
  }
  if (const auto s = root["model"]) {
    check_keys(s, "model", {"kind", "max_depth", "learning_rate", "n_rounds", "min_samples_leaf", "lambda",
                            "class_weights", "goss", "goss_a", "goss_b", "l2"});
    if (const auto n = s["kind"]) {
      const auto kind = scalar<std::string>(n, "model.kind");
      if (kind == "gbt") c.model.kind = ClassifierKind::Gbt;
      else if (kind == "logreg") c.model.kind = ClassifierKind::LogReg;
      else bad_config("model.kind must be gbt or logreg");
    }
    if (const auto n = s["class_weights"]) {
      const auto v = scalar<std::string>(n, "model.class_weights");
      if (v == "inverse" || v == "true") c.model.class_weights = true;
      else if (v == "uniform" || v == "false") c.model.class_weights = false;
      else bad_config("model.class_weights must be inverse or uniform");
    }
    read(s, "max_depth", c.model.max_depth, "model");
    read(s, "learning_rate", c.model.learning_rate, "model");
    read(s, "n_rounds", c.model.n_rounds, "model");
    read(s, "min_samples_leaf", c.model.min_samples_leaf, "model");
    read(s, "lambda", c.model.lambda, "model");
    read(s, "goss", c.model.goss, "model");
    read(s, "goss_a", c.model.goss_a, "model");
    read(s, "goss_b", c.model.goss_b, "model");
    read(s, "l2", c.model.l2, "model");
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

// ---------------------------------------------------------------- fitting

struct PipelineFitter {
  static FitResult fit(const Dataset& train, const PipelineConfig& config, const Tagger* tagger_override);
};

FitResult PipelineFitter::fit(const Dataset& train, const PipelineConfig& config,
                              const Tagger* tagger_override) {
  config.validate();
  if (train.empty()) throw DataError("cannot fit a pipeline on an empty dataset");
  const auto labels = train.labels();
  const auto& essays = train.essays();
  const auto& res = config.resources;

  FittedPipeline p;
  p.config_ = config;

  // Tagging feeds the LM and POS families.
  std::vector<std::vector<PosTag>> tags;
  if (config.has(Family::LanguageModel) || config.has(Family::Pos)) {
    const Family owner = config.has(Family::Pos) ? Family::Pos : Family::LanguageModel;
    std::optional<ExternalTagger> external;
    if (!res.pos_lexicon.empty()) {
      require_file(owner, "POS lexicon", res.pos_lexicon);
      p.tagger_ = with_family(owner, [&] { return load_lexicon(res.pos_lexicon); });
    }
    if (!tagger_override && !res.pos_tags.empty()) {
      require_file(owner, "POS tag file", res.pos_tags);
      external.emplace(with_family(owner, [&] { return load_external_tags(res.pos_tags); }));
    }
    const Tagger& tagger = tagger_override ? *tagger_override
                           : external      ? static_cast<const Tagger&>(*external)
                                           : static_cast<const Tagger&>(p.tagger_);
    tags.reserve(essays.size());
    for (const auto& e : essays) tags.push_back(tagger.tag(e));
  }

  if (config.has(Family::Numeric)) {
    NumericRegistry::Options opts;
    opts.spelling = !res.dictionary.empty();
    opts.difficulty = !res.easy_words.empty();
    opts.idf = config.numeric.idf;
    if (opts.spelling) {
      require_file(Family::Numeric, "dictionary", res.dictionary);
      p.lexical_.dictionary = with_family(Family::Numeric, [&] { return load_word_list(res.dictionary); });
    }
    if (opts.difficulty) {
      require_file(Family::Numeric, "easy-word list", res.easy_words);
      p.lexical_.easy_words = with_family(Family::Numeric, [&] { return load_word_list(res.easy_words); });
    }
    if (opts.idf) p.lexical_.set_idf(build_idf_table(train));
    p.registry_ = NumericRegistry::standard(opts);
  }

  std::vector<std::array<double, 3>> lm_rows;
  if (config.has(Family::LanguageModel)) {
    LmPreprocessConfig lm_cfg;
    lm_cfg.rare_threshold = config.lm.rare_threshold;
    // Low/high models from the essays in `members`.
    auto fit_pair = [&](const std::vector<std::size_t>& members) {
      std::vector<Essay> low, high;
      std::vector<std::vector<PosTag>> low_tags, high_tags;
      for (auto i : members) {
        if (essays[i].tokens.empty()) continue;
        if (is_low_group(labels[i])) {
          low.push_back(essays[i]);
          low_tags.push_back(tags[i]);
        } else {
          high.push_back(essays[i]);
          high_tags.push_back(tags[i]);
        }
      }
      if (low.empty() || high.empty())
        throw DataError(std::string("lm: training data has no essays at levels ") +
                        (low.empty() ? "A1-B1" : "B2-C2"));
      return std::pair{
          with_family(Family::LanguageModel,
                      [&] { return train_essay_lm(low, low_tags, lm_cfg, config.lm.order); }),
          with_family(Family::LanguageModel,
                      [&] { return train_essay_lm(high, high_tags, lm_cfg, config.lm.order); })};
    };
    std::vector<std::size_t> everyone(essays.size());
    std::iota(everyone.begin(), everyone.end(), std::size_t{0});
    auto [low, high] = fit_pair(everyone);
    p.lm_low_ = std::move(low);
    p.lm_high_ = std::move(high);
    for (const auto* m : {&*p.lm_low_, &*p.lm_high_})
      for (const auto& w : m->lm.warnings()) p.warnings_.push_back("lm: " + w);

    if (config.lm.cross_fit_folds >= 2) {
      lm_rows.assign(essays.size(), {0.0, 0.0, 0.0});
      try {
        const FoldPlan inner = stratified_kfold(labels, config.lm.cross_fit_folds,
                                                derive_seed(config.seed, "lm/cross-fit"));
        for (std::size_t f = 0; f < inner.k; ++f) {
          const auto [fl, fh] = fit_pair(inner.train_indices(f));
          for (auto i : inner.test_indices(f))
            if (!essays[i].tokens.empty()) lm_rows[i] = lm_features(essays[i], tags[i], fl, fh);
        }
      } catch (const std::exception& e) {
        p.warnings_.push_back(std::string("lm: cross-fitting skipped, training rows scored in-sample: ") +
                              e.what());
        lm_rows.clear();
      }
    }
  }

  if (config.has(Family::Clusters)) {
    require_file(Family::Clusters, "embeddings", res.embeddings);
    const EmbeddingTable table = with_family(Family::Clusters, [&] { return load_embeddings(res.embeddings); });
    std::vector<std::string> words;
    if (config.clusters.corpus_vocabulary) {
      for (const auto& [w, entry] : train.vocabulary())
        if (table.find(w) >= 0) words.push_back(w);
      if (words.empty()) throw DataError("clusters: no training word has an embedding");
    }
    p.clusters_ = with_family(Family::Clusters, [&] {
      return fit_cluster_model(table, words, config.clusters.k, derive_seed(config.seed, "clusters"),
                               config.clusters.max_iters);
    });
  }

  std::vector<double> train_topics;
  std::size_t topic_width = 0;
  if (config.has(Family::Topics)) {
    const LdaCorpus corpus = build_lda_corpus(essays, config.topics.min_doc_freq);
    for (auto t : config.topics.counts) {
      LdaConfig lc;
      lc.topics = t;
      lc.burn_in = config.topics.burn_in;
      lc.sample_every = config.topics.sample_every;
      lc.n_samples = config.topics.n_samples;
      lc.infer_iters = config.topics.infer_iters;
      lc.seed = derive_seed(config.seed, "lda/" + std::to_string(t));
      p.lda_.push_back(with_family(Family::Topics, [&] { return fit_lda(corpus, lc); }));
      for (const auto& w : p.lda_.back().warnings())
        p.warnings_.push_back("lda(" + std::to_string(t) + "): " + w);
      topic_width += t;
    }
  }

  if (config.has(Family::Bow)) {
    std::vector<Tokens> docs;
    docs.reserve(essays.size());
    for (const auto& e : essays) docs.push_back(e.tokens);
    p.bow_ = with_family(Family::Bow, [&] {
      return Vectorizer::fit(docs, {config.bow.min_df, config.bow.bigrams_only});
    });
  }

  for (auto f : kColumnOrder) {
    if (!config.has(f)) continue;
    switch (f) {
      case Family::Numeric:
        p.layout_.append(f, p.registry_.size(), join(p.registry_.names(), '\n'));
        break;
      case Family::LanguageModel:
        p.layout_.append(f, 3, "low\nhigh\ndiff\norder=" + std::to_string(config.lm.order));
        break;
      case Family::Topics: {
        std::string d;
        for (auto t : config.topics.counts) d += std::to_string(t) + "\n";
        p.layout_.append(f, topic_width, d);
        break;
      }
      case Family::Clusters:
        p.layout_.append(f, p.clusters_->k, "k=" + std::to_string(p.clusters_->k));
        break;
      case Family::Pos:
        p.layout_.append(f, kNumTags, join(tagset_names(), '\n'));
        break;
      case Family::Bow:
        p.layout_.append(f, p.bow_->size(), join(p.bow_->terms(), '\n'));
        break;
    }
  }

  // Training rows reuse the sampler's averaged topic distributions.
  std::vector<std::vector<double>> topic_rows;
  if (config.has(Family::Topics))
    for (std::size_t d = 0; d < essays.size(); ++d) topic_rows.push_back(topic_features(d, p.lda_));

  FitResult out{std::move(p), FeatureMatrix{}};
  FittedPipeline::RowOverrides overrides;
  if (!topic_rows.empty()) overrides.topics = &topic_rows;
  if (!lm_rows.empty()) overrides.lm = &lm_rows;
  out.train_features = out.pipeline.transform_with(essays, tags, overrides);
  return out;
}

FitResult fit_pipeline(const Dataset& train, const PipelineConfig& config, const Tagger* tagger) {
  return PipelineFitter::fit(train, config, tagger);
}

// ---------------------------------------------------------------- transform

std::vector<double> FittedPipeline::topic_block(const Essay& essay) const {
  std::vector<double> out;
  for (const auto& m : lda_) {
    const auto bag = lda_bag(essay, m.vocabulary());
    if (bag.empty()) {
      out.insert(out.end(), m.topics(), 0.0);
    } else {
      const auto theta = m.infer_theta(bag, config_.topics.infer_iters,
                                       topic_infer_seed(config_.seed, m.topics(), essay));
      out.insert(out.end(), theta.begin(), theta.end());
    }
  }
  return out;
}

FeatureMatrix FittedPipeline::transform_with(std::span<const Essay> essays,
                                             const std::vector<std::vector<PosTag>>& tags,
                                             RowOverrides overrides) const {
  FeatureMatrix x(layout_);
  std::vector<std::pair<std::uint32_t, double>> row;
  for (std::size_t i = 0; i < essays.size(); ++i) {
    const Essay& e = essays[i];
    row.clear();
    for (const auto& slice : layout_.slices()) {
      const auto base = static_cast<std::uint32_t>(slice.offset);
      auto dense = [&](std::span<const double> v) {
        for (std::size_t j = 0; j < v.size(); ++j) row.emplace_back(base + j, v[j]);
      };
      switch (slice.family) {
        case Family::Numeric:
          dense(extract_numeric(e, lexical_, registry_));
          break;
        case Family::LanguageModel:
          if (overrides.lm)
            dense((*overrides.lm)[i]);
          else if (!e.tokens.empty())
            dense(lm_features(e, tags[i], *lm_low_, *lm_high_));
          break;
        case Family::Topics:
          dense(overrides.topics ? (*overrides.topics)[i] : topic_block(e));
          break;
        case Family::Clusters:
          dense(cluster_encode(e, *clusters_));
          break;
        case Family::Pos:
          dense(pos_bow(tags[i]));
          break;
        case Family::Bow:
          for (const auto& [c, v] : bow_->transform(e.tokens)) row.emplace_back(base + c, v);
          break;
      }
    }
    x.add_row(row);
  }
  return x;
}

FeatureMatrix FittedPipeline::transform(std::span<const Essay> essays, const Tagger* tagger) const {
  std::vector<std::vector<PosTag>> tags;
  if (config_.has(Family::LanguageModel) || config_.has(Family::Pos)) {
    const Tagger& t = tagger ? *tagger : static_cast<const Tagger&>(tagger_);
    tags.reserve(essays.size());
    for (const auto& e : essays) {
      tags.push_back(t.tag(e));
      if (tags.back().size() != e.tokens.size())
        throw DataError("tagger returned " + std::to_string(tags.back().size()) + " tags for " +
                        std::to_string(e.tokens.size()) + " tokens in essay '" + e.id + "'");
    }
  }
  return transform_with(essays, tags, {});
}

// ---------------------------------------------------------------- persistence

void FittedPipeline::serialize(BinaryWriter& w) const {
  write_config(w, config_, true);
  layout_.serialize(w);
  w.strs(registry_.names());
  w.strs(sorted(lexical_.dictionary));
  w.strs(sorted(lexical_.easy_words));
  w.u64(lexical_.idf_table.size());
  for (const auto& [term, v] : lexical_.idf_table) {
    w.str(term);
    w.f64(v);
  }
  w.u64(tagger_.lexicon().size());
  for (const auto& [word, tag] : tagger_.lexicon()) {
    w.str(word);
    w.u8(static_cast<std::uint8_t>(tag));
  }
  w.u8(lm_low_.has_value());
  if (lm_low_) {
    lm_low_->serialize(w);
    lm_high_->serialize(w);
  }
  w.u8(clusters_.has_value());
  if (clusters_) clusters_->serialize(w);
  w.u64(lda_.size());
  for (const auto& m : lda_) m.serialize(w);
  w.u8(bow_.has_value());
  if (bow_) bow_->serialize(w);
}

FittedPipeline FittedPipeline::deserialize(BinaryReader& r) {
  FittedPipeline p;
  p.config_ = read_config(r);
  p.layout_ = FeatureLayout::deserialize(r);
  p.registry_ = registry_from_names(r.strs());
  for (auto& w : r.strs()) p.lexical_.dictionary.insert(std::move(w));
  for (auto& w : r.strs()) p.lexical_.easy_words.insert(std::move(w));
  std::map<std::string, double> idf;
  for (auto n = r.count(9); n > 0; --n) {
    auto term = r.str();
    idf.emplace(std::move(term), r.f64());
  }
  p.lexical_.set_idf(std::move(idf));
  std::map<std::string, PosTag> lexicon;
  for (auto n = r.count(9); n > 0; --n) {
    auto word = r.str();
    const auto tag = r.u8();
    if (tag >= kNumTags) throw ModelFormatError("unknown POS tag id");
    lexicon.emplace(std::move(word), static_cast<PosTag>(tag));
  }
  p.tagger_ = LexiconTagger(std::move(lexicon));
  if (r.u8()) {
    p.lm_low_ = EssayLanguageModel::deserialize(r);
    p.lm_high_ = EssayLanguageModel::deserialize(r);
  }
  if (r.u8()) p.clusters_ = ClusterModel::deserialize(r);
  for (auto n = r.count(8); n > 0; --n) p.lda_.push_back(LdaModel::deserialize(r));
  if (r.u8()) p.bow_ = Vectorizer::deserialize(r);

  // Every slice must be backed by its fitted component with the right width.
  for (const auto& s : p.layout_.slices()) {
    std::size_t expected = 0;
    bool present = true;
    switch (s.family) {
      case Family::Numeric: expected = p.registry_.size(); break;
      case Family::LanguageModel: expected = 3; present = p.lm_low_.has_value(); break;
      case Family::Topics:
        for (const auto& m : p.lda_) expected += m.topics();
        present = !p.lda_.empty();
        break;
      case Family::Clusters: present = p.clusters_.has_value(); expected = present ? p.clusters_->k : 0; break;
      case Family::Pos: expected = kNumTags; break;
      case Family::Bow: present = p.bow_.has_value(); expected = present ? p.bow_->size() : 0; break;
    }
    if (!present || expected != s.width)
      throw ModelFormatError("model section for family '" + std::string(to_string(s.family)) +
                             "' does not match the feature layout");
  }
  return p;
}

// ---------------------------------------------------------------- classifiers

ClassProbs predict_proba(const Classifier& model, const FeatureMatrix& x, std::size_t row) {
  return std::visit(
      [&](const auto& m) -> ClassProbs {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, GBTModel>) {
          return cefr::predict_proba(m, x, row);
        } else {
          return m.predict_proba(x, row);
        }
      },
      model);
}

std::vector<ClassProbs> predict_proba(const Classifier& model, const FeatureMatrix& x) {
  std::vector<ClassProbs> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_proba(model, x, i);
  return out;
}

ClassWeights configured_class_weights(const PipelineConfig& config, std::span<const Level> labels) {
  if (!config.model.class_weights) return ClassWeights{1, 1, 1, 1, 1, 1};
  return default_class_weights(labels);
}

Classifier train_classifier(const FeatureMatrix& x, std::span<const Level> y, const PipelineConfig& config) {
  const ClassWeights weights = configured_class_weights(config, y);
  if (config.model.kind == ClassifierKind::LogReg) {
    LogRegOptions o;
    o.l2 = config.model.l2;
    return train_logreg(x, y, weights, o);
  }
  GBTConfig g;
  g.max_depth = config.model.max_depth;
  g.learning_rate = config.model.learning_rate;
  g.n_rounds = config.model.n_rounds;
  g.class_weights = weights;
  g.min_samples_leaf = config.model.min_samples_leaf;
  g.lambda = config.model.lambda;
  g.seed = derive_seed(config.seed, "gbt");
  if (config.model.goss) g.goss = GossParams{config.model.goss_a, config.model.goss_b};
  return train_gbt(x, y, g);
}

std::vector<ClassProbs> TrainedModel::predict(std::span<const Essay> essays, const Tagger* tagger) const {
  return predict_proba(classifier, pipeline.transform(essays, tagger));
}

TrainedModel train_model(const Dataset& train, const PipelineConfig& config, const Tagger* tagger) {
  auto fit = fit_pipeline(train, config, tagger);
  const auto labels = train.labels();
  Classifier clf = train_classifier(fit.train_features, labels, config);
  return TrainedModel{std::move(fit.pipeline), std::move(clf)};
}

// ---------------------------------------------------------------- model file

std::string model_bytes(const TrainedModel& model) {
  BinaryWriter payload;
  model.pipeline.serialize(payload);
  payload.u8(static_cast<std::uint8_t>(model.classifier.index()));
  std::visit([&](const auto& m) { m.serialize(payload); }, model.classifier);

  BinaryWriter w;
  for (char c : kModelMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kModelVersion);
  w.u64(payload.bytes().size());
  w.u64(model.pipeline.fingerprint());
  w.u64(model.pipeline.config().fingerprint());
  std::string out = w.take();
  out += payload.bytes();
  BinaryWriter tail;
  tail.u64(fnv1a(payload.bytes()));
  out += tail.bytes();
  return out;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_bytes(model));
}

TrainedModel model_from_bytes(std::string_view bytes, const PipelineConfig* expected) {
  BinaryReader header(bytes);
  std::string magic;
  for (std::size_t i = 0; i < kModelMagic.size(); ++i) magic += static_cast<char>(header.u8());
  if (magic != kModelMagic) throw ModelFormatError("not a model file (bad magic)");
  if (const auto v = header.u32(); v != kModelVersion)
    throw ModelVersionError("model format version " + std::to_string(v) + ", expected " +
                            std::to_string(kModelVersion));
  const auto length = header.u64();
  const auto layout_fp = header.u64();
  const auto config_fp = header.u64();
  if (header.remaining() < length || header.remaining() - length < 8)
    throw ModelTruncatedError("model file truncated: payload needs " + std::to_string(length + 8) +
                              " bytes, " + std::to_string(header.remaining()) + " present");
  if (header.remaining() - length > 8) throw ModelFormatError("trailing bytes after model payload");
  const std::size_t start = bytes.size() - header.remaining();
  const auto payload = bytes.substr(start, length);
  BinaryReader tail(bytes.substr(start + length));
  if (tail.u64() != fnv1a(payload)) throw ModelFormatError("model checksum mismatch");
  if (expected && expected->fingerprint() != config_fp)
    throw FingerprintMismatch("model was trained with a different feature configuration");

  BinaryReader r(payload);
  FittedPipeline pipeline = FittedPipeline::deserialize(r);
  if (pipeline.fingerprint() != layout_fp)
    throw FingerprintMismatch("model header fingerprint disagrees with its feature layout");
  const auto kind = r.u8();
  Classifier clf = kind == 0 ? Classifier(GBTModel::deserialize(r))
                 : kind == 1 ? Classifier(LogRegModel::deserialize(r))
                             : throw ModelFormatError("unknown classifier kind");
  if (!r.at_end()) throw ModelFormatError("unexpected bytes after classifier");
  const auto clf_fp = std::visit([](const auto& m) { return m.fingerprint(); }, clf);
  if (clf_fp != layout_fp)
    throw FingerprintMismatch("classifier fingerprint disagrees with the feature pipeline");
  return TrainedModel{std::move(pipeline), std::move(clf)};
}

TrainedModel load_model(const std::filesystem::path& path, const PipelineConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot open model " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_bytes(ss.str(), expected);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ResourceError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw ResourceError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ResourceError("cannot replace " + path.string() + ": " + ec.message());
  }
}

void save_feature_cache(const std::filesystem::path& path, const FeatureMatrix& x,
                        std::uint64_t dataset_hash) {
  BinaryWriter w;
  for (char c : kCacheMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kCacheVersion);
  w.u64(dataset_hash);
  w.u64(x.fingerprint());
  x.serialize(w);
  write_file_atomic(path, w.bytes());
}

std::optional<FeatureMatrix> load_feature_cache(const std::filesystem::path& path,
                                                std::uint64_t dataset_hash,
                                                std::optional<std::uint64_t> fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  try {
    BinaryReader r(bytes);
    std::string magic;
    for (std::size_t i = 0; i < kCacheMagic.size(); ++i) magic += static_cast<char>(r.u8());
    if (magic != kCacheMagic || r.u32() != kCacheVersion || r.u64() != dataset_hash) return std::nullopt;
    const auto fp = r.u64();
    if (fingerprint && fp != *fingerprint) return std::nullopt;
    FeatureMatrix x = FeatureMatrix::deserialize(r);
    if (x.fingerprint() != fp || !r.at_end()) return std::nullopt;
    return x;
  } catch (const ModelFormatError&) {
    return std::nullopt;
  }
}

}  // namespace cefr
