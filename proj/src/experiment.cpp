#include "cefr/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <future>
#include <sstream>

#include "cefr/errors.hpp"
#include "cefr/rng.hpp"

namespace cefr {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct FoldFeatures {
  std::vector<std::size_t> train_idx, test_idx;
  std::vector<Level> train_labels, test_labels;
  FeatureMatrix train, test;
  std::vector<std::string> warnings;
};

template <class F>
auto with_fold(std::size_t fold, F&& fn) -> decltype(fn()) {
  const std::string where = "fold " + std::to_string(fold + 1) + ": ";
  try {
    return fn();
  } catch (const FingerprintMismatch& e) {
    throw FingerprintMismatch(where + e.what());
  } catch (const DataError& e) {
    throw DataError(where + e.what());
  } catch (const ResourceError& e) {
    throw ResourceError(where + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(where + e.what());
  }
}

FoldFeatures fold_features(const Dataset& data, const std::vector<Level>& labels,
                           const PipelineConfig& config, const FoldPlan& plan, std::size_t fold,
                           const ExperimentOptions& options) {
  FoldFeatures f;
  f.train_idx = plan.train_indices(fold);
  f.test_idx = plan.test_indices(fold);
  for (auto i : f.train_idx) f.train_labels.push_back(labels[i]);
  for (auto i : f.test_idx) f.test_labels.push_back(labels[i]);
  const Dataset train = data.subset(f.train_idx);
  const Dataset test = data.subset(f.test_idx);

  std::filesystem::path train_cache, test_cache;
  std::uint64_t train_key = 0, test_key = 0;
  if (!options.cache_dir.empty()) {
    train_key = splitmix64(dataset_hash(train) ^ config.fingerprint() ^ splitmix64(config.seed));
    test_key = splitmix64(train_key ^ dataset_hash(test));
    const std::string stem = "fold-" + std::to_string(fold + 1) + "-" + hex(train_key);
    train_cache = options.cache_dir / (stem + "-train.bin");
    test_cache = options.cache_dir / (stem + "-test.bin");
    auto cached_train = load_feature_cache(train_cache, train_key);
    if (cached_train) {
      auto cached_test = load_feature_cache(test_cache, test_key, cached_train->fingerprint());
      if (cached_test) {
        f.train = std::move(*cached_train);
        f.test = std::move(*cached_test);
        if (options.log) options.log("fold " + std::to_string(fold + 1) + ": features from cache");
        return f;
      }
    }
  }

  auto fit = fit_pipeline(train, config);
  f.warnings = fit.pipeline.warnings();
  f.train = std::move(fit.train_features);
  f.test = fit.pipeline.transform(test.essays());
  if (!options.cache_dir.empty()) {
    std::filesystem::create_directories(options.cache_dir);
    save_feature_cache(train_cache, f.train, train_key);
    save_feature_cache(test_cache, f.test, test_key);
  }
  return f;
}

std::vector<FoldFeatures> all_fold_features(const Dataset& data, const std::vector<Level>& labels,
                                            const PipelineConfig& config, const FoldPlan& plan,
                                            const ExperimentOptions& options) {
  std::vector<FoldFeatures> out(plan.k);
  auto job = [&](std::size_t fold) {
    return with_fold(fold, [&] {
      if (options.log) options.log("fold " + std::to_string(fold + 1) + ": fitting features");
      return fold_features(data, labels, config, plan, fold, options);
    });
  };
  if (options.parallel_folds && plan.k > 1) {
    std::vector<std::future<FoldFeatures>> futures;
    for (std::size_t fold = 0; fold < plan.k; ++fold)
      futures.push_back(std::async(std::launch::async, job, fold));
    for (std::size_t fold = 0; fold < plan.k; ++fold) out[fold] = futures[fold].get();
  } else {
    for (std::size_t fold = 0; fold < plan.k; ++fold) out[fold] = job(fold);
  }
  return out;
}

struct FoldOutcome {
  std::vector<Level> predicted;
  std::vector<ClassProbs> probs;
};

CvResult evaluate(const Dataset& data, const std::vector<Level>& labels,
                  const std::vector<FoldFeatures>& folds, const std::vector<Family>& families,
                  const PipelineConfig& config, const ExperimentOptions& options) {
  std::vector<FoldOutcome> outcomes(folds.size());
  auto job = [&](std::size_t fold) {
    return with_fold(fold, [&] {
      const auto& f = folds[fold];
      const FeatureMatrix train = f.train.select_families(families);
      const FeatureMatrix test = f.test.select_families(families);
      const Classifier clf = train_classifier(train, f.train_labels, config);
      FoldOutcome o;
      o.probs = predict_proba(clf, test);
      for (const auto& p : o.probs) o.predicted.push_back(argmax_level(p));
      return o;
    });
  };
  if (options.parallel_folds && folds.size() > 1) {
    std::vector<std::future<FoldOutcome>> futures;
    for (std::size_t fold = 0; fold < folds.size(); ++fold)
      futures.push_back(std::async(std::launch::async, job, fold));
    for (std::size_t fold = 0; fold < folds.size(); ++fold) outcomes[fold] = futures[fold].get();
  } else {
    for (std::size_t fold = 0; fold < folds.size(); ++fold) outcomes[fold] = job(fold);
  }

  CvResult r;
  r.families = families;
  r.predictions.resize(data.size());
  for (std::size_t fold = 0; fold < folds.size(); ++fold) {
    const auto& f = folds[fold];
    FoldRecord rec;
    rec.fold = fold + 1;
    rec.n_train = f.train_idx.size();
    rec.n_test = f.test_idx.size();
    for (std::size_t j = 0; j < f.test_idx.size(); ++j) {
      const auto i = f.test_idx[j];
      rec.confusion.add(labels[i], outcomes[fold].predicted[j]);
      r.predictions[i] = {data[i].id, labels[i], outcomes[fold].predicted[j], outcomes[fold].probs[j], fold + 1};
    }
    rec.error = cost_error(rec.confusion, options.cost);
    rec.accuracy = accuracy(rec.confusion);
    r.pooled += rec.confusion;
    r.mean_error += rec.error / static_cast<double>(folds.size());
    r.mean_accuracy += rec.accuracy / static_cast<double>(folds.size());
    for (const auto& w : f.warnings) r.warnings.push_back("fold " + std::to_string(fold + 1) + ": " + w);
    r.folds.push_back(rec);
  }
  r.pooled_error = cost_error(r.pooled, options.cost);
  r.pooled_accuracy = accuracy(r.pooled);
  return r;
}

std::vector<Family> ordered(const std::vector<Family>& families) {
  std::vector<Family> out;
  for (auto f : kFamilyOrder)
    if (std::find(families.begin(), families.end(), f) != families.end()) out.push_back(f);
  return out;
}

}  // namespace

std::string family_list(const std::vector<Family>& families) {
  std::string out;
  for (auto f : families) {
    if (!out.empty()) out += '+';
    out += to_string(f);
  }
  return out.empty() ? "none" : out;
}

CvResult run_cv(const Dataset& data, const PipelineConfig& config, const ExperimentOptions& options) {
  const auto labels = data.labels();
  const FoldPlan plan = stratified_kfold(labels, options.k, options.seed);
  const auto folds = all_fold_features(data, labels, config, plan, options);
  CvResult r = evaluate(data, labels, folds, ordered(config.families), config, options);
  r.warnings.insert(r.warnings.begin(), plan.warnings.begin(), plan.warnings.end());
  return r;
}

std::vector<AblationRow> run_family_sets(const Dataset& data, const PipelineConfig& config,
                                         const std::vector<std::pair<std::string, std::vector<Family>>>& sets,
                                         const ExperimentOptions& options) {
  if (sets.empty()) throw InvalidArgument("no family sets to evaluate");
  std::vector<Family> all;
  for (const auto& [name, set] : sets) {
    if (set.empty()) throw InvalidArgument("family set '" + name + "' is empty");
    all.insert(all.end(), set.begin(), set.end());
  }
  PipelineConfig full = config;
  full.families = ordered(all);
  const auto labels = data.labels();
  const FoldPlan plan = stratified_kfold(labels, options.k, options.seed);
  const auto folds = all_fold_features(data, labels, full, plan, options);

  std::vector<AblationRow> rows;
  for (const auto& [name, set] : sets) {
    if (options.log) options.log("row " + name);
    const auto fams = ordered(set);
    rows.push_back({name, fams, evaluate(data, labels, folds, fams, full, options)});
  }
  rows.front().result.warnings.insert(rows.front().result.warnings.begin(), plan.warnings.begin(),
                                      plan.warnings.end());
  return rows;
}

std::vector<AblationRow> run_ablation(const Dataset& data, const PipelineConfig& config,
                                      const std::vector<Family>& families, AblationMode mode,
                                      const ExperimentOptions& options) {
  const auto fams = ordered(families);
  if (fams.empty()) throw InvalidArgument("ablation: no feature families selected");
  if (mode == AblationMode::LeaveOneOut && fams.size() < 2)
    throw InvalidArgument("ablation: leave-one-out needs at least two families");

  std::vector<std::pair<std::string, std::vector<Family>>> sets;
  if (mode == AblationMode::Cumulative) {
    std::vector<Family> prefix;
    for (auto f : fams) {
      prefix.push_back(f);
      sets.emplace_back(family_list(prefix), prefix);
    }
  } else {
    sets.emplace_back("all", fams);
    for (auto drop : fams) {
      std::vector<Family> rest;
      for (auto f : fams)
        if (f != drop) rest.push_back(f);
      sets.emplace_back("-" + std::string(to_string(drop)), rest);
    }
  }
  return run_family_sets(data, config, sets, options);
}

std::string format_confusion(const ConfusionMatrix& m) {
  std::ostringstream out;
  out << "true\\pred";
  for (auto l : kAllLevels) out << ',' << to_string(l);
  out << '\n';
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    out << to_string(level_from_index(i));
    for (std::size_t j = 0; j < kNumLevels; ++j) out << ',' << m.n[i][j];
    out << '\n';
  }
  return out.str();
}

void write_cv_report(const std::filesystem::path& dir, const CvResult& r) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ResourceError("cannot create report directory " + dir.string());

  std::ostringstream summary;
  summary << "metric,value\n"
          << "families," << family_list(r.families) << '\n'
          << "essays," << r.pooled.total() << '\n'
          << "folds," << r.folds.size() << '\n'
          << "pooled_error," << fmt("%.6f", r.pooled_error) << '\n'
          << "pooled_accuracy," << fmt("%.6f", r.pooled_accuracy) << '\n'
          << "mean_fold_error," << fmt("%.6f", r.mean_error) << '\n'
          << "mean_fold_accuracy," << fmt("%.6f", r.mean_accuracy) << '\n';
  write_file_atomic(dir / "summary.csv", summary.str());
  write_file_atomic(dir / "confusion.csv", format_confusion(r.pooled));

  std::ostringstream folds;
  folds << "fold,n_train,n_test,error,accuracy\n";
  for (const auto& f : r.folds)
    folds << f.fold << ',' << f.n_train << ',' << f.n_test << ',' << fmt("%.6f", f.error) << ','
          << fmt("%.6f", f.accuracy) << '\n';
  write_file_atomic(dir / "folds.csv", folds.str());

  std::ostringstream preds;
  preds << "id,fold,true,predicted";
  for (auto l : kAllLevels) preds << ",p_" << to_string(l);
  preds << '\n';
  for (const auto& p : r.predictions) {
    preds << p.id << ',' << p.fold << ',' << to_string(p.truth) << ',' << to_string(p.predicted);
    for (double v : p.probs) preds << ',' << fmt("%.9f", v);
    preds << '\n';
  }
  write_file_atomic(dir / "predictions.csv", preds.str());
}

void write_ablation_report(const std::filesystem::path& dir, const std::vector<AblationRow>& rows,
                           AblationMode mode) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ResourceError("cannot create report directory " + dir.string());
  std::ostringstream table, plot;
  table << "row,families,error,accuracy,mean_fold_error,mean_fold_accuracy\n";
  plot << (mode == AblationMode::Cumulative ? "# family_count" : "# removed_family")
       << " error accuracy\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const auto& r = row.result;
    table << row.name << ',' << family_list(row.families) << ',' << fmt("%.6f", r.pooled_error) << ','
          << fmt("%.6f", r.pooled_accuracy) << ',' << fmt("%.6f", r.mean_error) << ','
          << fmt("%.6f", r.mean_accuracy) << '\n';
    if (mode == AblationMode::Cumulative)
      plot << row.families.size();
    else
      plot << (i == 0 ? std::string("none") : row.name.substr(1));
    plot << ' ' << fmt("%.6f", r.pooled_error) << ' ' << fmt("%.6f", r.pooled_accuracy) << '\n';
  }
  write_file_atomic(dir / "ablation.csv", table.str());
  write_file_atomic(dir / "plot.dat", plot.str());
  std::ostringstream conf;
  for (const auto& row : rows) conf << "# " << row.name << '\n' << format_confusion(row.result.pooled) << '\n';
  write_file_atomic(dir / "confusions.txt", conf.str());
}

}  // namespace cefr
