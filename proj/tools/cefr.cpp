// Command-line front end: train, predict, cv, ablate, synth, score, inspect.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cefr/errors.hpp"
#include "cefr/eval.hpp"
#include "cefr/experiment.hpp"
#include "cefr/pipeline.hpp"
#include "cefr/synthetic.hpp"

namespace {

using namespace cefr;

enum Exit { kOk = 0, kUsage = 2, kData = 3, kResource = 4 };

struct Overrides {
  std::string config;
  std::string families;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> rounds;
  std::optional<std::size_t> clusters;
  std::string topics;
  std::optional<double> learning_rate;
  std::optional<int> depth;
  std::string classifier;
  bool goss = false;
  std::string tags;
  std::string dictionary, easy_words, embeddings, lexicon;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "YAML pipeline configuration")->check(CLI::ExistingFile);
    cmd->add_option("--families", families, "comma-separated families (numeric,lm,clusters,lda,pos,bow)");
    cmd->add_option("--seed", seed, "global seed");
    cmd->add_option("--rounds", rounds, "boosting rounds");
    cmd->add_option("--clusters", clusters, "k-means cluster count");
    cmd->add_option("--topics", topics, "comma-separated topic counts");
    cmd->add_option("--learning-rate", learning_rate, "boosting learning rate");
    cmd->add_option("--depth", depth, "tree depth");
    cmd->add_option("--classifier", classifier, "gbt or logreg")->check(CLI::IsMember({"gbt", "logreg"}));
    cmd->add_flag("--goss", goss, "enable gradient-based one-side sampling");
    cmd->add_option("--tags", tags, "pre-computed POS tags (id TAG TAG ... per line)");
    cmd->add_option("--dictionary", dictionary, "spelling dictionary");
    cmd->add_option("--easy-words", easy_words, "easy-word list");
    cmd->add_option("--embeddings", embeddings, "word embeddings");
    cmd->add_option("--lexicon", lexicon, "POS lexicon");
  }

  PipelineConfig build() const {
    PipelineConfig c = config.empty() ? PipelineConfig{} : load_config(config);
    if (!families.empty()) {
      try {
        c.families = parse_family_list(families);
      } catch (const DataError& e) {
        throw InvalidArgument(std::string("--families: ") + e.what());
      }
    }
    if (seed) c.seed = *seed;
    if (rounds) c.model.n_rounds = *rounds;
    if (clusters) c.clusters.k = *clusters;
    if (!topics.empty()) {
      c.topics.counts.clear();
      std::stringstream ss(topics);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          c.topics.counts.push_back(std::stoul(item));
        } catch (const std::exception&) {
          throw InvalidArgument("--topics: bad count '" + item + "'");
        }
      }
    }
    if (learning_rate) c.model.learning_rate = *learning_rate;
    if (depth) c.model.max_depth = *depth;
    if (classifier == "logreg") c.model.kind = ClassifierKind::LogReg;
    if (classifier == "gbt") c.model.kind = ClassifierKind::Gbt;
    if (goss) c.model.goss = true;
    if (!tags.empty()) c.resources.pos_tags = tags;
    if (!dictionary.empty()) c.resources.dictionary = dictionary;
    if (!easy_words.empty()) c.resources.easy_words = easy_words;
    if (!embeddings.empty()) c.resources.embeddings = embeddings;
    if (!lexicon.empty()) c.resources.pos_lexicon = lexicon;
    c.validate();
    return c;
  }
};

void log_line(const std::string& msg) { std::cerr << "cefr: " << msg << '\n'; }

void print_metrics(const ConfusionMatrix& m, const CostMatrix& cost) {
  std::printf("E,%.6f\naccuracy,%.6f\nn,%llu\n", cost_error(m, cost), accuracy(m),
              static_cast<unsigned long long>(m.total()));
  std::cout << format_confusion(m);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::map<std::string, Level> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot open predictions " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty predictions file");
  const auto header = split_csv_line(line);
  std::ptrdiff_t id_col = -1, level_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "id") id_col = static_cast<std::ptrdiff_t>(i);
    if (header[i] == "level" || (header[i] == "predicted" && level_col < 0))
      level_col = static_cast<std::ptrdiff_t>(i);
  }
  if (id_col < 0 || level_col < 0) throw DataError(path + ": needs 'id' and 'level' columns");
  std::map<std::string, Level> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() <= static_cast<std::size_t>(std::max(id_col, level_col)))
      throw DataError(path + ":" + std::to_string(row) + ": too few columns");
    const auto level = parse_level(f[static_cast<std::size_t>(level_col)]);
    if (!level)
      throw DataError(path + ":" + std::to_string(row) + ": unknown level '" +
                      f[static_cast<std::size_t>(level_col)] + "'");
    if (!out.emplace(f[static_cast<std::size_t>(id_col)], *level).second)
      throw DataError(path + ":" + std::to_string(row) + ": duplicate id");
  }
  return out;
}

std::vector<double> parse_distribution(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw InvalidArgument("--dist: bad value '" + item + "'");
    }
  }
  if (out.size() != kNumLevels) throw InvalidArgument("--dist needs six comma-separated values");
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"CEFR level prediction from essays"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "fit features and classifier, write a model file");
  std::string data, out, model_path, report, cache, mode = "cumulative", pred, gold, cost_path;
  Overrides train_o;
  train->add_option("--data", data, "labeled essays (CSV or JSONL)")->required();
  train->add_option("--out", out, "model file to write")->required();
  train_o.attach(train);

  // predict
  auto* predict = app.add_subcommand("predict", "write per-essay level and class probabilities");
  std::string predict_config, predict_tags;
  predict->add_option("--model", model_path, "model file")->required();
  predict->add_option("--data", data, "essays (CSV or JSONL)")->required();
  predict->add_option("--out", out, "CSV to write (id, level, p_A1..p_C2)")->required();
  predict->add_option("--config", predict_config, "reject the model unless trained with this configuration")
      ->check(CLI::ExistingFile);
  predict->add_option("--tags", predict_tags, "pre-computed POS tags for these essays");

  // cv and ablate
  std::size_t k = 3;
  std::uint64_t cv_seed = 42;
  bool serial = false;
  auto* cv = app.add_subcommand("cv", "stratified k-fold cross-validation");
  Overrides cv_o;
  cv->add_option("--data", data, "labeled essays")->required();
  cv->add_option("--k", k, "folds")->capture_default_str();
  cv->add_option("--fold-seed", cv_seed, "fold assignment seed (defaults to --seed)");
  cv->add_option("--report", report, "report directory")->required();
  cv->add_option("--cache", cache, "feature cache directory");
  cv->add_option("--cost", cost_path, "cost matrix file");
  cv->add_flag("--serial", serial, "evaluate folds one at a time");
  cv_o.attach(cv);

  auto* ablate = app.add_subcommand("ablate", "cumulative or leave-one-out feature-family study");
  Overrides ab_o;
  ablate->add_option("--mode", mode, "cumulative or loo")->check(CLI::IsMember({"cumulative", "loo"}));
  ablate->add_option("--data", data, "labeled essays")->required();
  ablate->add_option("--k", k, "folds")->capture_default_str();
  ablate->add_option("--fold-seed", cv_seed, "fold assignment seed (defaults to --seed)");
  ablate->add_option("--report", report, "report directory")->required();
  ablate->add_option("--cache", cache, "feature cache directory");
  ablate->add_option("--cost", cost_path, "cost matrix file");
  ablate->add_flag("--serial", serial, "evaluate folds one at a time");
  ab_o.attach(ablate);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  std::size_t n = 3000;
  std::uint64_t synth_seed = 1;
  std::string dist, resources;
  synth->add_option("--n", n, "essay count")->capture_default_str();
  synth->add_option("--seed", synth_seed, "seed")->capture_default_str();
  synth->add_option("--out", out, "CSV to write")->required();
  synth->add_option("--dist", dist, "six comma-separated level probabilities");
  synth->add_option("--resources", resources, "also write matching dictionary, lexicon and embeddings here");

  // score
  auto* score = app.add_subcommand("score", "cost-weighted error, accuracy and confusion matrix");
  score->add_option("--pred", pred, "predictions CSV with id and level columns")->required();
  score->add_option("--gold", gold, "labeled essays")->required();
  score->add_option("--cost", cost_path, "cost matrix file (6 lines of 6 numbers)");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "describe a model file");
  std::string dump;
  inspect->add_option("--model", model_path, "model file")->required();
  inspect->add_option("--dump", dump, "lm-low, lm-high, topics or bow")
      ->check(CLI::IsMember({"lm-low", "lm-high", "topics", "bow"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  const CostMatrix cost = cost_path.empty() ? CostMatrix::standard() : load_cost_matrix(cost_path);

  if (*train) {
    const PipelineConfig config = train_o.build();
    const Dataset ds = load_dataset(data);
    log_line("training on " + std::to_string(ds.size()) + " essays, families " +
             family_list(config.families));
    const TrainedModel model = train_model(ds, config);
    for (const auto& w : model.pipeline.warnings()) log_line("warning: " + w);
    save_model(model, out);
    log_line("wrote " + out);
    return kOk;
  }

  if (*predict) {
    std::optional<PipelineConfig> expected;
    if (!predict_config.empty()) expected = load_config(predict_config);
    const TrainedModel model = load_model(model_path, expected ? &*expected : nullptr);
    const Dataset ds = load_dataset(data);
    std::optional<ExternalTagger> tagger;
    if (!predict_tags.empty()) tagger.emplace(load_external_tags(predict_tags));
    const auto probs = model.predict(ds.essays(), tagger ? &*tagger : nullptr);
    std::ostringstream csv;
    csv << "id,level";
    for (auto l : kAllLevels) csv << ",p_" << to_string(l);
    csv << '\n';
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
      csv << ds[i].id << ',' << to_string(argmax_level(probs[i]));
      for (double p : probs[i]) {
        std::snprintf(buf, sizeof buf, ",%.12f", p);
        csv << buf;
      }
      csv << '\n';
    }
    write_file_atomic(out, csv.str());
    log_line("wrote " + std::to_string(ds.size()) + " predictions to " + out);
    return kOk;
  }

  if (*cv || *ablate) {
    const bool is_cv = cv->parsed();
    const Overrides& o = is_cv ? cv_o : ab_o;
    const PipelineConfig config = o.build();
    const Dataset ds = load_dataset(data);
    ExperimentOptions opts;
    opts.k = k;
    const auto* fold_seed = (is_cv ? cv : ablate)->get_option("--fold-seed");
    opts.seed = fold_seed->count() ? cv_seed : config.seed;
    opts.parallel_folds = !serial;
    opts.cache_dir = cache;
    opts.cost = cost;
    opts.log = log_line;
    if (is_cv) {
      const CvResult r = run_cv(ds, config, opts);
      for (const auto& w : r.warnings) log_line("warning: " + w);
      write_cv_report(report, r);
      print_metrics(r.pooled, cost);
    } else {
      const auto m = mode == "loo" ? AblationMode::LeaveOneOut : AblationMode::Cumulative;
      const auto rows = run_ablation(ds, config, config.families, m, opts);
      for (const auto& w : rows.front().result.warnings) log_line("warning: " + w);
      write_ablation_report(report, rows, m);
      std::printf("row,E,accuracy\n");
      for (const auto& row : rows)
        std::printf("%s,%.6f,%.6f\n", row.name.c_str(), row.result.pooled_error, row.result.pooled_accuracy);
    }
    log_line("report written to " + report);
    return kOk;
  }

  if (*synth) {
    SynthOptions so;
    so.n = n;
    so.seed = synth_seed;
    if (!dist.empty()) {
      const auto d = parse_distribution(dist);
      std::copy(d.begin(), d.end(), so.distribution.begin());
    }
    const Dataset ds = gen_synthetic(so);
    std::ostringstream csv;
    write_dataset_csv(ds, csv);
    write_file_atomic(out, csv.str());
    if (!resources.empty()) write_synthetic_resources(resources);
    log_line("wrote " + std::to_string(ds.size()) + " essays to " + out);
    return kOk;
  }

  if (*score) {
    const auto predictions = read_predictions(pred);
    const Dataset ds = load_dataset(gold);
    ConfusionMatrix m;
    for (const auto& e : ds.essays()) {
      if (!e.label) throw DataError("gold essay '" + e.id + "' has no label");
      const auto it = predictions.find(e.id);
      if (it == predictions.end()) throw DataError("no prediction for essay '" + e.id + "'");
      m.add(*e.label, it->second);
    }
    if (predictions.size() != ds.size())
      log_line("warning: " + std::to_string(predictions.size() - ds.size()) +
               " predictions have no gold essay");
    print_metrics(m, cost);
    return kOk;
  }

  if (*inspect) {
    const TrainedModel model = load_model(model_path);
    const auto& p = model.pipeline;
    if (dump == "lm-low" || dump == "lm-high") {
      const auto* lm = dump == "lm-low" ? p.lm_low() : p.lm_high();
      if (!lm) throw DataError("model has no language-model family");
      lm->lm.dump(std::cout);
      return kOk;
    }
    if (dump == "topics") {
      if (p.topic_models().empty()) throw DataError("model has no topic family");
      for (const auto& m : p.topic_models()) m.dump_topics(std::cout);
      return kOk;
    }
    if (dump == "bow") {
      if (!p.vectorizer()) throw DataError("model has no bag-of-words family");
      p.vectorizer()->dump(std::cout);
      return kOk;
    }
    std::printf("fingerprint %016llx\nwidth %zu\n", static_cast<unsigned long long>(p.fingerprint()),
                p.layout().width());
    for (const auto& s : p.layout().slices())
      std::printf("family %s offset %zu width %zu\n", std::string(to_string(s.family)).c_str(), s.offset,
                  s.width);
    if (const auto* g = std::get_if<GBTModel>(&model.classifier))
      std::printf("classifier gbt rounds %zu depth %d learning_rate %g\n", g->rounds(), g->config().max_depth,
                  g->config().learning_rate);
    else
      std::printf("classifier logreg\n");
    return kOk;
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const cefr::InvalidArgument& e) {
    std::cerr << "cefr: error: " << e.what() << '\n';
    return kUsage;
  } catch (const cefr::DataError& e) {
    std::cerr << "cefr: data error: " << e.what() << '\n';
    return kData;
  } catch (const cefr::DegenerateInput& e) {
    std::cerr << "cefr: data error: " << e.what() << '\n';
    return kData;
  } catch (const cefr::ResourceError& e) {
    std::cerr << "cefr: resource error: " << e.what() << '\n';
    return kResource;
  } catch (const cefr::ModelFormatError& e) {
    std::cerr << "cefr: model error: " << e.what() << '\n';
    return kResource;
  } catch (const std::exception& e) {
    std::cerr << "cefr: error: " << e.what() << '\n';
    return kData;
  }
}
