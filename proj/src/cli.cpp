#include "fundcat/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"

#include "fundcat/classify.hpp"
#include "fundcat/corpus.hpp"
#include "fundcat/doc2vec.hpp"
#include "fundcat/explain.hpp"
#include "fundcat/metrics.hpp"
#include "fundcat/util.hpp"

namespace fundcat::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config plumbing

namespace {

std::vector<std::string> split_dotted(const std::string& dotted) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : dotted) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

const json* find_dotted(const json& root, const std::string& dotted) {
  const json* node = &root;
  for (const auto& part : split_dotted(dotted)) {
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &(*node)[part];
  }
  return node;
}

}  // namespace

bool RunConfig::has(const std::string& dotted) const {
  const json* node = find_dotted(j, dotted);
  return node != nullptr && !node->is_null();
}

json RunConfig::at(const std::string& dotted) const {
  const json* node = find_dotted(j, dotted);
  if (node == nullptr) throw std::runtime_error("config: missing key '" + dotted + "'");
  return *node;
}

std::string RunConfig::out_dir() const { return get<std::string>("out_dir", "."); }

std::uint64_t RunConfig::seed() const { return get<std::uint64_t>("seed", 0); }

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  RunConfig cfg;
  cfg.j = json::parse(in, nullptr, true);
  if (!cfg.j.is_object()) throw std::runtime_error("config must be a JSON object: " + path);
  return cfg;
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::runtime_error("--set expects key=value, got: " + assignment);
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // bare strings stay strings

  json* node = &config;
  const auto parts = split_dotted(key);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (parts[i].empty()) throw std::runtime_error("--set: empty path segment in " + key);
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
    if (!node->is_object()) {
      throw std::runtime_error("--set: '" + parts[i] + "' is not an object in " + key);
    }
  }
  if (parts.back().empty()) throw std::runtime_error("--set: empty key in " + assignment);
  (*node)[parts.back()] = std::move(value);
}

std::uint64_t stage_seed(std::uint64_t base, const std::string& stage) {
  return util::fnv1a64(stage + ":" + std::to_string(base));
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
}

void write_json_file(const fs::path& path, const json& j, int indent) {
  write_text_file(path, (indent >= 0 ? j.dump(indent) : j.dump()) + "\n");
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  return json::parse(in, nullptr, true);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += "\"\"";
    else quoted.push_back(c);
  }
  quoted.push_back('"');
  return quoted;
}

corpus::DataFormat format_for(const RunConfig& cfg, const std::string& path) {
  const std::string fmt = cfg.get<std::string>("data_format", "");
  if (fmt == "jsonl") return corpus::DataFormat::jsonl;
  if (fmt == "csv") return corpus::DataFormat::csv;
  if (!fmt.empty()) throw std::runtime_error("config: unknown data_format '" + fmt + "'");
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    return corpus::DataFormat::csv;
  }
  return corpus::DataFormat::jsonl;
}

corpus::Dataset load_required_dataset(const RunConfig& cfg, const std::string& path) {
  if (!fs::exists(path)) {
    throw std::runtime_error("dataset file does not exist: " + path);
  }
  return corpus::load_dataset(path, format_for(cfg, path));
}

int class_index_of(const std::vector<std::string>& names, const std::string& label) {
  auto it = std::lower_bound(names.begin(), names.end(), label);
  if (it == names.end() || *it != label) return -1;
  return static_cast<int>(it - names.begin());
}

// Preprocess defaults depend on the featurizer: TF-IDF runs the full
// pipeline, the embedding paths only tokenize + lowercase.
preprocess::PreprocessConfig resolve_preprocess(const RunConfig& cfg,
                                                const std::string& featurizer_type) {
  preprocess::PreprocessConfig pp;
  if (featurizer_type != "tfidf") pp = preprocess::lowercase_only_config();
  pp.lowercase = cfg.get<bool>("preprocess.lowercase", pp.lowercase);
  pp.filter_stopwords = cfg.get<bool>("preprocess.filter_stopwords", pp.filter_stopwords);
  pp.filter_non_alphabetic =
      cfg.get<bool>("preprocess.filter_non_alphabetic", pp.filter_non_alphabetic);
  pp.lemmatize = cfg.get<bool>("preprocess.lemmatize", pp.lemmatize);
  pp.ngram_min = cfg.get<int>("preprocess.ngram_min", pp.ngram_min);
  pp.ngram_max = cfg.get<int>("preprocess.ngram_max", pp.ngram_max);
  return pp;
}

preprocess::Lexicon resolve_lexicon(const RunConfig& cfg) {
  if (cfg.has("preprocess.lexicon_path")) {
    return preprocess::load_lexicon(cfg.at("preprocess.lexicon_path").get<std::string>());
  }
  return preprocess::default_lexicon();
}

json preprocess_to_json(const preprocess::PreprocessConfig& pp) {
  json j;
  j["lowercase"] = pp.lowercase;
  j["filter_stopwords"] = pp.filter_stopwords;
  j["filter_non_alphabetic"] = pp.filter_non_alphabetic;
  j["lemmatize"] = pp.lemmatize;
  j["ngram_min"] = pp.ngram_min;
  j["ngram_max"] = pp.ngram_max;
  return j;
}

preprocess::PreprocessConfig preprocess_from_json(const json& j) {
  preprocess::PreprocessConfig pp;
  pp.lowercase = j.at("lowercase").get<bool>();
  pp.filter_stopwords = j.at("filter_stopwords").get<bool>();
  pp.filter_non_alphabetic = j.at("filter_non_alphabetic").get<bool>();
  pp.lemmatize = j.at("lemmatize").get<bool>();
  pp.ngram_min = j.at("ngram_min").get<int>();
  pp.ngram_max = j.at("ngram_max").get<int>();
  return pp;
}

json lexicon_to_json(const preprocess::Lexicon& lex) {
  json j;
  std::vector<std::string> stopwords(lex.stopwords.begin(), lex.stopwords.end());
  std::sort(stopwords.begin(), stopwords.end());
  j["stopwords"] = stopwords;

  std::map<std::string, std::string> exceptions(lex.lemma_exceptions.begin(),
                                                lex.lemma_exceptions.end());
  json ex = json::object();
  for (const auto& [word, lemma] : exceptions) ex[word] = lemma;
  j["lemma_exceptions"] = std::move(ex);

  json rules = json::array();
  for (const auto& [suffix, repl] : lex.suffix_rules) {
    rules.push_back(json::array({suffix, repl}));
  }
  j["suffix_rules"] = std::move(rules);
  return j;
}

preprocess::Lexicon lexicon_from_json(const json& j) {
  preprocess::Lexicon lex;
  for (const auto& w : j.at("stopwords")) lex.stopwords.insert(w.get<std::string>());
  for (const auto& [word, lemma] : j.at("lemma_exceptions").items()) {
    lex.lemma_exceptions.emplace(word, lemma.get<std::string>());
  }
  for (const auto& rule : j.at("suffix_rules")) {
    lex.suffix_rules.emplace_back(rule.at(0).get<std::string>(),
                                  rule.at(1).get<std::string>());
  }
  return lex;
}

json matrix_to_json(const std::vector<std::vector<double>>& m) {
  json rows = json::array();
  for (const auto& row : m) {
    json r = json::array();
    for (double v : row) r.push_back(v);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<std::vector<double>> matrix_from_json(const json& j) {
  std::vector<std::vector<double>> m;
  m.reserve(j.size());
  for (const auto& row : j) m.push_back(row.get<std::vector<double>>());
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// synth / split

int cmd_synth(const RunConfig& cfg) {
  corpus::SynthSpec spec;
  spec.n_classes = cfg.get<int>("synth.n_classes", spec.n_classes);
  if (cfg.has("synth.docs_per_class")) {
    const json dpc = cfg.at("synth.docs_per_class");
    if (dpc.is_number_integer()) {
      spec.docs_per_class.assign(static_cast<std::size_t>(spec.n_classes), dpc.get<int>());
    } else {
      spec.docs_per_class = dpc.get<std::vector<int>>();
    }
  } else {
    spec.docs_per_class.assign(static_cast<std::size_t>(spec.n_classes), 40);
  }
  spec.vocab_per_class = cfg.get<int>("synth.vocab_per_class", spec.vocab_per_class);
  spec.shared_vocab = cfg.get<int>("synth.shared_vocab", spec.shared_vocab);
  spec.doc_length = cfg.get<int>("synth.doc_length", spec.doc_length);
  spec.seed = stage_seed(cfg.seed(), "synth");

  const std::string path = cfg.get<std::string>("dataset", "");
  if (path.empty()) throw std::runtime_error("config: 'dataset' output path is required");

  const corpus::Dataset ds = corpus::synth_corpus(spec);
  fs::path p(path);
  if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
  corpus::save_dataset_jsonl(ds, path);
  std::cout << "wrote " << ds.documents.size() << " documents ("
            << ds.labels.size() << " classes) to " << path << "\n";
  return 0;
}

int cmd_split(const RunConfig& cfg) {
  const std::string path = cfg.get<std::string>("dataset", "");
  if (path.empty()) throw std::runtime_error("config: 'dataset' path is required");

  corpus::LoadStats stats;
  if (!fs::exists(path)) throw std::runtime_error("dataset file does not exist: " + path);
  corpus::Dataset raw = corpus::load_dataset(path, format_for(cfg, path), &stats);

  const int min_per_class = cfg.get<int>("split.min_per_class", 9);
  corpus::Dataset clean = corpus::clean_dataset(raw, min_per_class);

  corpus::SplitSpec spec;
  spec.test_fraction = cfg.get<double>("split.test_fraction", spec.test_fraction);
  spec.val_fraction_of_train =
      cfg.get<double>("split.val_fraction_of_train", spec.val_fraction_of_train);
  spec.min_per_class = min_per_class;
  spec.seed = stage_seed(cfg.seed(), "split");
  const corpus::DatasetSplits splits = corpus::stratified_split(clean, spec);

  const fs::path out(cfg.out_dir());
  fs::create_directories(out);
  corpus::save_dataset_jsonl(splits.train, (out / "train.jsonl").string());
  corpus::save_dataset_jsonl(splits.validation, (out / "validation.jsonl").string());
  corpus::save_dataset_jsonl(splits.test, (out / "test.jsonl").string());

  json per_class = json::object();
  for (const auto& label : clean.labels) {
    auto count = [&label](const corpus::Dataset& d) {
      return std::count_if(d.documents.begin(), d.documents.end(),
                           [&label](const corpus::Document& doc) { return doc.label == label; });
    };
    per_class[label] = {{"train", count(splits.train)},
                        {"validation", count(splits.validation)},
                        {"test", count(splits.test)}};
  }
  json summary;
  summary["n_input"] = raw.documents.size() + stats.dropped;
  summary["dropped_load"] = stats.dropped;
  summary["dropped_clean"] = raw.documents.size() - clean.documents.size();
  summary["n_after_clean"] = clean.documents.size();
  summary["n_classes"] = clean.labels.size();
  summary["n_train"] = splits.train.documents.size();
  summary["n_validation"] = splits.validation.documents.size();
  summary["n_test"] = splits.test.documents.size();
  summary["test_fraction"] = spec.test_fraction;
  summary["val_fraction_of_train"] = spec.val_fraction_of_train;
  summary["min_per_class"] = spec.min_per_class;
  summary["seed"] = cfg.seed();
  summary["per_class"] = std::move(per_class);
  write_json_file(out / "split_summary.json", summary, 2);

  std::cout << "split " << clean.documents.size() << " documents into "
            << splits.train.documents.size() << " train / "
            << splits.validation.documents.size() << " validation / "
            << splits.test.documents.size() << " test\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

namespace {

struct TrainFeaturization {
  std::unique_ptr<featurize::Featurizer> featurizer;  // null for precomputed
  classify::FeatureMatrix X_train;
  classify::FeatureMatrix X_val;
  json descriptor;   // persisted into the model file
  json report_echo;  // featurizer parameters echoed into the grid report
};

std::vector<preprocess::TokenSequence> pipeline_all(
    const corpus::Dataset& ds, const preprocess::PreprocessConfig& pp,
    const preprocess::Lexicon& lex) {
  std::vector<preprocess::TokenSequence> seqs;
  seqs.reserve(ds.documents.size());
  for (const auto& doc : ds.documents) {
    seqs.push_back(preprocess::apply_pipeline(preprocess::tokenize(doc.text), pp, lex));
  }
  return seqs;
}

std::vector<std::vector<double>> dense_features(const featurize::Featurizer& f,
                                                const corpus::Dataset& ds) {
  std::vector<std::vector<double>> rows;
  rows.reserve(ds.documents.size());
  for (const auto& doc : ds.documents) {
    rows.push_back(f.transform(preprocess::tokenize(doc.text)).dense);
  }
  return rows;
}

TrainFeaturization featurize_tfidf(const RunConfig& cfg, const corpus::Dataset& train,
                                   const corpus::Dataset& val) {
  const auto pp = resolve_preprocess(cfg, "tfidf");
  auto lex = resolve_lexicon(cfg);
  const int min_df = cfg.get<int>("featurizer.tfidf.min_df", 1);
  std::optional<int> max_features;
  if (cfg.has("featurizer.tfidf.max_features")) {
    max_features = cfg.at("featurizer.tfidf.max_features").get<int>();
  }

  const auto train_seqs = pipeline_all(train, pp, lex);
  featurize::TfidfModel model{featurize::fit_vocabulary(train_seqs, min_df, max_features), pp};

  TrainFeaturization out;
  std::vector<featurize::SparseVector> train_rows;
  train_rows.reserve(train_seqs.size());
  for (const auto& seq : train_seqs) {
    train_rows.push_back(featurize::tfidf_transform(seq, model));
  }
  out.X_train = classify::sparse_matrix(std::move(train_rows), model.vocabulary.size());

  std::vector<featurize::SparseVector> val_rows;
  val_rows.reserve(val.documents.size());
  for (const auto& seq : pipeline_all(val, pp, lex)) {
    val_rows.push_back(featurize::tfidf_transform(seq, model));
  }
  out.X_val = classify::sparse_matrix(std::move(val_rows), model.vocabulary.size());

  out.descriptor["type"] = "tfidf";
  out.descriptor["preprocess"] = preprocess_to_json(pp);
  out.descriptor["min_df"] = min_df;
  out.descriptor["max_features"] = max_features ? json(*max_features) : json(nullptr);
  out.descriptor["n_docs"] = model.vocabulary.n_docs;
  out.descriptor["terms"] = model.vocabulary.terms;
  out.descriptor["doc_freq"] = model.vocabulary.doc_freq;
  out.descriptor["lexicon"] = lexicon_to_json(lex);

  out.report_echo = {{"type", "tfidf"},
                     {"min_df", min_df},
                     {"vocabulary_size", model.vocabulary.size()}};
  out.featurizer =
      std::make_unique<featurize::TfidfFeaturizer>(std::move(model), std::move(lex));
  return out;
}

TrainFeaturization featurize_word2vec_avg(const RunConfig& cfg,
                                          const corpus::Dataset& train,
                                          const corpus::Dataset& val) {
  if (!cfg.has("featurizer.word2vec_avg.embedding_path")) {
    throw std::runtime_error("config: featurizer.word2vec_avg.embedding_path is required");
  }
  const std::string path = cfg.at("featurizer.word2vec_avg.embedding_path").get<std::string>();
  featurize::EmbeddingTable table = featurize::load_embedding_table(path);
  const auto pp = resolve_preprocess(cfg, "word2vec_avg");
  auto lex = resolve_lexicon(cfg);

  TrainFeaturization out;
  auto featurizer = std::make_unique<featurize::AvgEmbeddingFeaturizer>(table, pp, lex);
  out.X_train = classify::dense_matrix(dense_features(*featurizer, train));
  out.X_val = classify::dense_matrix(dense_features(*featurizer, val));

  std::vector<std::string> words;
  words.reserve(table.vectors.size());
  for (const auto& [w, _] : table.vectors) words.push_back(w);
  std::sort(words.begin(), words.end());
  json vectors = json::array();
  for (const auto& w : words) {
    json row = json::array();
    for (double v : table.vectors.at(w)) row.push_back(v);
    vectors.push_back(std::move(row));
  }
  out.descriptor["type"] = "word2vec_avg";
  out.descriptor["preprocess"] = preprocess_to_json(pp);
  out.descriptor["dimension"] = table.dimension;
  out.descriptor["words"] = words;
  out.descriptor["vectors"] = std::move(vectors);
  out.descriptor["lexicon"] = lexicon_to_json(lex);

  out.report_echo = {{"type", "word2vec_avg"},
                     {"embedding_path", path},
                     {"dimension", table.dimension},
                     {"table_words", words.size()}};
  out.featurizer = std::move(featurizer);
  return out;
}

TrainFeaturization featurize_doc2vec(const RunConfig& cfg, const corpus::Dataset& train,
                                     const corpus::Dataset& val) {
  const auto pp = resolve_preprocess(cfg, "doc2vec");
  auto lex = resolve_lexicon(cfg);

  doc2vec::Doc2VecConfig dcfg;
  dcfg.dim = cfg.get<int>("featurizer.doc2vec.dim", dcfg.dim);
  dcfg.window = cfg.get<int>("featurizer.doc2vec.window", dcfg.window);
  dcfg.epochs = cfg.get<int>("featurizer.doc2vec.epochs", dcfg.epochs);
  dcfg.negatives = cfg.get<int>("featurizer.doc2vec.negatives", dcfg.negatives);
  dcfg.initial_lr = cfg.get<double>("featurizer.doc2vec.initial_lr", dcfg.initial_lr);
  dcfg.min_count = cfg.get<int>("featurizer.doc2vec.min_count", dcfg.min_count);
  dcfg.seed = stage_seed(cfg.seed(), "doc2vec");

  const auto train_seqs = pipeline_all(train, pp, lex);
  doc2vec::Doc2VecModel model = doc2vec::train_doc2vec_dbow(train_seqs, dcfg);

  const int infer_steps = cfg.get<int>("featurizer.doc2vec.infer_steps", dcfg.epochs);
  const std::uint64_t infer_seed = stage_seed(cfg.seed(), "doc2vec_infer");

  TrainFeaturization out;
  // Training documents keep their trained paragraph vectors; only unseen
  // documents go through inference.
  out.X_train = classify::dense_matrix(model.doc_vectors);

  out.descriptor["type"] = "doc2vec";
  out.descriptor["preprocess"] = preprocess_to_json(pp);
  out.descriptor["config"] = {{"dim", dcfg.dim},
                              {"window", dcfg.window},
                              {"epochs", dcfg.epochs},
                              {"negatives", dcfg.negatives},
                              {"initial_lr", dcfg.initial_lr},
                              {"min_count", dcfg.min_count},
                              {"seed", dcfg.seed}};
  out.descriptor["vocab_terms"] = model.vocab_terms;
  out.descriptor["vocab_counts"] = model.vocab_counts;
  out.descriptor["noise_cdf"] = model.noise_cdf;
  out.descriptor["doc_vectors"] = matrix_to_json(model.doc_vectors);
  out.descriptor["output_weights"] = matrix_to_json(model.output_weights);
  out.descriptor["epoch_mean_loss"] = model.epoch_mean_loss;
  out.descriptor["infer_steps"] = infer_steps;
  out.descriptor["infer_seed"] = infer_seed;
  out.descriptor["lexicon"] = lexicon_to_json(lex);

  out.report_echo = {{"type", "doc2vec"},       {"dim", dcfg.dim},
                     {"window", dcfg.window},   {"epochs", dcfg.epochs},
                     {"negatives", dcfg.negatives}, {"initial_lr", dcfg.initial_lr},
                     {"min_count", dcfg.min_count}, {"infer_steps", infer_steps},
                     {"final_epoch_loss", model.epoch_mean_loss.back()}};

  auto featurizer = std::make_unique<featurize::Doc2VecFeaturizer>(
      std::move(model), pp, std::move(lex), infer_steps, infer_seed);
  out.X_val = classify::dense_matrix(dense_features(*featurizer, val));
  out.featurizer = std::move(featurizer);
  return out;
}

std::vector<std::vector<double>> precomputed_features(
    const featurize::DocEmbeddingStore& store, const corpus::Dataset& ds,
    std::vector<std::string>& missing) {
  std::vector<std::vector<double>> rows;
  rows.reserve(ds.documents.size());
  for (const auto& doc : ds.documents) {
    auto it = store.by_id.find(doc.id);
    if (it == store.by_id.end()) {
      missing.push_back(doc.id);
      rows.emplace_back();
    } else {
      rows.push_back(it->second);
    }
  }
  return rows;
}

[[noreturn]] void throw_missing_ids(const std::vector<std::string>& missing) {
  std::string msg = "precomputed embeddings missing for " +
                    std::to_string(missing.size()) + " document id(s):";
  const std::size_t show = std::min<std::size_t>(missing.size(), 20);
  for (std::size_t i = 0; i < show; ++i) msg += " " + missing[i];
  if (missing.size() > show) msg += " ...";
  throw std::runtime_error(msg);
}

TrainFeaturization featurize_precomputed(const RunConfig& cfg,
                                         const corpus::Dataset& train,
                                         const corpus::Dataset& val) {
  if (!cfg.has("featurizer.precomputed.embedding_path")) {
    throw std::runtime_error("config: featurizer.precomputed.embedding_path is required");
  }
  const std::string path = cfg.at("featurizer.precomputed.embedding_path").get<std::string>();
  const featurize::DocEmbeddingStore store = featurize::load_precomputed_embeddings(path);

  std::vector<std::string> missing;
  auto train_rows = precomputed_features(store, train, missing);
  auto val_rows = precomputed_features(store, val, missing);
  if (!missing.empty()) throw_missing_ids(missing);

  TrainFeaturization out;
  out.X_train = classify::dense_matrix(std::move(train_rows));
  out.X_val = classify::dense_matrix(std::move(val_rows));
  out.descriptor["type"] = "precomputed";
  out.descriptor["embedding_path"] = path;
  out.descriptor["dimension"] = store.dimension;
  out.report_echo = {{"type", "precomputed"},
                     {"embedding_path", path},
                     {"dimension", store.dimension}};
  return out;
}

}  // namespace

int cmd_train(const RunConfig& cfg) {
  const fs::path out(cfg.out_dir());
  const corpus::Dataset train =
      load_required_dataset(cfg, (out / "train.jsonl").string());
  const corpus::Dataset val =
      load_required_dataset(cfg, (out / "validation.jsonl").string());

  const std::vector<std::string>& class_names = train.labels;
  std::vector<int> y_train, y_val;
  y_train.reserve(train.documents.size());
  for (const auto& doc : train.documents) {
    y_train.push_back(class_index_of(class_names, doc.label));
  }
  y_val.reserve(val.documents.size());
  for (const auto& doc : val.documents) {
    const int idx = class_index_of(class_names, doc.label);
    if (idx < 0) {
      throw std::runtime_error("validation label '" + doc.label +
                               "' does not occur in the training split");
    }
    y_val.push_back(idx);
  }

  const std::string type = cfg.get<std::string>("featurizer.type", "tfidf");
  TrainFeaturization feat;
  if (type == "tfidf") {
    feat = featurize_tfidf(cfg, train, val);
  } else if (type == "word2vec_avg") {
    feat = featurize_word2vec_avg(cfg, train, val);
  } else if (type == "doc2vec") {
    feat = featurize_doc2vec(cfg, train, val);
  } else if (type == "precomputed") {
    feat = featurize_precomputed(cfg, train, val);
  } else {
    throw std::runtime_error("config: unknown featurizer.type '" + type + "'");
  }

  classify::TrainConfig tcfg;
  tcfg.lambda_grid =
      cfg.get<std::vector<double>>("train.lambda_grid", tcfg.lambda_grid);
  tcfg.max_iterations = cfg.get<int>("train.max_iterations", tcfg.max_iterations);
  tcfg.gradient_tolerance =
      cfg.get<double>("train.gradient_tolerance", tcfg.gradient_tolerance);
  tcfg.seed = stage_seed(cfg.seed(), "train");

  auto [model, report] =
      classify::train_logreg(feat.X_train, y_train, feat.X_val, y_val, class_names, tcfg);

  json model_json;
  model_json["class_names"] = model.class_names;
  model_json["feature_dimension"] = model.feature_dimension;
  model_json["weights"] = model.weights;
  model_json["bias"] = model.bias;
  model_json["lambda"] = model.lambda;
  model_json["featurizer"] = std::move(feat.descriptor);
  write_json_file(out / "model.json", model_json, -1);

  json report_json;
  report_json["selected_lambda"] = report.selected_lambda;
  json entries = json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"lambda", e.lambda},
                       {"validation_score", e.validation_score},
                       {"final_loss", e.final_loss},
                       {"iterations", e.iterations},
                       {"converged", e.converged}});
  }
  report_json["entries"] = std::move(entries);
  report_json["featurizer"] = std::move(feat.report_echo);
  report_json["n_train"] = train.documents.size();
  report_json["n_validation"] = val.documents.size();
  report_json["n_classes"] = class_names.size();
  write_json_file(out / "grid_report.json", report_json, 2);

  double selected_score = 0.0;
  for (const auto& e : report.entries) {
    if (e.lambda == report.selected_lambda) selected_score = e.validation_score;
  }
  std::cout << "trained " << type << " model on " << train.documents.size()
            << " documents; selected lambda " << report.selected_lambda
            << " (validation accuracy " << selected_score << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

namespace {

struct LoadedModel {
  classify::LogRegModel model;
  json featurizer_descriptor;
};

LoadedModel load_model(const fs::path& path) {
  if (!fs::exists(path)) {
    throw std::runtime_error("model file does not exist: " + path.string());
  }
  json j = read_json_file(path);
  LoadedModel lm;
  lm.model.class_names = j.at("class_names").get<std::vector<std::string>>();
  lm.model.feature_dimension = j.at("feature_dimension").get<int>();
  lm.model.weights = j.at("weights").get<std::vector<double>>();
  lm.model.bias = j.at("bias").get<std::vector<double>>();
  lm.model.lambda = j.at("lambda").get<double>();
  const auto C = lm.model.class_names.size();
  if (lm.model.weights.size() != C * static_cast<std::size_t>(lm.model.feature_dimension) ||
      lm.model.bias.size() != C) {
    throw std::runtime_error("model file has inconsistent dimensions: " + path.string());
  }
  lm.featurizer_descriptor = j.at("featurizer");
  return lm;
}

fs::path model_path(const RunConfig& cfg) {
  if (cfg.has("model_path")) return fs::path(cfg.at("model_path").get<std::string>());
  return fs::path(cfg.out_dir()) / "model.json";
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

std::unique_ptr<featurize::Featurizer> featurizer_from_model_json(const json& model_json) {
  const json& d = model_json.contains("featurizer") ? model_json.at("featurizer") : model_json;
  const std::string type = d.at("type").get<std::string>();
  if (type == "precomputed") return nullptr;

  auto lex = lexicon_from_json(d.at("lexicon"));
  const auto pp = preprocess_from_json(d.at("preprocess"));

  if (type == "tfidf") {
    featurize::TfidfModel model;
    model.preprocess = pp;
    model.vocabulary.n_docs = d.at("n_docs").get<std::int64_t>();
    model.vocabulary.terms = d.at("terms").get<std::vector<std::string>>();
    model.vocabulary.doc_freq = d.at("doc_freq").get<std::vector<std::int64_t>>();
    for (std::size_t i = 0; i < model.vocabulary.terms.size(); ++i) {
      model.vocabulary.term_index.emplace(model.vocabulary.terms[i], static_cast<int>(i));
    }
    return std::make_unique<featurize::TfidfFeaturizer>(std::move(model), std::move(lex));
  }
  if (type == "word2vec_avg") {
    featurize::EmbeddingTable table;
    table.dimension = d.at("dimension").get<int>();
    const auto words = d.at("words").get<std::vector<std::string>>();
    const auto vectors = matrix_from_json(d.at("vectors"));
    if (words.size() != vectors.size()) {
      throw std::runtime_error("model file: embedding words/vectors mismatch");
    }
    for (std::size_t i = 0; i < words.size(); ++i) {
      table.vectors.emplace(words[i], vectors[i]);
    }
    return std::make_unique<featurize::AvgEmbeddingFeaturizer>(std::move(table), pp,
                                                               std::move(lex));
  }
  if (type == "doc2vec") {
    doc2vec::Doc2VecModel model;
    const json& c = d.at("config");
    model.config.dim = c.at("dim").get<int>();
    model.config.window = c.at("window").get<int>();
    model.config.epochs = c.at("epochs").get<int>();
    model.config.negatives = c.at("negatives").get<int>();
    model.config.initial_lr = c.at("initial_lr").get<double>();
    model.config.min_count = c.at("min_count").get<int>();
    model.config.seed = c.at("seed").get<std::uint64_t>();
    model.vocab_terms = d.at("vocab_terms").get<std::vector<std::string>>();
    model.vocab_counts = d.at("vocab_counts").get<std::vector<std::int64_t>>();
    model.noise_cdf = d.at("noise_cdf").get<std::vector<double>>();
    model.doc_vectors = matrix_from_json(d.at("doc_vectors"));
    model.output_weights = matrix_from_json(d.at("output_weights"));
    model.epoch_mean_loss = d.at("epoch_mean_loss").get<std::vector<double>>();
    for (std::size_t i = 0; i < model.vocab_terms.size(); ++i) {
      model.term_index.emplace(model.vocab_terms[i], static_cast<int>(i));
    }
    return std::make_unique<featurize::Doc2VecFeaturizer>(
        std::move(model), pp, std::move(lex), d.at("infer_steps").get<int>(),
        d.at("infer_seed").get<std::uint64_t>());
  }
  throw std::runtime_error("model file: unknown featurizer type '" + type + "'");
}

int cmd_evaluate(const RunConfig& cfg) {
  const fs::path out(cfg.out_dir());
  const LoadedModel lm = load_model(model_path(cfg));
  const corpus::Dataset test = load_required_dataset(cfg, (out / "test.jsonl").string());

  // The metric suite (macro averages in particular) is only meaningful when
  // the evaluation data covers exactly the model's classes.
  {
    std::set<std::string> test_classes(test.labels.begin(), test.labels.end());
    std::set<std::string> model_classes(lm.model.class_names.begin(),
                                        lm.model.class_names.end());
    if (test_classes != model_classes) {
      std::string msg = "class-set mismatch between model and test data;";
      for (const auto& c : model_classes) {
        if (!test_classes.count(c)) msg += " missing-from-test: " + c;
      }
      for (const auto& c : test_classes) {
        if (!model_classes.count(c)) msg += " unknown-to-model: " + c;
      }
      throw std::runtime_error(msg);
    }
  }

  std::vector<int> y_true;
  y_true.reserve(test.documents.size());
  for (const auto& doc : test.documents) {
    y_true.push_back(class_index_of(lm.model.class_names, doc.label));
  }

  std::vector<std::vector<double>> probs;
  probs.reserve(test.documents.size());
  const std::string type = lm.featurizer_descriptor.at("type").get<std::string>();
  if (type == "precomputed") {
    const std::string store_path =
        lm.featurizer_descriptor.at("embedding_path").get<std::string>();
    const featurize::DocEmbeddingStore store =
        featurize::load_precomputed_embeddings(store_path);
    std::vector<std::string> missing;
    auto rows = precomputed_features(store, test, missing);
    if (!missing.empty()) throw_missing_ids(missing);
    for (const auto& row : rows) {
      probs.push_back(
          classify::predict_proba(lm.model, std::span<const double>(row)).probabilities);
    }
  } else {
    const auto featurizer = featurizer_from_model_json(lm.featurizer_descriptor);
    for (const auto& doc : test.documents) {
      const auto f = featurizer->transform(preprocess::tokenize(doc.text));
      probs.push_back(
          f.is_sparse
              ? classify::predict_proba(lm.model, f.sparse).probabilities
              : classify::predict_proba(lm.model, std::span<const double>(f.dense))
                    .probabilities);
    }
  }

  const metrics::PredictionSet preds =
      metrics::make_prediction_set(std::move(y_true), std::move(probs));
  const int max_top_k = cfg.get<int>("report.max_top_k", 4);
  const metrics::MetricsReport report = metrics::compute_metrics_report(preds, max_top_k);

  json mj;
  mj["n_test"] = test.documents.size();
  mj["n_classes"] = lm.model.class_names.size();
  mj["accuracy"] = report.accuracy;
  mj["balanced_accuracy"] = report.balanced_accuracy;
  mj["f1"] = {{"micro", report.f1_micro},
              {"macro", report.f1_macro},
              {"weighted", report.f1_weighted}};
  mj["auc"] = {{"micro", report.auc_micro},
               {"macro", report.auc_macro},
               {"weighted", report.auc_weighted}};
  json topk = json::object();
  for (const auto& [k, v] : report.top_k_accuracy) topk[std::to_string(k)] = v;
  mj["top_k_accuracy"] = std::move(topk);
  write_json_file(out / "metrics.json", mj, 2);

  // Text table mirroring the usual report layout: top-k block, then F1 and
  // AUC in micro/weighted pairs.
  {
    std::ostringstream t;
    t << "Model";
    for (const auto& [k, _] : report.top_k_accuracy) t << " | Top-" << k;
    t << " | F1 Micro | F1 Weighted | AUC Micro | AUC Weighted\n";
    t << type << "+LR";
    for (const auto& [_, v] : report.top_k_accuracy) t << " | " << fmt3(v);
    t << " | " << fmt3(report.f1_micro) << " | " << fmt3(report.f1_weighted) << " | "
      << fmt3(report.auc_micro) << " | " << fmt3(report.auc_weighted) << "\n";
    write_text_file(out / "metrics.txt", t.str());
  }

  // Confusion matrices, optionally restricted to the most frequent classes.
  {
    const metrics::ConfusionMatrix cm = metrics::confusion_matrix(preds, true);
    const int C = preds.n_classes();
    std::vector<std::int64_t> support(static_cast<std::size_t>(C), 0);
    for (int t : preds.true_labels) ++support[static_cast<std::size_t>(t)];

    std::vector<int> order(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) order[static_cast<std::size_t>(c)] = c;
    int top_classes = cfg.get<int>("report.top_classes", 0);
    if (top_classes > 0 && top_classes < C) {
      std::stable_sort(order.begin(), order.end(), [&support](int a, int b) {
        return support[static_cast<std::size_t>(a)] > support[static_cast<std::size_t>(b)];
      });
      order.resize(static_cast<std::size_t>(top_classes));
      std::sort(order.begin(), order.end());  // keep canonical order in the CSV
    }

    std::ostringstream counts_csv, norm_csv;
    counts_csv << "class";
    norm_csv << "class";
    for (int c : order) {
      const auto& name = lm.model.class_names[static_cast<std::size_t>(c)];
      counts_csv << ',' << csv_escape(name);
      norm_csv << ',' << csv_escape(name);
    }
    counts_csv << '\n';
    norm_csv << '\n';
    for (int r : order) {
      const auto& name = lm.model.class_names[static_cast<std::size_t>(r)];
      counts_csv << csv_escape(name);
      norm_csv << csv_escape(name);
      for (int c : order) {
        counts_csv << ','
                   << cm.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        norm_csv << ','
                 << util::format_double(
                        cm.row_normalized[static_cast<std::size_t>(r)]
                                         [static_cast<std::size_t>(c)]);
      }
      counts_csv << '\n';
      norm_csv << '\n';
    }
    write_text_file(out / "confusion_counts.csv", counts_csv.str());
    write_text_file(out / "confusion_normalized.csv", norm_csv.str());
  }

  std::cout << "evaluated " << test.documents.size() << " documents: accuracy "
            << fmt3(report.accuracy) << ", micro-F1 " << fmt3(report.f1_micro)
            << ", macro-F1 " << fmt3(report.f1_macro) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// explain

namespace {

std::string sanitize_for_filename(const std::string& id) {
  std::string out;
  for (char c : id) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  }
  return out;
}

corpus::Dataset explain_dataset(const RunConfig& cfg) {
  const std::string which = cfg.get<std::string>("explain.data", "test");
  const fs::path out(cfg.out_dir());
  if (which == "train" || which == "validation" || which == "test") {
    return load_required_dataset(cfg, (out / (which + ".jsonl")).string());
  }
  if (which == "dataset") {
    return load_required_dataset(cfg, cfg.get<std::string>("dataset", ""));
  }
  throw std::runtime_error("config: explain.data must be train|validation|test|dataset");
}

}  // namespace

int cmd_explain(const RunConfig& cfg) {
  const fs::path out(cfg.out_dir());
  const LoadedModel lm = load_model(model_path(cfg));

  const std::string type = lm.featurizer_descriptor.at("type").get<std::string>();
  if (type == "precomputed") {
    throw std::runtime_error(
        "explanation requires a token-level featurizer; precomputed document "
        "embeddings cannot be masked per token");
  }
  if (type == "doc2vec" && !cfg.get<bool>("explain.allow_doc2vec", false)) {
    throw std::runtime_error(
        "doc2vec explanations re-run inference for every token subset, which is "
        "expensive; set explain.allow_doc2vec=true to proceed");
  }
  const auto featurizer = featurizer_from_model_json(lm.featurizer_descriptor);
  const corpus::Dataset data = explain_dataset(cfg);

  const bool global_mode = cfg.get<bool>("explain.global", false);
  if (!global_mode) {
    const std::string doc_id = cfg.get<std::string>("explain.doc_id", "");
    if (doc_id.empty()) {
      throw std::runtime_error(
          "explain needs a document id argument or --global; neither was given");
    }
    const corpus::Document* doc = nullptr;
    for (const auto& d : data.documents) {
      if (d.id == doc_id) {
        doc = &d;
        break;
      }
    }
    if (doc == nullptr) {
      throw std::runtime_error("document id '" + doc_id + "' not found in the " +
                               cfg.get<std::string>("explain.data", "test") + " data");
    }

    std::optional<std::string> target;
    if (cfg.has("explain.target_class")) {
      target = cfg.at("explain.target_class").get<std::string>();
    }
    const auto attributions = explain::explain_document(lm.model, *featurizer, *doc, target);
    const int target_idx = attributions.front().target_class;

    const auto tokens = preprocess::tokenize(doc->text);
    explain::ValueFunction v =
        explain::make_value_function(lm.model, *featurizer, tokens, target_idx);
    const double v_full = v.full();
    const double v_empty = v.empty();
    double sum = 0.0;
    for (const auto& a : attributions) sum += a.value;
    const double residual = std::abs(sum - (v_full - v_empty));

    json ej;
    ej["doc_id"] = doc->id;
    ej["true_label"] = doc->label;
    ej["target_class"] = lm.model.class_names[static_cast<std::size_t>(target_idx)];
    ej["v_full"] = v_full;
    ej["v_empty"] = v_empty;
    ej["efficiency_residual"] = residual;
    json toks = json::array();
    for (const auto& a : attributions) {
      toks.push_back({{"token", a.token}, {"position", a.position}, {"value", a.value}});
    }
    ej["tokens"] = std::move(toks);
    const fs::path path = out / ("explain_" + sanitize_for_filename(doc->id) + ".json");
    write_json_file(path, ej, 2);
    std::cout << "wrote local explanation for '" << doc->id << "' (target "
              << ej["target_class"].get<std::string>() << ", residual "
              << residual << ") to " << path.string() << "\n";
    return 0;
  }

  const bool per_class = cfg.get<bool>("explain.per_class", true);
  const int top_k = cfg.get<int>("explain.top_k", 5);
  const explain::GlobalImportance g =
      explain::global_importance(lm.model, *featurizer, data, per_class);

  std::ostringstream csv;
  for (std::size_t c = 0; c < g.class_names.size(); ++c) {
    csv << (c ? "," : "") << csv_escape(g.class_names[c]);
  }
  csv << '\n';
  std::vector<std::vector<std::pair<std::string, double>>> tops;
  tops.reserve(g.class_names.size());
  for (std::size_t c = 0; c < g.class_names.size(); ++c) {
    tops.push_back(g.top_k(static_cast<int>(c), top_k));
  }
  for (int row = 0; row < top_k; ++row) {
    for (std::size_t c = 0; c < tops.size(); ++c) {
      if (c) csv << ',';
      if (row < static_cast<int>(tops[c].size())) {
        csv << csv_escape(tops[c][static_cast<std::size_t>(row)].first);
      }
    }
    csv << '\n';
  }
  write_text_file(out / "global_importance.csv", csv.str());

  json gj;
  gj["class_names"] = g.class_names;
  gj["per_class_targets"] = per_class;
  json sums = json::object();
  for (std::size_t c = 0; c < g.class_names.size(); ++c) {
    json class_sums = json::object();
    for (const auto& [token, value] : g.sums[c]) class_sums[token] = value;
    sums[g.class_names[c]] = std::move(class_sums);
  }
  gj["sums"] = std::move(sums);
  json topj = json::object();
  for (std::size_t c = 0; c < g.class_names.size(); ++c) {
    json arr = json::array();
    for (const auto& [token, value] : tops[c]) {
      arr.push_back({{"token", token}, {"value", value}});
    }
    topj[g.class_names[c]] = std::move(arr);
  }
  gj["top_k"] = std::move(topj);
  write_json_file(out / "global_importance.json", gj, 2);

  std::cout << "wrote global importance over " << data.documents.size()
            << " documents to " << (out / "global_importance.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// entry point

int run(int argc, const char* const* argv) {
  CLI::App app{"text-based fund categorization pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path = "fundcat.json";
  app.add_option("--config", config_path, "path to the JSON run configuration")
      ->capture_default_str();
  std::int64_t seed_arg = 0;
  auto* seed_opt = app.add_option("--seed", seed_arg, "override the config seed");
  std::string out_arg;
  auto* out_opt = app.add_option("--out", out_arg, "override the output directory");
  std::vector<std::string> overrides;
  app.add_option("--set", overrides, "config override as dotted key=value (repeatable)");

  app.add_subcommand("synth", "generate a synthetic planted-vocabulary corpus");
  app.add_subcommand("split", "stratified train/validation/test split");
  app.add_subcommand("train", "fit the featurizer and grid-searched classifier");

  auto* sc_eval = app.add_subcommand("evaluate", "score the model on the test split");
  int top_classes = -1;
  sc_eval->add_option("--top-classes", top_classes,
                      "restrict confusion matrices to the N most frequent classes");

  auto* sc_explain = app.add_subcommand("explain", "token attributions for predictions");
  std::string doc_id;
  sc_explain->add_option("doc_id", doc_id, "document id for a local explanation");
  bool global_mode = false;
  sc_explain->add_flag("--global", global_mode, "global per-class token importance");
  std::string target_class;
  sc_explain->add_option("--target-class", target_class,
                         "explain this class instead of the predicted one");
  int top_k = -1;
  sc_explain->add_option("--top-k", top_k, "tokens per class in the global table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    RunConfig cfg = load_config(config_path);
    for (const auto& assignment : overrides) apply_override(cfg.j, assignment);
    if (seed_opt->count() > 0) cfg.j["seed"] = static_cast<std::uint64_t>(seed_arg);
    if (out_opt->count() > 0) cfg.j["out_dir"] = out_arg;
    if (top_classes >= 0) cfg.j["report"]["top_classes"] = top_classes;
    if (!doc_id.empty()) cfg.j["explain"]["doc_id"] = doc_id;
    if (global_mode) cfg.j["explain"]["global"] = true;
    if (!target_class.empty()) cfg.j["explain"]["target_class"] = target_class;
    if (top_k > 0) cfg.j["explain"]["top_k"] = top_k;

    if (app.got_subcommand("synth")) return cmd_synth(cfg);
    if (app.got_subcommand("split")) return cmd_split(cfg);
    if (app.got_subcommand("train")) return cmd_train(cfg);
    if (app.got_subcommand("evaluate")) return cmd_evaluate(cfg);
    if (app.got_subcommand("explain")) return cmd_explain(cfg);
    throw std::runtime_error("no subcommand selected");
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fundcat::cli
