#include "fundcat/doc2vec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <stdexcept>

#include "fundcat/util.hpp"
#include "nlohmann/json.hpp"

namespace fundcat::doc2vec {

using json = nlohmann::ordered_json;

namespace {

double stable_softplus(double x) {
  // log(1 + e^x) without overflow for large |x|.
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

int sample_noise(const std::vector<double>& cdf, std::mt19937_64& rng) {
  const double u = util::uniform_unit(rng);
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<int>(it - cdf.begin());
}

void validate_config(const Doc2VecConfig& c) {
  if (c.dim < 1) throw std::invalid_argument("doc2vec: dim must be positive");
  if (c.window < 1) throw std::invalid_argument("doc2vec: window must be positive");
  if (c.epochs < 1) throw std::invalid_argument("doc2vec: epochs must be positive");
  if (c.negatives < 1) throw std::invalid_argument("doc2vec: negatives must be positive");
  if (!(c.initial_lr > 0.0)) throw std::invalid_argument("doc2vec: initial_lr must be positive");
  if (c.min_count < 1) throw std::invalid_argument("doc2vec: min_count must be positive");
}

// One training event: pull `vec` toward the target's output weights and away
// from sampled noise words. Returns the event's logistic loss. Output weights
// are updated only when `update_outputs`.
double train_event(std::vector<double>& vec,
                   std::vector<std::vector<double>>& outputs,
                   int target,
                   const std::vector<double>& noise_cdf,
                   int negatives,
                   double lr,
                   bool update_outputs,
                   std::mt19937_64& rng) {
  const int dim = static_cast<int>(vec.size());
  double loss = 0.0;
  std::vector<double> neu1e(static_cast<std::size_t>(dim), 0.0);

  for (int k = 0; k <= negatives; ++k) {
    int word;
    double label;
    if (k == 0) {
      word = target;
      label = 1.0;
    } else {
      word = sample_noise(noise_cdf, rng);
      if (word == target) continue;  // noise colliding with the target teaches nothing
      label = 0.0;
    }
    auto& out = outputs[static_cast<std::size_t>(word)];
    double z = 0.0;
    for (int i = 0; i < dim; ++i) {
      z += vec[static_cast<std::size_t>(i)] * out[static_cast<std::size_t>(i)];
    }
    loss += (label == 1.0) ? stable_softplus(-z) : stable_softplus(z);
    const double g = (label - sigmoid(z)) * lr;
    for (int i = 0; i < dim; ++i) {
      neu1e[static_cast<std::size_t>(i)] += g * out[static_cast<std::size_t>(i)];
      if (update_outputs) {
        out[static_cast<std::size_t>(i)] += g * vec[static_cast<std::size_t>(i)];
      }
    }
  }
  for (int i = 0; i < dim; ++i) {
    vec[static_cast<std::size_t>(i)] += neu1e[static_cast<std::size_t>(i)];
  }
  return loss;
}

double epoch_lr(double initial_lr, int epoch, int total) {
  // Linear decay from initial_lr at epoch 0 to 0.1*initial_lr at the last.
  const int span = std::max(1, total - 1);
  return initial_lr * (1.0 - 0.9 * static_cast<double>(epoch) / static_cast<double>(span));
}

}  // namespace

Doc2VecModel train_doc2vec_dbow(const std::vector<TokenSequence>& train_seqs,
                                const Doc2VecConfig& config) {
  validate_config(config);
  if (train_seqs.empty()) {
    throw std::invalid_argument("doc2vec: no training sequences");
  }

  Doc2VecModel model;
  model.config = config;

  // Vocabulary: tokens with total count >= min_count, lexicographic order.
  std::map<std::string, std::int64_t> counts;
  for (const auto& seq : train_seqs) {
    for (const auto& tok : seq) ++counts[tok];
  }
  for (auto& [term, n] : counts) {
    if (n < config.min_count) continue;
    model.term_index.emplace(term, static_cast<int>(model.vocab_terms.size()));
    model.vocab_terms.push_back(term);
    model.vocab_counts.push_back(n);
  }
  if (model.vocab_terms.empty()) {
    throw std::runtime_error("doc2vec: vocabulary is empty after min_count pruning");
  }
  const int n_vocab = static_cast<int>(model.vocab_terms.size());

  // Noise distribution: unigram^0.75, stored as a CDF with final entry 1.
  {
    double total = 0.0;
    std::vector<double> pow_counts(static_cast<std::size_t>(n_vocab));
    for (int w = 0; w < n_vocab; ++w) {
      pow_counts[static_cast<std::size_t>(w)] =
          std::pow(static_cast<double>(model.vocab_counts[static_cast<std::size_t>(w)]), 0.75);
      total += pow_counts[static_cast<std::size_t>(w)];
    }
    model.noise_cdf.resize(static_cast<std::size_t>(n_vocab));
    double acc = 0.0;
    for (int w = 0; w < n_vocab; ++w) {
      acc += pow_counts[static_cast<std::size_t>(w)] / total;
      model.noise_cdf[static_cast<std::size_t>(w)] = acc;
    }
    model.noise_cdf.back() = 1.0;
  }

  // Sequences restricted to vocabulary ids; every document must keep at
  // least one token or its vector could never train.
  std::vector<std::vector<int>> filtered(train_seqs.size());
  for (std::size_t d = 0; d < train_seqs.size(); ++d) {
    for (const auto& tok : train_seqs[d]) {
      auto it = model.term_index.find(tok);
      if (it != model.term_index.end()) filtered[d].push_back(it->second);
    }
    if (filtered[d].empty()) {
      throw std::runtime_error("doc2vec: document " + std::to_string(d) +
                               " has no in-vocabulary tokens");
    }
  }

  std::mt19937_64 rng(config.seed);
  const int dim = config.dim;
  model.doc_vectors.assign(train_seqs.size(),
                           std::vector<double>(static_cast<std::size_t>(dim)));
  for (auto& vec : model.doc_vectors) {
    for (auto& x : vec) x = (util::uniform_unit(rng) - 0.5) / static_cast<double>(dim);
  }
  model.output_weights.assign(static_cast<std::size_t>(n_vocab),
                              std::vector<double>(static_cast<std::size_t>(dim), 0.0));

  model.epoch_mean_loss.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = epoch_lr(config.initial_lr, epoch, config.epochs);
    double loss_sum = 0.0;
    std::int64_t events = 0;
    for (std::size_t d = 0; d < filtered.size(); ++d) {
      const auto& ids = filtered[d];
      const int n = static_cast<int>(ids.size());
      for (int t = 0; t < n; ++t) {
        const int lo = std::max(0, t - config.window);
        const int hi = std::min(n - 1, t + config.window);
        const int pick = lo + static_cast<int>(util::uniform_below(
                                  rng, static_cast<std::uint64_t>(hi - lo + 1)));
        const int target = ids[static_cast<std::size_t>(pick)];
        loss_sum += train_event(model.doc_vectors[d], model.output_weights, target,
                                model.noise_cdf, config.negatives, lr,
                                /*update_outputs=*/true, rng);
        ++events;
      }
    }
    model.epoch_mean_loss.push_back(loss_sum / static_cast<double>(events));
  }
  return model;
}

std::vector<double> infer_doc2vec(const Doc2VecModel& model,
                                  const TokenSequence& seq,
                                  int steps,
                                  std::uint64_t seed) {
  if (steps < 1) throw std::invalid_argument("doc2vec: steps must be positive");
  const int dim = model.config.dim;

  std::vector<int> ids;
  for (const auto& tok : seq) {
    auto it = model.term_index.find(tok);
    if (it != model.term_index.end()) ids.push_back(it->second);
  }
  if (ids.empty()) {
    std::cerr << "warning: doc2vec inference on a document with no "
                 "in-vocabulary tokens; returning zero vector\n";
    return std::vector<double>(static_cast<std::size_t>(dim), 0.0);
  }

  std::mt19937_64 rng(seed);
  std::vector<double> vec(static_cast<std::size_t>(dim));
  for (auto& x : vec) x = (util::uniform_unit(rng) - 0.5) / static_cast<double>(dim);

  // Output weights stay frozen; only the new document vector moves.
  auto outputs = model.output_weights;
  const int n = static_cast<int>(ids.size());
  for (int step = 0; step < steps; ++step) {
    const double lr = epoch_lr(model.config.initial_lr, step, steps);
    for (int t = 0; t < n; ++t) {
      const int lo = std::max(0, t - model.config.window);
      const int hi = std::min(n - 1, t + model.config.window);
      const int pick = lo + static_cast<int>(util::uniform_below(
                                rng, static_cast<std::uint64_t>(hi - lo + 1)));
      train_event(vec, outputs, ids[static_cast<std::size_t>(pick)], model.noise_cdf,
                  model.config.negatives, lr, /*update_outputs=*/false, rng);
    }
  }
  return vec;
}

namespace {

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

void save_doc2vec_model(const Doc2VecModel& model, const std::string& path) {
  json j;
  j["config"] = {{"dim", model.config.dim},
                 {"window", model.config.window},
                 {"epochs", model.config.epochs},
                 {"negatives", model.config.negatives},
                 {"initial_lr", model.config.initial_lr},
                 {"min_count", model.config.min_count},
                 {"seed", model.config.seed}};
  j["vocab_terms"] = model.vocab_terms;
  j["vocab_counts"] = model.vocab_counts;
  j["noise_cdf"] = model.noise_cdf;
  j["doc_vectors"] = matrix_to_json(model.doc_vectors);
  j["output_weights"] = matrix_to_json(model.output_weights);
  j["epoch_mean_loss"] = model.epoch_mean_loss;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump() << '\n';
}

Doc2VecModel load_doc2vec_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  json j = json::parse(in, nullptr, true);

  Doc2VecModel model;
  const auto& c = j.at("config");
  model.config.dim = c.at("dim").get<int>();
  model.config.window = c.at("window").get<int>();
  model.config.epochs = c.at("epochs").get<int>();
  model.config.negatives = c.at("negatives").get<int>();
  model.config.initial_lr = c.at("initial_lr").get<double>();
  model.config.min_count = c.at("min_count").get<int>();
  model.config.seed = c.at("seed").get<std::uint64_t>();
  model.vocab_terms = j.at("vocab_terms").get<std::vector<std::string>>();
  model.vocab_counts = j.at("vocab_counts").get<std::vector<std::int64_t>>();
  model.noise_cdf = j.at("noise_cdf").get<std::vector<double>>();
  model.doc_vectors = matrix_from_json(j.at("doc_vectors"));
  model.output_weights = matrix_from_json(j.at("output_weights"));
  model.epoch_mean_loss = j.at("epoch_mean_loss").get<std::vector<double>>();
  for (std::size_t i = 0; i < model.vocab_terms.size(); ++i) {
    model.term_index.emplace(model.vocab_terms[i], static_cast<int>(i));
  }
  return model;
}

}  // namespace fundcat::doc2vec
