// Acceptance gate: one self-contained check per release criterion, one
// PASS/FAIL line each, nonzero exit if anything fails. Oracles are shared
// with the unit suite (oracles.hpp); everything else here goes through the
// public library and CLI surfaces only.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fundcat/classify.hpp"
#include "fundcat/corpus.hpp"
#include "fundcat/explain.hpp"
#include "fundcat/featurize.hpp"
#include "fundcat/featurizer.hpp"
#include "fundcat/metrics.hpp"
#include "fundcat/preprocess.hpp"
#include "fundcat/util.hpp"
#include "nlohmann/json.hpp"
#include "oracles.hpp"

using namespace fundcat;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Harness

struct Failure {
  std::string reason;
};

#define REQUIRE_OR_FAIL(cond, msg)                      \
  do {                                                  \
    if (!(cond)) throw Failure{msg};                    \
  } while (0)

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared generators

std::vector<std::string> token_pool(int n) {
  std::vector<std::string> pool;
  for (int i = 0; i < n; ++i) pool.push_back("w" + std::to_string(i));
  return pool;
}

std::vector<double> random_table(int n_players, std::mt19937_64& rng) {
  std::vector<double> table(std::size_t{1} << n_players);
  for (auto& v : table) v = 4.0 * util::uniform_unit(rng) - 2.0;
  return table;
}

explain::ValueFunction table_value_function(int n, std::vector<double> table) {
  std::vector<std::string> tokens;
  for (int i = 0; i < n; ++i) tokens.push_back("tok" + std::to_string(i));
  return explain::ValueFunction(
      std::move(tokens), 0, [table = std::move(table)](const std::vector<int>& s) {
        std::size_t mask = 0;
        for (int p : s) mask |= (std::size_t{1} << p);
        return table[mask];
      });
}

// Additive base + pairwise + three-way interactions + small subset noise:
// random games with the structure real attribution targets have. A table of
// fully i.i.d. values carries no structure that any polynomial-count
// evaluation scheme could recover, so the rank-agreement gate runs on these.
std::vector<double> structured_table(int n, std::mt19937_64& rng) {
  std::vector<double> c(static_cast<std::size_t>(n));
  for (auto& x : c) x = 4.0 * util::uniform_unit(rng) - 2.0;
  std::vector<std::vector<double>> w(static_cast<std::size_t>(n),
                                     std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          0.8 * util::uniform_unit(rng) - 0.4;
    }
  }
  std::vector<double> t;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = j + 1; k < n; ++k) t.push_back(0.3 * util::uniform_unit(rng) - 0.15);
    }
  }
  std::vector<double> table(std::size_t{1} << n);
  for (std::size_t mask = 0; mask < table.size(); ++mask) {
    double v = 0.04 * util::uniform_unit(rng) - 0.02;
    std::size_t ti = 0;
    for (int i = 0; i < n; ++i) {
      const bool ini = mask & (std::size_t{1} << i);
      if (ini) v += c[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < n; ++j) {
        const bool inj = mask & (std::size_t{1} << j);
        if (ini && inj) v += w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        for (int k = j + 1; k < n; ++k, ++ti) {
          if (ini && inj && (mask & (std::size_t{1} << k))) v += t[ti];
        }
      }
    }
    table[mask] = v;
  }
  return table;
}

metrics::PredictionSet random_prediction_set(std::mt19937_64& rng) {
  const int C = 2 + static_cast<int>(util::uniform_below(rng, 5));  // 2..6
  const int n = C + 1 + static_cast<int>(util::uniform_below(rng, 35));
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    // first C samples cover every class so each has positives and negatives
    y[static_cast<std::size_t>(i)] =
        (i < C) ? i : static_cast<int>(util::uniform_below(rng, static_cast<std::size_t>(C)));
  }
  std::vector<std::vector<double>> probs(static_cast<std::size_t>(n),
                                         std::vector<double>(static_cast<std::size_t>(C)));
  for (auto& row : probs) {
    double sum = 0;
    for (auto& p : row) {
      p = util::uniform_unit(rng) + 1e-6;
      sum += p;
    }
    for (auto& p : row) p /= sum;
  }
  return metrics::make_prediction_set(std::move(y), std::move(probs));
}

// TF-IDF + grid-searched logistic regression over an already-split corpus;
// returns the trained model together with the test-set prediction set.
struct PipelineResult {
  classify::LogRegModel model;
  featurize::TfidfModel tfidf;
  metrics::PredictionSet test_preds;
  double test_accuracy = 0.0;
  double test_macro_f1 = 0.0;
};

PipelineResult run_tfidf_pipeline(const corpus::DatasetSplits& splits,
                                  const preprocess::PreprocessConfig& pp,
                                  const std::vector<double>& lambda_grid) {
  const auto& lex = preprocess::default_lexicon();
  auto featurize_split = [&](const corpus::Dataset& ds) {
    std::vector<preprocess::TokenSequence> seqs;
    seqs.reserve(ds.documents.size());
    for (const auto& doc : ds.documents) {
      seqs.push_back(preprocess::apply_pipeline(preprocess::tokenize(doc.text), pp, lex));
    }
    return seqs;
  };
  auto labels_of = [&](const corpus::Dataset& ds) {
    std::vector<int> y;
    y.reserve(ds.documents.size());
    for (const auto& doc : ds.documents) {
      y.push_back(splits.train.label_index(doc.label));
    }
    return y;
  };

  const auto train_seqs = featurize_split(splits.train);
  featurize::TfidfModel tfidf{featurize::fit_vocabulary(train_seqs, 1, std::nullopt), pp};
  auto rows_of = [&](const std::vector<preprocess::TokenSequence>& seqs) {
    std::vector<featurize::SparseVector> rows;
    rows.reserve(seqs.size());
    for (const auto& s : seqs) rows.push_back(featurize::tfidf_transform(s, tfidf));
    return rows;
  };
  const int dim = tfidf.vocabulary.size();
  const auto X_train = classify::sparse_matrix(rows_of(train_seqs), dim);
  const auto X_val = classify::sparse_matrix(rows_of(featurize_split(splits.validation)), dim);
  const auto X_test = classify::sparse_matrix(rows_of(featurize_split(splits.test)), dim);

  classify::TrainConfig tcfg;
  tcfg.lambda_grid = lambda_grid;
  auto [model, report] =
      classify::train_logreg(X_train, labels_of(splits.train), X_val,
                             labels_of(splits.validation), splits.train.labels, tcfg);

  std::vector<std::vector<double>> prob_matrix;
  for (const auto& row : X_test.sparse_rows) {
    prob_matrix.push_back(classify::predict_proba(model, row).probabilities);
  }
  PipelineResult out;
  out.test_preds = metrics::make_prediction_set(labels_of(splits.test), std::move(prob_matrix));
  out.test_accuracy = metrics::accuracy(out.test_preds);
  out.test_macro_f1 = metrics::f1_scores(out.test_preds).macro;
  out.model = std::move(model);
  out.tfidf = std::move(tfidf);
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 1: TF-IDF against the brute-force oracle

void criterion_tfidf_oracle() {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const int n_docs = 3 + static_cast<int>(util::uniform_below(rng, 8));   // 3..10
    const int n_terms = 5 + static_cast<int>(util::uniform_below(rng, 26)); // 5..30
    const int min_df = 1 + static_cast<int>(util::uniform_below(rng, 2));   // 1..2
    const auto pool = token_pool(n_terms);
    std::vector<std::vector<std::string>> docs(static_cast<std::size_t>(n_docs));
    for (auto& doc : docs) {
      const int len = 4 + static_cast<int>(util::uniform_below(rng, 20));
      for (int t = 0; t < len; ++t) {
        doc.push_back(pool[util::uniform_below(rng, pool.size())]);
      }
    }

    const auto expected = oracle::tfidf(docs, docs, min_df);
    featurize::TfidfModel model{featurize::fit_vocabulary(docs, min_df, std::nullopt),
                                preprocess::identity_config()};
    REQUIRE_OR_FAIL(model.vocabulary.terms == expected.terms,
                    "vocabulary term set disagrees with the oracle");

    for (std::size_t d = 0; d < docs.size(); ++d) {
      const auto sparse = featurize::tfidf_transform(docs[d], model);
      std::vector<double> dense(expected.terms.size(), 0.0);
      for (const auto& [idx, val] : sparse.entries) {
        dense[static_cast<std::size_t>(idx)] = val;
      }
      for (std::size_t j = 0; j < dense.size(); ++j) {
        REQUIRE_OR_FAIL(std::abs(dense[j] - expected.rows[d][j]) <= 1e-12,
                        "entry differs from oracle by more than 1e-12 (doc " +
                            std::to_string(d) + ", term '" + expected.terms[j] + "')");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Criterion 2: analytic gradient vs central finite differences

void criterion_gradient_check() {
  std::mt19937_64 rng(202);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(util::uniform_below(rng, 19));  // 2..20
    const int D = 1 + static_cast<int>(util::uniform_below(rng, 8));   // 1..8
    const int C = 2 + static_cast<int>(util::uniform_below(rng, 4));   // 2..5
    const double lambda = (trial % 2 == 0) ? 0.0 : 0.1;

    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n),
                                          std::vector<double>(static_cast<std::size_t>(D)));
    for (auto& row : rows) {
      for (auto& x : row) x = 2.0 * util::uniform_unit(rng) - 1.0;
    }
    const auto X = classify::dense_matrix(std::move(rows));
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& label : y) {
      label = static_cast<int>(util::uniform_below(rng, static_cast<std::size_t>(C)));
    }

    classify::LogRegModel model;
    for (int c = 0; c < C; ++c) model.class_names.push_back("c" + std::to_string(c));
    model.feature_dimension = D;
    model.weights.resize(static_cast<std::size_t>(C * D));
    model.bias.resize(static_cast<std::size_t>(C));
    for (auto& w : model.weights) w = util::uniform_unit(rng) - 0.5;
    for (auto& b : model.bias) b = util::uniform_unit(rng) - 0.5;

    const auto analytic = classify::loss_and_gradient(model, X, y, lambda);
    auto fd_check = [&](std::vector<double>& param, std::size_t k, double analytic_g) {
      const double saved = param[k];
      param[k] = saved + h;
      const double up = classify::loss_and_gradient(model, X, y, lambda).loss;
      param[k] = saved - h;
      const double down = classify::loss_and_gradient(model, X, y, lambda).loss;
      param[k] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double rel =
          std::abs(analytic_g - fd) / std::max({1.0, std::abs(analytic_g), std::abs(fd)});
      worst = std::max(worst, rel);
      REQUIRE_OR_FAIL(rel < 1e-5, "gradient component off by relative " + fmt4(rel));
    };
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
      fd_check(model.weights, k, analytic.grad_weights[k]);
    }
    for (std::size_t k = 0; k < model.bias.size(); ++k) {
      fd_check(model.bias, k, analytic.grad_bias[k]);
    }
  }
}

// ---------------------------------------------------------------------------
// Criterion 3: end-to-end synthetic classification quality

void criterion_end_to_end() {
  corpus::SynthSpec spec;
  spec.n_classes = 10;
  spec.docs_per_class.assign(10, 40);
  spec.seed = 4242;
  const auto ds = corpus::synth_corpus(spec);

  corpus::SplitSpec split;
  split.test_fraction = 0.25;
  split.val_fraction_of_train = 0.15;
  split.seed = 4242;
  const auto splits = corpus::stratified_split(ds, split);

  const auto result = run_tfidf_pipeline(splits, preprocess::PreprocessConfig{},
                                         {1e-4, 1e-3, 1e-2, 1e-1, 1.0});
  REQUIRE_OR_FAIL(result.test_accuracy >= 0.95,
                  "test accuracy " + fmt4(result.test_accuracy) + " < 0.95");
  REQUIRE_OR_FAIL(result.test_macro_f1 >= 0.90,
                  "macro-F1 " + fmt4(result.test_macro_f1) + " < 0.90");
}

// ---------------------------------------------------------------------------
// Criterion 4: metric identities on random prediction sets

void criterion_metric_identities() {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto preds = random_prediction_set(rng);
    const int C = preds.n_classes();
    const double acc = metrics::accuracy(preds);

    REQUIRE_OR_FAIL(metrics::f1_scores(preds).micro == acc, "micro-F1 != accuracy");

    double prev = 0.0;
    for (int k = 1; k <= C; ++k) {
      const double topk = metrics::top_k_accuracy(preds, k);
      REQUIRE_OR_FAIL(topk >= prev, "top-k accuracy decreased in k");
      if (k == 1) REQUIRE_OR_FAIL(topk == acc, "top-1 != accuracy");
      if (k == C) REQUIRE_OR_FAIL(topk == 1.0, "top-C != 1");
      prev = topk;
    }

    const auto confusion = metrics::confusion_matrix(preds, false);
    std::int64_t diag = 0;
    for (int c = 0; c < C; ++c) {
      diag += confusion.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    }
    REQUIRE_OR_FAIL(static_cast<double>(diag) / static_cast<double>(preds.size()) == acc,
                    "confusion diagonal sum / n != accuracy");

    // per-class one-vs-rest AUCs against the pair-counting oracle
    double macro_sum = 0.0;
    std::vector<int> pooled_pos;
    std::vector<double> pooled_score;
    for (int c = 0; c < C; ++c) {
      std::vector<int> is_pos;
      std::vector<double> score;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        is_pos.push_back(preds.true_labels[i] == c ? 1 : 0);
        score.push_back(preds.prob_matrix[i][static_cast<std::size_t>(c)]);
        pooled_pos.push_back(is_pos.back());
        pooled_score.push_back(score.back());
      }
      macro_sum += oracle::auc_pairs(is_pos, score);
    }
    const double macro = metrics::roc_auc(preds, metrics::AucAveraging::macro);
    const double micro = metrics::roc_auc(preds, metrics::AucAveraging::micro);
    REQUIRE_OR_FAIL(std::abs(macro - macro_sum / C) <= 1e-12, "macro AUC differs from oracle");
    REQUIRE_OR_FAIL(std::abs(micro - oracle::auc_pairs(pooled_pos, pooled_score)) <= 1e-12,
                    "micro AUC differs from oracle");
  }
}

// ---------------------------------------------------------------------------
// Criterion 5: exact Shapley axioms + permutation oracle

void criterion_shapley_oracle() {
  std::mt19937_64 rng(505);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + static_cast<int>(util::uniform_below(rng, 6));  // 3..8
    auto table = random_table(n, rng);

    // plant structure: players 0 and 1 symmetric, player n-1 a dummy
    const std::size_t bit0 = 1, bit1 = 2;
    const std::size_t bitd = std::size_t{1} << (n - 1);
    for (std::size_t mask = 0; mask < table.size(); ++mask) {
      const bool has0 = mask & bit0, has1 = mask & bit1;
      if (has0 != has1) {
        const std::size_t swapped = (mask & ~(bit0 | bit1)) | (has0 ? bit1 : bit0);
        const double mean = 0.5 * (table[mask] + table[swapped]);
        table[mask] = table[swapped] = mean;
      }
    }
    for (std::size_t mask = 0; mask < table.size(); ++mask) {
      if (mask & bitd) table[mask] = table[mask & ~bitd];
    }

    auto v = table_value_function(n, table);
    const auto attrs = explain::exact_shapley(v);

    double sum = 0.0;
    for (const auto& a : attrs) sum += a.value;
    REQUIRE_OR_FAIL(std::abs(sum - (table.back() - table.front())) <= 1e-12,
                    "efficiency residual above 1e-12");
    REQUIRE_OR_FAIL(std::abs(attrs[0].value - attrs[1].value) <= 1e-12,
                    "symmetric players received different values");
    REQUIRE_OR_FAIL(std::abs(attrs[static_cast<std::size_t>(n - 1)].value) <= 1e-12,
                    "dummy player received a nonzero value");

    const auto expected = oracle::shapley_permutations(n, [&](const std::vector<int>& s) {
      std::size_t mask = 0;
      for (int p : s) mask |= (std::size_t{1} << p);
      return table[mask];
    });
    for (int i = 0; i < n; ++i) {
      REQUIRE_OR_FAIL(
          std::abs(attrs[static_cast<std::size_t>(i)].value -
                   expected[static_cast<std::size_t>(i)]) <= 1e-9,
          "value differs from the permutation oracle by more than 1e-9");
    }
  }
}

// ---------------------------------------------------------------------------
// Criterion 6: partition-explainer quality gates

void criterion_partition_gates() {
  std::mt19937_64 rng(606);

  for (int trial = 0; trial < 20; ++trial) {  // efficiency on arbitrary games
    auto v = table_value_function(8, random_table(8, rng));
    const auto owen = explain::owen_values(v, explain::build_partition_tree(8));
    double sum = 0.0;
    for (const auto& a : owen) sum += a.value;
    REQUIRE_OR_FAIL(std::abs(sum - (v.full() - v.empty())) < 1e-9,
                    "efficiency residual >= 1e-9 at 8 tokens");
  }

  for (int trial = 0; trial < 20; ++trial) {  // exact agreement at two tokens
    auto v = table_value_function(2, random_table(2, rng));
    const auto owen = explain::owen_values(v, explain::build_partition_tree(2));
    const auto shap = explain::exact_shapley(v);
    for (int i = 0; i < 2; ++i) {
      REQUIRE_OR_FAIL(std::abs(owen[static_cast<std::size_t>(i)].value -
                               shap[static_cast<std::size_t>(i)].value) <= 1e-12,
                      "partition values differ from Shapley at 2 tokens");
    }
  }

  {  // exact on additive games
    std::vector<double> c;
    for (int i = 0; i < 9; ++i) c.push_back(4.0 * util::uniform_unit(rng) - 2.0);
    explain::ValueFunction v(
        [&] {
          std::vector<std::string> tokens;
          for (std::size_t i = 0; i < c.size(); ++i) tokens.push_back("tok" + std::to_string(i));
          return tokens;
        }(),
        0, [c](const std::vector<int>& s) {
          double total = 0.0;
          for (int p : s) total += c[static_cast<std::size_t>(p)];
          return total;
        });
    const auto owen =
        explain::owen_values(v, explain::build_partition_tree(static_cast<int>(c.size())));
    for (std::size_t i = 0; i < c.size(); ++i) {
      REQUIRE_OR_FAIL(std::abs(owen[i].value - c[i]) <= 1e-12,
                      "partition values not exact on an additive game");
    }
  }

  double total_rho = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto v = table_value_function(10, structured_table(10, rng));
    std::vector<double> shap, owen;
    for (const auto& a : explain::exact_shapley(v)) shap.push_back(a.value);
    for (const auto& a : explain::owen_values(v, explain::build_partition_tree(10))) {
      owen.push_back(a.value);
    }
    total_rho += oracle::spearman(shap, owen);
  }
  const double mean_rho = total_rho / 100.0;
  REQUIRE_OR_FAIL(mean_rho >= 0.9,
                  "mean Spearman vs exact Shapley " + fmt4(mean_rho) + " < 0.9");
}

// ---------------------------------------------------------------------------
// Criterion 7: attribution recovers the planted class vocabulary

void criterion_planted_attribution() {
  corpus::SynthSpec spec;
  spec.n_classes = 5;
  spec.docs_per_class.assign(5, 30);
  spec.vocab_per_class = 8;
  spec.shared_vocab = 12;
  spec.doc_length = 14;
  spec.seed = 4747;
  const auto ds = corpus::synth_corpus(spec);

  corpus::SplitSpec split;
  split.seed = 4747;
  const auto splits = corpus::stratified_split(ds, split);

  preprocess::PreprocessConfig pp;
  pp.ngram_max = 1;
  const auto result = run_tfidf_pipeline(splits, pp, {1e-3, 1e-2, 1e-1});
  REQUIRE_OR_FAIL(result.test_accuracy >= 0.9,
                  "pipeline too weak to ground the attribution check (accuracy " +
                      fmt4(result.test_accuracy) + ")");

  const featurize::TfidfFeaturizer featurizer(result.tfidf, preprocess::default_lexicon());
  auto in_signature = [&](const std::string& token, int class_idx) {
    const auto sig = corpus::synth_signature_vocab(class_idx, spec.vocab_per_class);
    return std::find(sig.begin(), sig.end(), token) != sig.end();
  };

  // global: the strongest token of every class comes from its planted vocabulary
  const auto global =
      explain::global_importance(result.model, featurizer, splits.test, /*per_class=*/true);
  for (int c = 0; c < static_cast<int>(global.class_names.size()); ++c) {
    const auto top = global.top_k(c, 1);
    REQUIRE_OR_FAIL(!top.empty() && in_signature(top[0].first, c),
                    "top global token '" + (top.empty() ? "" : top[0].first) +
                        "' of class " + global.class_names[static_cast<std::size_t>(c)] +
                        " is not in its planted vocabulary");
  }

  // local: correctly classified documents put a signature token on top
  int correct = 0, signature_top = 0;
  for (std::size_t i = 0; i < splits.test.documents.size(); ++i) {
    if (result.test_preds.predicted_labels[i] != result.test_preds.true_labels[i]) continue;
    ++correct;
    const auto attrs = explain::explain_document(result.model, featurizer,
                                                 splits.test.documents[i], std::nullopt);
    const auto best = std::max_element(
        attrs.begin(), attrs.end(),
        [](const auto& a, const auto& b) { return a.value < b.value; });
    if (in_signature(best->token, result.test_preds.predicted_labels[i])) ++signature_top;
  }
  REQUIRE_OR_FAIL(correct > 0, "no correctly classified test documents");
  const double frac = static_cast<double>(signature_top) / static_cast<double>(correct);
  REQUIRE_OR_FAIL(frac >= 0.9, "only " + fmt4(frac) +
                                   " of correct documents have a planted token on top");
}

// ---------------------------------------------------------------------------
// Criterion 8: stratified split proportionality + partition property

void criterion_stratification() {
  std::mt19937_64 rng(808);
  for (int trial = 0; trial < 100; ++trial) {
    const int C = 2 + static_cast<int>(util::uniform_below(rng, 7));  // 2..8
    std::vector<corpus::Document> docs;
    std::vector<std::int64_t> class_sizes(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
      const int size = 9 + static_cast<int>(util::uniform_below(rng, 192));  // 9..200
      class_sizes[static_cast<std::size_t>(c)] = size;
      for (int i = 0; i < size; ++i) {
        docs.push_back({"c" + std::to_string(c) + "d" + std::to_string(i), "text",
                        "class" + std::to_string(c)});
      }
    }
    const auto ds = corpus::make_dataset(std::move(docs));

    corpus::SplitSpec spec;
    spec.seed = rng();
    const auto splits = corpus::stratified_split(ds, spec);

    // three-way partition: every id in exactly one split
    std::map<std::string, int> seen;
    for (const auto& d : splits.train.documents) ++seen[d.id];
    for (const auto& d : splits.validation.documents) ++seen[d.id];
    for (const auto& d : splits.test.documents) ++seen[d.id];
    REQUIRE_OR_FAIL(seen.size() == ds.documents.size(), "splits lost or duplicated ids");
    for (const auto& [id, count] : seen) {
      REQUIRE_OR_FAIL(count == 1, "id '" + id + "' appears in more than one split");
    }

    auto count_class = [](const corpus::Dataset& d, const std::string& label) {
      std::int64_t n = 0;
      for (const auto& doc : d.documents) {
        if (doc.label == label) ++n;
      }
      return n;
    };
    for (int c = 0; c < C; ++c) {
      const std::string label = "class" + std::to_string(c);
      const auto n_total = class_sizes[static_cast<std::size_t>(c)];
      const auto n_test = count_class(splits.test, label);
      const auto n_val = count_class(splits.validation, label);
      const auto n_train = count_class(splits.train, label);
      REQUIRE_OR_FAIL(n_train >= 1 && n_val >= 1 && n_test >= 1,
                      "class " + label + " missing from a split");
      const double test_target = static_cast<double>(n_total) * spec.test_fraction;
      const double val_target =
          static_cast<double>(n_total - n_test) * spec.val_fraction_of_train;
      REQUIRE_OR_FAIL(std::abs(static_cast<double>(n_test) - test_target) <= 1.0,
                      "test count for " + label + " breaks the +-1 bound");
      REQUIRE_OR_FAIL(std::abs(static_cast<double>(n_val) - val_target) <= 1.0,
                      "validation count for " + label + " breaks the +-1 bound");
    }
  }
}

// ---------------------------------------------------------------------------
// Criterion 9: TF-IDF beats averaged random word vectors

void criterion_featurizer_ordering() {
  corpus::SynthSpec spec;
  spec.seed = 909;
  const auto ds = corpus::synth_corpus(spec);
  corpus::SplitSpec split;
  split.seed = 909;
  const auto splits = corpus::stratified_split(ds, split);

  const auto tfidf_result =
      run_tfidf_pipeline(splits, preprocess::PreprocessConfig{}, {1e-4, 1e-3, 1e-2, 1e-1, 1.0});

  // Random-but-fixed embedding table over the corpus vocabulary. 8 dimensions
  // keeps the averaging path genuinely lossy (at high dimension random vectors
  // are near-orthogonal and averaging becomes a lossless bag of words, which
  // would make this comparison vacuous: observed 1.00 vs 1.00 at dim 32,
  // 1.00 vs 0.74 at dim 8).
  const auto& lex = preprocess::default_lexicon();
  const auto light = preprocess::lowercase_only_config();
  featurize::EmbeddingTable table;
  table.dimension = 8;
  {
    std::mt19937_64 rng(909);
    std::set<std::string> vocab;
    for (const auto& doc : ds.documents) {
      for (const auto& tok :
           preprocess::apply_pipeline(preprocess::tokenize(doc.text), light, lex)) {
        vocab.insert(tok);
      }
    }
    for (const auto& word : vocab) {
      std::vector<double> vec(8);
      for (auto& x : vec) x = util::uniform_unit(rng) - 0.5;
      table.vectors.emplace(word, std::move(vec));
    }
  }

  auto dense_rows = [&](const corpus::Dataset& d) {
    std::vector<std::vector<double>> rows;
    for (const auto& doc : d.documents) {
      rows.push_back(featurize::average_embedding(
          preprocess::apply_pipeline(preprocess::tokenize(doc.text), light, lex), table));
    }
    return classify::dense_matrix(std::move(rows));
  };
  auto labels_of = [&](const corpus::Dataset& d) {
    std::vector<int> y;
    for (const auto& doc : d.documents) y.push_back(splits.train.label_index(doc.label));
    return y;
  };
  classify::TrainConfig tcfg;
  auto [w2v_model, report] =
      classify::train_logreg(dense_rows(splits.train), labels_of(splits.train),
                             dense_rows(splits.validation), labels_of(splits.validation),
                             splits.train.labels, tcfg);
  const auto X_test = dense_rows(splits.test);
  std::vector<std::vector<double>> prob_matrix;
  for (const auto& row : X_test.dense_rows) {
    prob_matrix.push_back(
        classify::predict_proba(w2v_model, std::span<const double>(row)).probabilities);
  }
  const double w2v_accuracy = metrics::accuracy(
      metrics::make_prediction_set(labels_of(splits.test), std::move(prob_matrix)));

  REQUIRE_OR_FAIL(tfidf_result.test_accuracy >= w2v_accuracy,
                  "tf-idf accuracy " + fmt4(tfidf_result.test_accuracy) +
                      " < word-vector-averaging accuracy " + fmt4(w2v_accuracy));
}

// ---------------------------------------------------------------------------
// Criterion 10: the CLI is byte-deterministic across reruns

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_OR_FAIL(in.good(), "missing output file " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void criterion_cli_determinism() {
  const char* cli = std::getenv("FUNDCAT_CLI");
  REQUIRE_OR_FAIL(cli != nullptr && *cli != '\0',
                  "FUNDCAT_CLI is not set to the CLI binary path");

  const fs::path root = fs::temp_directory_path() / "fundcat_acceptance";
  fs::remove_all(root);

  auto run_chain = [&](const std::string& name) {
    const fs::path dir = root / name;
    const fs::path out = dir / "out";
    fs::create_directories(out);

    nlohmann::ordered_json config;
    config["seed"] = 7;
    config["out_dir"] = out.string();
    config["dataset"] = (dir / "synth.jsonl").string();
    config["synth"] = {{"n_classes", 4}, {"docs_per_class", 30}, {"vocab_per_class", 10},
                       {"shared_vocab", 12},  {"doc_length", 16}};
    config["featurizer"] = {{"type", "tfidf"}};
    config["train"] = {{"lambda_grid", {0.001, 0.1}}};
    const fs::path config_path = dir / "run.json";
    std::ofstream(config_path) << config.dump(2) << '\n';

    auto cli_call = [&](const std::string& args) {
      const std::string cmd = std::string("\"") + cli + "\" --config \"" +
                              config_path.string() + "\" " + args + " >> \"" +
                              (dir / "log.txt").string() + "\" 2>&1";
      const int rc = std::system(cmd.c_str());
      const int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
      REQUIRE_OR_FAIL(code == 0, "`" + args + "` exited with code " + std::to_string(code));
    };
    cli_call("synth");
    cli_call("split");
    cli_call("train");
    cli_call("evaluate");

    std::ifstream test_file(out / "test.jsonl");
    std::string first_line;
    REQUIRE_OR_FAIL(static_cast<bool>(std::getline(test_file, first_line)),
                    "test split is empty");
    const std::string doc_id = nlohmann::json::parse(first_line).at("id").get<std::string>();
    cli_call("explain " + doc_id);
    cli_call("explain --global");

    std::string sanitized = doc_id;
    for (auto& ch : sanitized) {
      if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
    }
    return std::vector<std::string>{
        read_bytes(out / "model.json"),
        read_bytes(out / "grid_report.json"),
        read_bytes(out / "metrics.json"),
        read_bytes(out / "metrics.txt"),
        read_bytes(out / "confusion_counts.csv"),
        read_bytes(out / "confusion_normalized.csv"),
        read_bytes(out / ("explain_" + sanitized + ".json")),
        read_bytes(out / "global_importance.csv"),
        read_bytes(out / "global_importance.json"),
    };
  };

  const auto first = run_chain("a");
  const auto second = run_chain("b");
  static const char* kFileNames[] = {
      "model.json",       "grid_report.json",      "metrics.json",
      "metrics.txt",      "confusion_counts.csv",  "confusion_normalized.csv",
      "explanation json", "global_importance.csv", "global_importance.json"};
  for (std::size_t i = 0; i < first.size(); ++i) {
    REQUIRE_OR_FAIL(first[i] == second[i],
                    std::string(kFileNames[i]) + " differs between identical reruns");
  }
  fs::remove_all(root);
}

// ---------------------------------------------------------------------------

struct Criterion {
  std::string name;
  std::function<void()> check;
  double time_limit_s;  // 0 = no limit
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"tf-idf matches the brute-force oracle on random mini-corpora", criterion_tfidf_oracle, 1.0},
      {"analytic gradient matches central finite differences", criterion_gradient_check, 5.0},
      {"end-to-end synthetic pipeline reaches accuracy 0.95 / macro-F1 0.90",
       criterion_end_to_end, 30.0},
      {"metric identities and AUC pair-oracle hold on random prediction sets",
       criterion_metric_identities, 10.0},
      {"exact Shapley satisfies the axioms and the permutation oracle",
       criterion_shapley_oracle, 10.0},
      {"partition explainer: efficiency, exactness, rank agreement",
       criterion_partition_gates, 30.0},
      {"attribution recovers planted class vocabulary globally and locally",
       criterion_planted_attribution, 120.0},
      {"stratified splits keep the +-1 per-class bound and partition the data",
       criterion_stratification, 5.0},
      {"tf-idf features outperform averaged random word vectors",
       criterion_featurizer_ordering, 60.0},
      {"CLI train/evaluate/explain reruns are byte-identical", criterion_cli_determinism, 0.0},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& criterion = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    std::string reason;
    try {
      criterion.check();
    } catch (const Failure& f) {
      reason = f.reason;
    } catch (const std::exception& e) {
      reason = std::string("unexpected exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (reason.empty() && criterion.time_limit_s > 0.0 && elapsed > criterion.time_limit_s) {
      reason = "took " + fmt2(elapsed) + "s, limit " + fmt2(criterion.time_limit_s) + "s";
    }
    if (reason.empty()) {
      std::printf("PASS  %2zu/10  %s  (%.2fs)\n", i + 1, criterion.name.c_str(), elapsed);
    } else {
      std::printf("FAIL  %2zu/10  %s  (%.2fs): %s\n", i + 1, criterion.name.c_str(), elapsed,
                  reason.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures > 0) {
    std::printf("%d of 10 acceptance criteria failed\n", failures);
    return 1;
  }
  std::printf("all 10 acceptance criteria passed\n");
  return 0;
}
