#include <cmath>
#include <random>

#include "doctest.h"
#include "fundcat/classify.hpp"
#include "fundcat/corpus.hpp"
#include "fundcat/explain.hpp"
#include "fundcat/featurizer.hpp"
#include "fundcat/util.hpp"
#include "oracles.hpp"

using namespace fundcat;
using explain::ValueFunction;

namespace {

std::vector<std::string> numbered_tokens(int n) {
  std::vector<std::string> tokens;
  for (int i = 0; i < n; ++i) tokens.push_back("tok" + std::to_string(i));
  return tokens;
}

// Tabulated game over all subsets of n players; the table is indexed by the
// subset bitmask.
ValueFunction table_game(int n, std::vector<double> table) {
  return ValueFunction(
      numbered_tokens(n), 0,
      [table = std::move(table)](const std::vector<int>& s) {
        std::size_t mask = 0;
        for (int p : s) mask |= (std::size_t{1} << p);
        return table[mask];
      });
}

ValueFunction additive_game(const std::vector<double>& c) {
  return ValueFunction(numbered_tokens(static_cast<int>(c.size())), 0,
                       [c](const std::vector<int>& s) {
                         double v = 0;
                         for (int p : s) v += c[static_cast<std::size_t>(p)];
                         return v;
                       });
}

ValueFunction random_game(int n, std::mt19937_64& rng) {
  std::vector<double> table(std::size_t{1} << n);
  for (auto& v : table) v = 4.0 * util::uniform_unit(rng) - 2.0;
  return table_game(n, std::move(table));
}

// Random game with the structure attribution targets actually have: a
// dominant additive part, moderate pairwise interactions, mild three-way
// interactions, and a little idiosyncratic noise. (A table of i.i.d. values
// has no structure any polynomial-count evaluation scheme could recover, so
// approximation quality is only meaningful on games like these.)
ValueFunction structured_random_game(int n, std::mt19937_64& rng) {
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
  std::vector<double> t;  // triple weights, indexed i<j<k in lexicographic order
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = j + 1; k < n; ++k) {
        t.push_back(0.3 * util::uniform_unit(rng) - 0.15);
      }
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
  return table_game(n, std::move(table));
}

std::vector<double> values_of(const std::vector<explain::Attribution>& attrs) {
  std::vector<double> v;
  for (const auto& a : attrs) v.push_back(a.value);
  return v;
}

// Tiny trained pipeline shared by the integration-style cases.
struct Pipeline {
  classify::LogRegModel model;
  std::unique_ptr<featurize::Featurizer> featurizer;
};

Pipeline tiny_tfidf_pipeline() {
  corpus::SynthSpec spec;
  spec.n_classes = 3;
  spec.docs_per_class = {15, 15, 15};
  spec.vocab_per_class = 8;
  spec.shared_vocab = 12;
  spec.doc_length = 20;
  spec.seed = 41;
  const auto ds = corpus::synth_corpus(spec);

  auto lex = preprocess::default_lexicon();
  preprocess::PreprocessConfig pp;
  pp.ngram_max = 1;

  std::vector<preprocess::TokenSequence> seqs;
  std::vector<int> y;
  for (const auto& doc : ds.documents) {
    seqs.push_back(
        preprocess::apply_pipeline(preprocess::tokenize(doc.text), pp, lex));
    y.push_back(ds.label_index(doc.label));
  }
  featurize::TfidfModel tfidf{featurize::fit_vocabulary(seqs, 1, std::nullopt), pp};
  std::vector<featurize::SparseVector> rows;
  for (const auto& s : seqs) rows.push_back(featurize::tfidf_transform(s, tfidf));
  const auto X = classify::sparse_matrix(std::move(rows), tfidf.vocabulary.size());

  classify::TrainConfig tcfg;
  tcfg.lambda_grid = {0.001};
  auto [model, report] = classify::train_logreg(X, y, X, y, ds.labels, tcfg);

  Pipeline out;
  out.model = std::move(model);
  out.featurizer = std::make_unique<featurize::TfidfFeaturizer>(std::move(tfidf), lex);
  return out;
}

}  // namespace

TEST_SUITE("explain") {

TEST_CASE("value function caches and validates subsets") {
  int calls = 0;
  ValueFunction v(numbered_tokens(3), 0, [&calls](const std::vector<int>& s) {
    ++calls;
    return static_cast<double>(s.size());
  });
  CHECK(v({0, 2}) == 2.0);
  CHECK(v({0, 2}) == 2.0);
  CHECK(calls == 1);  // memoized
  CHECK(v.full() == 3.0);
  CHECK(v.empty() == 0.0);
  CHECK_THROWS_AS(v({2, 0}), std::invalid_argument);   // not sorted
  CHECK_THROWS_AS(v({0, 0}), std::invalid_argument);   // duplicate
  CHECK_THROWS_AS(v({3}), std::invalid_argument);      // out of range
}

TEST_CASE("exact shapley: frozen three-player table") {
  // v by subset: {}=0 {0}=1 {1}=2 {2}=3 {01}=4 {02}=5 {12}=6 {012}=7,
  // stored in bitmask order. Hand-averaged marginals over all six player
  // orderings give phi = (4/3, 7/3, 10/3).
  auto v = table_game(3, {0, 1, 2, 4, 3, 5, 6, 7});
  const auto attrs = explain::exact_shapley(v);
  REQUIRE(attrs.size() == 3);
  CHECK(attrs[0].value == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
  CHECK(attrs[1].value == doctest::Approx(7.0 / 3.0).epsilon(1e-14));
  CHECK(attrs[2].value == doctest::Approx(10.0 / 3.0).epsilon(1e-14));
  CHECK(attrs[0].token == "tok0");
  CHECK(attrs[0].position == 0);
}

TEST_CASE("exact shapley recovers additive games") {
  const std::vector<double> c{0.5, -1.25, 2.0, 0.0};
  auto v = additive_game(c);
  const auto attrs = explain::exact_shapley(v);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(attrs[i].value == doctest::Approx(c[i]).epsilon(1e-12));
  }
}

TEST_CASE("exact shapley satisfies the axioms on random games") {
  std::mt19937_64 rng(606);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(util::uniform_below(rng, 5));  // 2..6
    auto v = random_game(n, rng);
    const auto attrs = explain::exact_shapley(v);

    // efficiency
    double sum = 0;
    for (const auto& a : attrs) sum += a.value;
    CHECK(sum == doctest::Approx(v.full() - v.empty()).epsilon(1e-12));

    // permutation oracle
    const auto expect = oracle::shapley_permutations(
        n, [&v](const std::vector<int>& s) { return v(s); });
    for (int i = 0; i < n; ++i) {
      CHECK(attrs[static_cast<std::size_t>(i)].value ==
            doctest::Approx(expect[static_cast<std::size_t>(i)]).epsilon(1e-9));
    }
  }
}

TEST_CASE("exact shapley: dummy and symmetry axioms") {
  // dummy: player 2 never changes the value
  auto dummy = ValueFunction(numbered_tokens(3), 0, [](const std::vector<int>& s) {
    double v = 0;
    for (int p : s) {
      if (p == 0) v += 1.0;
      if (p == 1) v += 3.0;
    }
    return v;
  });
  const auto d = explain::exact_shapley(dummy);
  CHECK(std::abs(d[2].value) < 1e-12);

  // symmetry: players 0 and 1 are interchangeable
  auto sym = ValueFunction(numbered_tokens(3), 0, [](const std::vector<int>& s) {
    const bool has0 = std::find(s.begin(), s.end(), 0) != s.end();
    const bool has1 = std::find(s.begin(), s.end(), 1) != s.end();
    const bool has2 = std::find(s.begin(), s.end(), 2) != s.end();
    return (has0 ? 1.0 : 0.0) + (has1 ? 1.0 : 0.0) + (has0 && has1 ? 2.0 : 0.0) +
           (has2 ? 0.25 : 0.0);
  });
  const auto s = explain::exact_shapley(sym);
  CHECK(s[0].value == doctest::Approx(s[1].value).epsilon(1e-12));
}

TEST_CASE("exact shapley refuses oversized documents, naming the alternative") {
  auto v = ValueFunction(numbered_tokens(21), 0,
                         [](const std::vector<int>&) { return 0.0; });
  CHECK_THROWS_WITH_AS(explain::exact_shapley(v), doctest::Contains("owen"),
                       std::invalid_argument);
}

TEST_CASE("partition tree splits at the ceiling midpoint") {
  const auto one = explain::build_partition_tree(1);
  REQUIRE(one.nodes.size() == 1);
  CHECK(one.nodes[0].begin == 0);
  CHECK(one.nodes[0].end == 1);
  CHECK(one.nodes[0].left == -1);

  const auto four = explain::build_partition_tree(4);
  CHECK(four.nodes[0].begin == 0);
  CHECK(four.nodes[0].end == 4);
  const auto& l4 = four.nodes[static_cast<std::size_t>(four.nodes[0].left)];
  const auto& r4 = four.nodes[static_cast<std::size_t>(four.nodes[0].right)];
  CHECK(l4.end == 2);  // split at (0+4+1)/2 = 2
  CHECK(r4.begin == 2);

  const auto five = explain::build_partition_tree(5);
  const auto& l5 = five.nodes[static_cast<std::size_t>(five.nodes[0].left)];
  const auto& r5 = five.nodes[static_cast<std::size_t>(five.nodes[0].right)];
  CHECK(l5.end == 3);  // ceiling midpoint of [0,5)
  CHECK(r5.begin == 3);

  // every internal node's children tile its span
  for (const auto& node : five.nodes) {
    if (node.left < 0) {
      CHECK(node.end - node.begin == 1);
      continue;
    }
    const auto& l = five.nodes[static_cast<std::size_t>(node.left)];
    const auto& r = five.nodes[static_cast<std::size_t>(node.right)];
    CHECK(l.begin == node.begin);
    CHECK(l.end == r.begin);
    CHECK(r.end == node.end);
  }
  CHECK_THROWS_AS(explain::build_partition_tree(0), std::invalid_argument);
}

TEST_CASE("owen values equal exact shapley for two tokens") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    auto v = random_game(2, rng);
    const auto shap = explain::exact_shapley(v);
    const auto owen = explain::owen_values(v, explain::build_partition_tree(2));
    for (int i = 0; i < 2; ++i) {
      CHECK(owen[static_cast<std::size_t>(i)].value ==
            doctest::Approx(shap[static_cast<std::size_t>(i)].value).epsilon(1e-12));
    }
  }
}

TEST_CASE("owen values are exact on additive games regardless of size") {
  const std::vector<double> c{1.0, -2.0, 0.5, 0.25, -0.125, 3.0, 0.0};
  auto v = additive_game(c);
  const auto owen =
      explain::owen_values(v, explain::build_partition_tree(static_cast<int>(c.size())));
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(owen[i].value == doctest::Approx(c[i]).epsilon(1e-12));
  }
}

TEST_CASE("owen values satisfy efficiency and dummy on random games") {
  std::mt19937_64 rng(4096);
  for (int trial = 0; trial < 15; ++trial) {
    auto v = random_game(8, rng);
    const auto owen = explain::owen_values(v, explain::build_partition_tree(8));
    double sum = 0;
    for (const auto& a : owen) sum += a.value;
    CHECK(sum == doctest::Approx(v.full() - v.empty()).epsilon(1e-9));
  }

  // dummy token gets zero from the partition scheme too
  auto dummy = ValueFunction(numbered_tokens(5), 0, [](const std::vector<int>& s) {
    double v = 0;
    for (int p : s) v += (p == 3) ? 0.0 : static_cast<double>(p + 1);
    return v;
  });
  const auto owen = explain::owen_values(dummy, explain::build_partition_tree(5));
  CHECK(std::abs(owen[3].value) < 1e-12);
}

TEST_CASE("owen values rank-correlate with exact shapley") {
  std::mt19937_64 rng(10101);
  double total_rho = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    auto v = structured_random_game(10, rng);
    const auto shap = values_of(explain::exact_shapley(v));
    const auto owen =
        values_of(explain::owen_values(v, explain::build_partition_tree(10)));
    total_rho += oracle::spearman(shap, owen);
  }
  CHECK(total_rho / trials >= 0.9);
}

TEST_CASE("owen uses far fewer evaluations than exhaustive enumeration") {
  std::mt19937_64 rng(55);
  auto v = random_game(16, rng);
  explain::owen_values(v, explain::build_partition_tree(16));
  CHECK(v.evaluations() < 2000);  // 2^16 = 65536 would be exhaustive
}

TEST_CASE("model-backed value function matches direct model evaluation") {
  auto pipe = tiny_tfidf_pipeline();
  const auto sig = corpus::synth_signature_vocab(0, 8);
  const std::vector<std::string> tokens{sig[0], "filaaa", sig[1], "zzzoov"};
  auto v = explain::make_value_function(pipe.model, *pipe.featurizer, tokens, 0);

  // v(full) equals log-odds of the model on the full document
  const auto f = pipe.featurizer->transform(tokens);
  CHECK(v.full() ==
        doctest::Approx(classify::log_odds(pipe.model, f.sparse, 0)).epsilon(1e-12));

  // v(empty) is the bias-only prediction for an empty sparse vector
  const featurize::SparseVector empty_vec{pipe.featurizer->dimension(), {}};
  CHECK(v.empty() ==
        doctest::Approx(classify::log_odds(pipe.model, empty_vec, 0)).epsilon(1e-12));

  // removing an out-of-vocabulary token does not change v
  CHECK(v({0, 1, 2, 3}) == doctest::Approx(v({0, 1, 2})).epsilon(1e-12));

  // target class out of range is rejected
  CHECK_THROWS_AS(
      explain::make_value_function(pipe.model, *pipe.featurizer, tokens, 3),
      std::invalid_argument);
}

TEST_CASE("explain_document: single-token documents and efficiency") {
  auto pipe = tiny_tfidf_pipeline();
  const auto sig = corpus::synth_signature_vocab(1, 8);

  corpus::Document single{"s1", sig[0], corpus::synth_class_label(1)};
  const auto attrs = explain::explain_document(pipe.model, *pipe.featurizer, single);
  REQUIRE(attrs.size() == 1);
  auto v = explain::make_value_function(pipe.model, *pipe.featurizer, {sig[0]},
                                        attrs[0].target_class);
  CHECK(attrs[0].value == doctest::Approx(v({0}) - v.empty()).epsilon(1e-12));

  // multi-token: attributions sum to v(F) - v(empty)
  corpus::Document multi{"m1", sig[0] + " " + sig[1] + " filaaa " + sig[2],
                         corpus::synth_class_label(1)};
  const auto multi_attrs =
      explain::explain_document(pipe.model, *pipe.featurizer, multi);
  double sum = 0;
  for (const auto& a : multi_attrs) sum += a.value;
  auto vm = explain::make_value_function(
      pipe.model, *pipe.featurizer,
      preprocess::tokenize(multi.text), multi_attrs[0].target_class);
  CHECK(sum == doctest::Approx(vm.full() - vm.empty()).epsilon(1e-9));
}

TEST_CASE("explain_document honors the named target class") {
  auto pipe = tiny_tfidf_pipeline();
  const auto sig = corpus::synth_signature_vocab(2, 8);
  corpus::Document doc{"t1", sig[0] + " " + sig[1], corpus::synth_class_label(2)};

  const auto by_name = explain::explain_document(
      pipe.model, *pipe.featurizer, doc, pipe.model.class_names[0]);
  CHECK(by_name[0].target_class == 0);

  CHECK_THROWS_AS(explain::explain_document(pipe.model, *pipe.featurizer, doc,
                                            std::string("no-such-class")),
                  std::invalid_argument);

  corpus::Document empty_doc{"e1", "...", corpus::synth_class_label(2)};
  CHECK_THROWS_WITH_AS(
      explain::explain_document(pipe.model, *pipe.featurizer, empty_doc),
      doctest::Contains("e1"), std::runtime_error);
}

TEST_CASE("explain_document switches to partition mode for long documents") {
  auto pipe = tiny_tfidf_pipeline();
  const auto sig = corpus::synth_signature_vocab(0, 8);
  std::string text;
  for (int i = 0; i < 14; ++i) {  // above the 12-token exact cutoff
    if (i) text += " ";
    text += sig[static_cast<std::size_t>(i % 4)];
  }
  corpus::Document doc{"long1", text, corpus::synth_class_label(0)};
  const auto attrs = explain::explain_document(pipe.model, *pipe.featurizer, doc);
  CHECK(attrs.size() == 14);
  double sum = 0;
  for (const auto& a : attrs) sum += a.value;
  auto v = explain::make_value_function(pipe.model, *pipe.featurizer,
                                        preprocess::tokenize(text),
                                        attrs[0].target_class);
  CHECK(sum == doctest::Approx(v.full() - v.empty()).epsilon(1e-9));
}

TEST_CASE("global importance of one document equals its attributions") {
  auto pipe = tiny_tfidf_pipeline();
  const auto sig = corpus::synth_signature_vocab(0, 8);
  corpus::Document doc{"g1", sig[0] + " filaaa " + sig[1],
                       corpus::synth_class_label(0)};
  corpus::Dataset ds = corpus::make_dataset({doc});

  const auto g = explain::global_importance(pipe.model, *pipe.featurizer, ds, false);
  const auto attrs = explain::explain_document(pipe.model, *pipe.featurizer, doc);
  const int target = attrs[0].target_class;
  for (const auto& a : attrs) {
    CHECK(g.sums[static_cast<std::size_t>(target)].at(a.token) ==
          doctest::Approx(a.value).epsilon(1e-12));
  }

  // top_k sorts by value descending
  const auto top = g.top_k(target, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].second >= top[1].second);
}

TEST_CASE("global importance recovers planted signature vocabulary") {
  auto pipe = tiny_tfidf_pipeline();
  corpus::SynthSpec spec;
  spec.n_classes = 3;
  spec.docs_per_class = {6, 6, 6};
  spec.vocab_per_class = 8;
  spec.shared_vocab = 12;
  spec.doc_length = 10;
  spec.seed = 99;  // different draw than training, same vocabulary
  const auto ds = corpus::synth_corpus(spec);

  const auto g = explain::global_importance(pipe.model, *pipe.featurizer, ds, true);
  REQUIRE(g.class_names.size() == 3);
  for (int c = 0; c < 3; ++c) {
    const auto sig = corpus::synth_signature_vocab(c, 8);
    const std::set<std::string> sig_set(sig.begin(), sig.end());
    const auto top = g.top_k(c, 1);
    REQUIRE(!top.empty());
    CHECK(sig_set.count(top[0].first) == 1);
  }
}

}  // TEST_SUITE
