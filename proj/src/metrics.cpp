#include "fundcat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace fundcat::metrics {

PredictionSet make_prediction_set(std::vector<int> true_labels,
                                  std::vector<std::vector<double>> prob_matrix) {
  if (true_labels.empty()) {
    throw std::invalid_argument("make_prediction_set: empty input");
  }
  if (true_labels.size() != prob_matrix.size()) {
    throw std::invalid_argument("make_prediction_set: labels/rows mismatch");
  }
  const std::size_t C = prob_matrix.front().size();
  if (C < 2) throw std::invalid_argument("make_prediction_set: need at least 2 classes");

  PredictionSet p;
  p.predicted_labels.reserve(true_labels.size());
  for (std::size_t i = 0; i < prob_matrix.size(); ++i) {
    const auto& row = prob_matrix[i];
    if (row.size() != C) throw std::invalid_argument("make_prediction_set: ragged rows");
    double sum = 0.0;
    for (double v : row) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("make_prediction_set: probability outside [0,1] at row " +
                                    std::to_string(i));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument("make_prediction_set: row " + std::to_string(i) +
                                  " sums to " + std::to_string(sum));
    }
    if (true_labels[i] < 0 || true_labels[i] >= static_cast<int>(C)) {
      throw std::invalid_argument("make_prediction_set: label out of range at row " +
                                  std::to_string(i));
    }
    int arg = 0;
    for (int c = 1; c < static_cast<int>(C); ++c) {
      if (row[static_cast<std::size_t>(c)] > row[static_cast<std::size_t>(arg)]) arg = c;
    }
    p.predicted_labels.push_back(arg);
  }
  p.true_labels = std::move(true_labels);
  p.prob_matrix = std::move(prob_matrix);
  return p;
}

double accuracy(const PredictionSet& preds) {
  if (preds.size() == 0) throw std::invalid_argument("accuracy: empty input");
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds.true_labels[i] == preds.predicted_labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double balanced_accuracy(const PredictionSet& preds) {
  if (preds.size() == 0) throw std::invalid_argument("balanced_accuracy: empty input");
  const int C = preds.n_classes();
  std::vector<std::int64_t> support(static_cast<std::size_t>(C), 0);
  std::vector<std::int64_t> hits(static_cast<std::size_t>(C), 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int t = preds.true_labels[i];
    ++support[static_cast<std::size_t>(t)];
    if (preds.predicted_labels[i] == t) ++hits[static_cast<std::size_t>(t)];
  }
  double recall_sum = 0.0;
  int present = 0;
  for (int c = 0; c < C; ++c) {
    if (support[static_cast<std::size_t>(c)] == 0) continue;
    recall_sum += static_cast<double>(hits[static_cast<std::size_t>(c)]) /
                  static_cast<double>(support[static_cast<std::size_t>(c)]);
    ++present;
  }
  return recall_sum / static_cast<double>(present);
}

F1Scores f1_scores(const PredictionSet& preds) {
  if (preds.size() == 0) throw std::invalid_argument("f1_scores: empty input");
  const int C = preds.n_classes();
  std::vector<std::int64_t> tp(static_cast<std::size_t>(C), 0);
  std::vector<std::int64_t> fp(static_cast<std::size_t>(C), 0);
  std::vector<std::int64_t> fn(static_cast<std::size_t>(C), 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int t = preds.true_labels[i];
    const int p = preds.predicted_labels[i];
    if (t == p) {
      ++tp[static_cast<std::size_t>(t)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(t)];
    }
  }

  F1Scores out;
  std::int64_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
  double macro_sum = 0.0, weighted_sum = 0.0;
  for (int c = 0; c < C; ++c) {
    const auto i = static_cast<std::size_t>(c);
    tp_sum += tp[i];
    fp_sum += fp[i];
    fn_sum += fn[i];
    const double denom = static_cast<double>(2 * tp[i] + fp[i] + fn[i]);
    const double f1 = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp[i]) / denom;
    macro_sum += f1;
    weighted_sum += f1 * static_cast<double>(tp[i] + fn[i]);
  }
  const double micro_denom = static_cast<double>(2 * tp_sum + fp_sum + fn_sum);
  out.micro = micro_denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp_sum) / micro_denom;
  out.macro = macro_sum / static_cast<double>(C);
  out.weighted = weighted_sum / static_cast<double>(preds.size());
  return out;
}

double top_k_accuracy(const PredictionSet& preds, int k) {
  if (preds.size() == 0) throw std::invalid_argument("top_k_accuracy: empty input");
  const int C = preds.n_classes();
  if (k < 1 || k > C) throw std::invalid_argument("top_k_accuracy: k out of range");

  std::int64_t hits = 0;
  std::vector<int> order(static_cast<std::size_t>(C));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& row = preds.prob_matrix[i];
    std::iota(order.begin(), order.end(), 0);
    // Probability descending, class index ascending on ties: the document's
    // true class must beat equal-scored higher-index classes to count.
    std::sort(order.begin(), order.end(), [&row](int a, int b) {
      if (row[static_cast<std::size_t>(a)] != row[static_cast<std::size_t>(b)]) {
        return row[static_cast<std::size_t>(a)] > row[static_cast<std::size_t>(b)];
      }
      return a < b;
    });
    for (int j = 0; j < k; ++j) {
      if (order[static_cast<std::size_t>(j)] == preds.true_labels[i]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

namespace {

// Binary AUC over (score, is_positive) instances with midranks for ties:
// AUC = (R_pos - n_pos(n_pos+1)/2) / (n_pos * n_neg).
double binary_auc_midrank(std::vector<std::pair<double, bool>>& instances) {
  std::sort(instances.begin(), instances.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const std::size_t n = instances.size();
  double pos_rank_sum = 0.0;
  std::int64_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && instances[j].first == instances[i].first) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (instances[t].second) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::int64_t n_neg = static_cast<std::int64_t>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("roc_auc: degenerate instance set");
  }
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double class_auc(const PredictionSet& preds, int c) {
  std::vector<std::pair<double, bool>> instances;
  instances.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    instances.emplace_back(preds.prob_matrix[i][static_cast<std::size_t>(c)],
                           preds.true_labels[i] == c);
  }
  return binary_auc_midrank(instances);
}

}  // namespace

double roc_auc(const PredictionSet& preds, AucAveraging averaging) {
  if (preds.size() == 0) throw std::invalid_argument("roc_auc: empty input");
  const int C = preds.n_classes();

  if (averaging == AucAveraging::micro) {
    std::vector<std::pair<double, bool>> pooled;
    pooled.reserve(preds.size() * static_cast<std::size_t>(C));
    for (std::size_t i = 0; i < preds.size(); ++i) {
      for (int c = 0; c < C; ++c) {
        pooled.emplace_back(preds.prob_matrix[i][static_cast<std::size_t>(c)],
                            preds.true_labels[i] == c);
      }
    }
    return binary_auc_midrank(pooled);
  }

  std::vector<std::int64_t> support(static_cast<std::size_t>(C), 0);
  for (int t : preds.true_labels) ++support[static_cast<std::size_t>(t)];
  double sum = 0.0;
  for (int c = 0; c < C; ++c) {
    const auto s = support[static_cast<std::size_t>(c)];
    if (s == 0 || s == static_cast<std::int64_t>(preds.size())) {
      throw std::invalid_argument("roc_auc: class " + std::to_string(c) +
                                  " lacks positives or negatives");
    }
    sum += class_auc(preds, c);
  }
  return sum / static_cast<double>(C);
}

double roc_auc_weighted(const PredictionSet& preds) {
  if (preds.size() == 0) throw std::invalid_argument("roc_auc_weighted: empty input");
  const int C = preds.n_classes();
  std::vector<std::int64_t> support(static_cast<std::size_t>(C), 0);
  for (int t : preds.true_labels) ++support[static_cast<std::size_t>(t)];

  double sum = 0.0;
  for (int c = 0; c < C; ++c) {
    const auto s = support[static_cast<std::size_t>(c)];
    if (s == 0) continue;  // zero weight
    if (s == static_cast<std::int64_t>(preds.size())) {
      throw std::invalid_argument("roc_auc_weighted: class " + std::to_string(c) +
                                  " has no negatives");
    }
    sum += class_auc(preds, c) * static_cast<double>(s);
  }
  return sum / static_cast<double>(preds.size());
}

double roc_auc_ovo(const PredictionSet& preds) {
  if (preds.size() == 0) throw std::invalid_argument("roc_auc_ovo: empty input");
  const int C = preds.n_classes();
  std::set<int> present(preds.true_labels.begin(), preds.true_labels.end());
  if (present.size() < 2) {
    throw std::invalid_argument("roc_auc_ovo: need at least 2 classes present");
  }

  double sum = 0.0;
  std::int64_t pairs = 0;
  for (int i = 0; i < C; ++i) {
    if (!present.count(i)) continue;
    for (int j = 0; j < C; ++j) {
      if (j == i || !present.count(j)) continue;
      std::vector<std::pair<double, bool>> instances;
      for (std::size_t t = 0; t < preds.size(); ++t) {
        const int label = preds.true_labels[t];
        if (label != i && label != j) continue;
        instances.emplace_back(preds.prob_matrix[t][static_cast<std::size_t>(i)],
                               label == i);
      }
      sum += binary_auc_midrank(instances);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

ConfusionMatrix confusion_matrix(const PredictionSet& preds, bool normalize) {
  if (preds.size() == 0) throw std::invalid_argument("confusion_matrix: empty input");
  const int C = preds.n_classes();
  ConfusionMatrix m;
  m.counts.assign(static_cast<std::size_t>(C),
                  std::vector<std::int64_t>(static_cast<std::size_t>(C), 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ++m.counts[static_cast<std::size_t>(preds.true_labels[i])]
               [static_cast<std::size_t>(preds.predicted_labels[i])];
  }
  if (normalize) {
    m.row_normalized.assign(static_cast<std::size_t>(C),
                            std::vector<double>(static_cast<std::size_t>(C), 0.0));
    for (int r = 0; r < C; ++r) {
      const auto i = static_cast<std::size_t>(r);
      const std::int64_t row_sum = std::accumulate(m.counts[i].begin(), m.counts[i].end(),
                                                   static_cast<std::int64_t>(0));
      if (row_sum == 0) continue;
      for (int c = 0; c < C; ++c) {
        m.row_normalized[i][static_cast<std::size_t>(c)] =
            static_cast<double>(m.counts[i][static_cast<std::size_t>(c)]) /
            static_cast<double>(row_sum);
      }
    }
  }
  return m;
}

MetricsReport compute_metrics_report(const PredictionSet& preds, int max_top_k) {
  MetricsReport r;
  r.accuracy = accuracy(preds);
  r.balanced_accuracy = balanced_accuracy(preds);
  const F1Scores f1 = f1_scores(preds);
  r.f1_micro = f1.micro;
  r.f1_macro = f1.macro;
  r.f1_weighted = f1.weighted;
  r.auc_micro = roc_auc(preds, AucAveraging::micro);
  r.auc_macro = roc_auc(preds, AucAveraging::macro);
  r.auc_weighted = roc_auc_weighted(preds);
  const int k_max = std::min(max_top_k, preds.n_classes());
  for (int k = 1; k <= k_max; ++k) {
    r.top_k_accuracy[k] = top_k_accuracy(preds, k);
  }
  return r;
}

}  // namespace fundcat::metrics
