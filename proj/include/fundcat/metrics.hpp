#pragma once

#include <cstdint>
#include <map>
#include <vector>

namespace fundcat::metrics {

/// True labels plus the n x C probability matrix; predicted labels are
/// derived by argmax with ties broken toward the lowest class index.
struct PredictionSet {
  std::vector<int> true_labels;
  std::vector<std::vector<double>> prob_matrix;
  std::vector<int> predicted_labels;

  std::size_t size() const { return true_labels.size(); }
  int n_classes() const {
    return prob_matrix.empty() ? 0 : static_cast<int>(prob_matrix.front().size());
  }
};

/// Validates shape, [0,1] range, and row sums (1 within 1e-6), then derives
/// predicted labels.
PredictionSet make_prediction_set(std::vector<int> true_labels,
                                  std::vector<std::vector<double>> prob_matrix);

double accuracy(const PredictionSet& preds);

/// Mean per-class recall over the classes present in true_labels.
double balanced_accuracy(const PredictionSet& preds);

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
  double weighted = 0.0;
};

/// One-vs-rest F1 per class; macro averages over all C classes (a class with
/// neither predictions nor actual positives contributes 0), weighted uses
/// support weights, micro pools TP/FP/FN across classes.
F1Scores f1_scores(const PredictionSet& preds);

/// Fraction of samples whose true class sits among the k highest
/// probabilities; equal scores at the boundary rank lower class indices
/// first.
double top_k_accuracy(const PredictionSet& preds, int k);

enum class AucAveraging { micro, macro };

/// One-vs-rest ROC-AUC via the midrank formulation (ties count 1/2).
/// macro = unweighted mean over classes (every class needs a positive and a
/// negative); micro = one AUC over the pooled n x C instance set.
double roc_auc(const PredictionSet& preds, AucAveraging averaging);

/// Support-weighted mean of per-class one-vs-rest AUCs; classes without
/// positives carry zero weight and are skipped.
double roc_auc_weighted(const PredictionSet& preds);

/// Mean pairwise AUC over ordered class pairs (i, j), each computed on the
/// samples labeled i or j with class-i probability as the score.
double roc_auc_ovo(const PredictionSet& preds);

struct ConfusionMatrix {
  std::vector<std::vector<std::int64_t>> counts;   // true x predicted
  std::vector<std::vector<double>> row_normalized; // empty unless requested
};

/// counts[i][j] = samples with true class i predicted as j; normalization
/// divides each row by its sum, leaving all-zero rows untouched.
ConfusionMatrix confusion_matrix(const PredictionSet& preds, bool normalize = true);

struct MetricsReport {
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double f1_micro = 0.0;
  double f1_macro = 0.0;
  double f1_weighted = 0.0;
  double auc_micro = 0.0;
  double auc_macro = 0.0;
  double auc_weighted = 0.0;
  std::map<int, double> top_k_accuracy;
};

/// Full evaluation suite; top-k runs over k = 1..min(max_top_k, C).
MetricsReport compute_metrics_report(const PredictionSet& preds, int max_top_k = 5);

}  // namespace fundcat::metrics
