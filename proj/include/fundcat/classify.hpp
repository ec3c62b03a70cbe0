#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fundcat/featurize.hpp"

namespace fundcat::classify {

using featurize::SparseVector;

/// Row-oriented feature matrix holding either dense rows or sparse rows.
/// Both paths follow the same numeric contract (index-ordered accumulation),
/// so a vector gives identical predictions in either representation.
struct FeatureMatrix {
  int dimension = 0;
  bool is_sparse = false;
  std::vector<std::vector<double>> dense_rows;
  std::vector<SparseVector> sparse_rows;

  std::size_t n_rows() const {
    return is_sparse ? sparse_rows.size() : dense_rows.size();
  }
};

FeatureMatrix dense_matrix(std::vector<std::vector<double>> rows);
FeatureMatrix sparse_matrix(std::vector<SparseVector> rows, int dimension);

struct LogRegModel {
  std::vector<std::string> class_names;  // canonical (sorted-label) order
  int feature_dimension = 0;
  std::vector<double> weights;           // row-major, C x D
  std::vector<double> bias;              // length C
  double lambda = 0.0;                   // penalty the model was trained with

  int n_classes() const { return static_cast<int>(class_names.size()); }
};

struct TrainConfig {
  std::vector<double> lambda_grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  std::uint64_t seed = 0;  // interface uniformity; the convex fit ignores it
};

struct ProbVector {
  std::vector<double> probabilities;
};

/// Max-shifted softmax: p_c = exp(z_c - max z) / sum_j exp(z_j - max z).
ProbVector softmax(const std::vector<double>& logits);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad_weights;  // row-major C x D
  std::vector<double> grad_bias;     // length C
};

/// loss = mean_i -log p_{y_i} + (lambda/2) * ||weights||_F^2; the bias is
/// not regularized. The gradient is exact for this loss.
LossGrad loss_and_gradient(const LogRegModel& model,
                           const FeatureMatrix& X,
                           const std::vector<int>& y,
                           double lambda);

struct GridSearchEntry {
  double lambda = 0.0;
  double validation_score = 0.0;  // micro-F1 == accuracy for one-label-per-doc
  double final_loss = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct GridSearchReport {
  std::vector<GridSearchEntry> entries;  // grid order
  double selected_lambda = 0.0;
};

/// For each lambda in the (ascending) grid, fits from zero initialization
/// with a deterministic batch L-BFGS until the gradient norm drops below
/// tolerance or max_iterations is hit; selects the lambda maximizing
/// validation micro-F1, ties resolved toward the larger lambda.
std::pair<LogRegModel, GridSearchReport> train_logreg(
    const FeatureMatrix& X_train, const std::vector<int>& y_train,
    const FeatureMatrix& X_val, const std::vector<int>& y_val,
    const std::vector<std::string>& class_names, const TrainConfig& cfg);

ProbVector predict_proba(const LogRegModel& model, std::span<const double> x);
ProbVector predict_proba(const LogRegModel& model, const SparseVector& x);

/// Argmax of predict_proba; ties break toward the lowest class index.
int predict(const LogRegModel& model, std::span<const double> x);
int predict(const LogRegModel& model, const SparseVector& x);
int argmax_class(const ProbVector& p);

/// ln(p_c / (1 - p_c)) with p clamped to [1e-12, 1 - 1e-12].
double log_odds(const ProbVector& p, int c);
double log_odds(const LogRegModel& model, std::span<const double> x, int c);
double log_odds(const LogRegModel& model, const SparseVector& x, int c);

}  // namespace fundcat::classify
