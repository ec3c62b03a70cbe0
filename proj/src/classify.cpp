#include "fundcat/classify.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <stdexcept>

#include "fundcat/util.hpp"

namespace fundcat::classify {

FeatureMatrix dense_matrix(std::vector<std::vector<double>> rows) {
  FeatureMatrix m;
  m.is_sparse = false;
  if (!rows.empty()) {
    m.dimension = static_cast<int>(rows.front().size());
    for (const auto& r : rows) {
      if (static_cast<int>(r.size()) != m.dimension) {
        throw std::invalid_argument("dense_matrix: ragged rows");
      }
    }
  }
  m.dense_rows = std::move(rows);
  return m;
}

FeatureMatrix sparse_matrix(std::vector<SparseVector> rows, int dimension) {
  FeatureMatrix m;
  m.is_sparse = true;
  m.dimension = dimension;
  for (const auto& r : rows) {
    if (r.dimension != dimension) {
      throw std::invalid_argument("sparse_matrix: row dimension mismatch");
    }
  }
  m.sparse_rows = std::move(rows);
  return m;
}

ProbVector softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
  const double zmax = *std::max_element(logits.begin(), logits.end());
  ProbVector p;
  p.probabilities.resize(logits.size());
  double total = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    p.probabilities[c] = std::exp(logits[c] - zmax);
    total += p.probabilities[c];
  }
  for (auto& v : p.probabilities) v /= total;
  return p;
}

namespace {

// Logits for one row, accumulated in feature-index order so sparse and dense
// representations of the same vector agree bit for bit.
void row_logits(const LogRegModel& model, const FeatureMatrix& X, std::size_t i,
                std::vector<double>& z) {
  const int C = model.n_classes();
  const int D = model.feature_dimension;
  z.assign(static_cast<std::size_t>(C), 0.0);
  if (X.is_sparse) {
    const auto& row = X.sparse_rows[i];
    for (int c = 0; c < C; ++c) {
      const double* w = model.weights.data() + static_cast<std::size_t>(c) * D;
      double acc = model.bias[static_cast<std::size_t>(c)];
      for (const auto& [idx, val] : row.entries) acc += w[idx] * val;
      z[static_cast<std::size_t>(c)] = acc;
    }
  } else {
    const auto& row = X.dense_rows[i];
    for (int c = 0; c < C; ++c) {
      const double* w = model.weights.data() + static_cast<std::size_t>(c) * D;
      double acc = model.bias[static_cast<std::size_t>(c)];
      for (int d = 0; d < D; ++d) acc += w[d] * row[static_cast<std::size_t>(d)];
      z[static_cast<std::size_t>(c)] = acc;
    }
  }
}

std::vector<double> logits_for(const LogRegModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.feature_dimension) {
    throw std::invalid_argument("predict: feature dimension mismatch");
  }
  const int C = model.n_classes();
  const int D = model.feature_dimension;
  std::vector<double> z(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) {
    const double* w = model.weights.data() + static_cast<std::size_t>(c) * D;
    double acc = model.bias[static_cast<std::size_t>(c)];
    for (int d = 0; d < D; ++d) acc += w[d] * x[static_cast<std::size_t>(d)];
    z[static_cast<std::size_t>(c)] = acc;
  }
  return z;
}

std::vector<double> logits_for(const LogRegModel& model, const SparseVector& x) {
  if (x.dimension != model.feature_dimension) {
    throw std::invalid_argument("predict: feature dimension mismatch");
  }
  const int C = model.n_classes();
  const int D = model.feature_dimension;
  std::vector<double> z(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) {
    const double* w = model.weights.data() + static_cast<std::size_t>(c) * D;
    double acc = model.bias[static_cast<std::size_t>(c)];
    for (const auto& [idx, val] : x.entries) acc += w[idx] * val;
    z[static_cast<std::size_t>(c)] = acc;
  }
  return z;
}

}  // namespace

LossGrad loss_and_gradient(const LogRegModel& model,
                           const FeatureMatrix& X,
                           const std::vector<int>& y,
                           double lambda) {
  const int C = model.n_classes();
  const int D = model.feature_dimension;
  const std::size_t n = X.n_rows();
  if (n == 0) throw std::invalid_argument("loss_and_gradient: empty matrix");
  if (y.size() != n) throw std::invalid_argument("loss_and_gradient: labels/rows mismatch");
  if (X.dimension != D) throw std::invalid_argument("loss_and_gradient: dimension mismatch");
  if (lambda < 0.0) throw std::invalid_argument("loss_and_gradient: negative lambda");

  LossGrad out;
  out.grad_weights.assign(static_cast<std::size_t>(C) * D, 0.0);
  out.grad_bias.assign(static_cast<std::size_t>(C), 0.0);

  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> z;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] < 0 || y[i] >= C) {
      throw std::invalid_argument("loss_and_gradient: label out of range");
    }
    row_logits(model, X, i, z);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum_exp = 0.0;
    for (double v : z) sum_exp += std::exp(v - zmax);
    const double lse = zmax + std::log(sum_exp);
    out.loss += (lse - z[static_cast<std::size_t>(y[i])]) * inv_n;

    for (int c = 0; c < C; ++c) {
      const double p = std::exp(z[static_cast<std::size_t>(c)] - lse);
      const double coef = (p - (c == y[i] ? 1.0 : 0.0)) * inv_n;
      out.grad_bias[static_cast<std::size_t>(c)] += coef;
      double* gw = out.grad_weights.data() + static_cast<std::size_t>(c) * D;
      if (X.is_sparse) {
        for (const auto& [idx, val] : X.sparse_rows[i].entries) gw[idx] += coef * val;
      } else {
        const auto& row = X.dense_rows[i];
        for (int d = 0; d < D; ++d) gw[d] += coef * row[static_cast<std::size_t>(d)];
      }
    }
  }

  if (lambda > 0.0) {
    double sq = 0.0;
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
      sq += model.weights[k] * model.weights[k];
      out.grad_weights[k] += lambda * model.weights[k];
    }
    out.loss += 0.5 * lambda * sq;
  }

  if (!std::isfinite(out.loss)) {
    throw NumericError("loss_and_gradient: non-finite loss");
  }
  return out;
}

namespace {

struct FlatProblem {
  const FeatureMatrix& X;
  const std::vector<int>& y;
  double lambda;
  int C;
  int D;

  std::size_t n_params() const {
    return static_cast<std::size_t>(C) * D + static_cast<std::size_t>(C);
  }

  // theta = [weights row-major | bias]
  double eval(const std::vector<double>& theta, std::vector<double>& grad,
              const std::vector<std::string>& class_names) const {
    LogRegModel m;
    m.class_names = class_names;
    m.feature_dimension = D;
    m.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(C) * D);
    m.bias.assign(theta.begin() + static_cast<std::ptrdiff_t>(C) * D, theta.end());
    LossGrad lg = loss_and_gradient(m, X, y, lambda);
    grad.resize(n_params());
    std::copy(lg.grad_weights.begin(), lg.grad_weights.end(), grad.begin());
    std::copy(lg.grad_bias.begin(), lg.grad_bias.end(),
              grad.begin() + static_cast<std::ptrdiff_t>(C) * D);
    return lg.loss;
  }
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

struct FitResult {
  std::vector<double> theta;
  double loss = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Deterministic batch L-BFGS (history 10) with Armijo backtracking. The loss
// is convex, so zero initialization reaches the global optimum.
FitResult lbfgs_fit(const FlatProblem& prob, const std::vector<std::string>& class_names,
                    int max_iterations, double tolerance) {
  constexpr int kHistory = 10;
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 50;

  FitResult res;
  res.theta.assign(prob.n_params(), 0.0);

  std::vector<double> grad;
  double loss = prob.eval(res.theta, grad, class_names);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int iter = 0; iter < max_iterations; ++iter) {
    const double gnorm = norm2(grad);
    if (!std::isfinite(gnorm)) {
      throw NumericError("logreg: non-finite gradient at iteration " +
                               std::to_string(iter));
    }
    if (gnorm < tolerance) {
      res.converged = true;
      break;
    }

    // Two-loop recursion for the search direction.
    std::vector<double> d = grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], d);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= alpha[k] * y_hist[k][i];
    }
    if (!s_hist.empty()) {
      const double gamma =
          dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (auto& v : d) v *= gamma;
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], d);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += (alpha[k] - beta) * s_hist[k][i];
    }
    for (auto& v : d) v = -v;

    double dg = dot(d, grad);
    if (dg >= 0.0) {
      // Not a descent direction (stale curvature); fall back to steepest descent.
      d = grad;
      for (auto& v : d) v = -v;
      dg = -dot(grad, grad);
    }

    double step = s_hist.empty() ? 1.0 / std::max(gnorm, 1.0) : 1.0;
    std::vector<double> theta_new(res.theta.size());
    std::vector<double> grad_new;
    double loss_new = loss;
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      for (std::size_t i = 0; i < res.theta.size(); ++i) {
        theta_new[i] = res.theta[i] + step * d[i];
      }
      loss_new = prob.eval(theta_new, grad_new, class_names);
      if (!std::isfinite(loss_new)) {
        throw NumericError("logreg: non-finite loss at iteration " +
                                 std::to_string(iter));
      }
      if (loss_new <= loss + kArmijo * step * dg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // line search exhausted; current point is the answer

    std::vector<double> s(res.theta.size()), yv(res.theta.size());
    for (std::size_t i = 0; i < res.theta.size(); ++i) {
      s[i] = theta_new[i] - res.theta[i];
      yv[i] = grad_new[i] - grad[i];
    }
    const double sy = dot(s, yv);
    if (sy > 1e-12 * norm2(s) * norm2(yv)) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > kHistory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    res.theta = std::move(theta_new);
    grad = std::move(grad_new);
    loss = loss_new;
    res.iterations = iter + 1;
  }
  res.loss = loss;
  return res;
}

}  // namespace

std::pair<LogRegModel, GridSearchReport> train_logreg(
    const FeatureMatrix& X_train, const std::vector<int>& y_train,
    const FeatureMatrix& X_val, const std::vector<int>& y_val,
    const std::vector<std::string>& class_names, const TrainConfig& cfg) {
  const int C = static_cast<int>(class_names.size());
  if (C < 2) throw std::invalid_argument("train_logreg: need at least 2 classes");
  if (cfg.lambda_grid.empty()) throw std::invalid_argument("train_logreg: empty lambda grid");
  if (!std::is_sorted(cfg.lambda_grid.begin(), cfg.lambda_grid.end())) {
    throw std::invalid_argument("train_logreg: lambda grid must be sorted ascending");
  }
  for (double l : cfg.lambda_grid) {
    if (l < 0.0) throw std::invalid_argument("train_logreg: negative lambda in grid");
  }
  if (cfg.max_iterations < 1) throw std::invalid_argument("train_logreg: max_iterations must be positive");
  if (!(cfg.gradient_tolerance > 0.0)) throw std::invalid_argument("train_logreg: tolerance must be positive");

  std::set<int> train_classes(y_train.begin(), y_train.end());
  if (train_classes.size() < 2) {
    throw std::invalid_argument("train_logreg: training set is single-class");
  }
  for (int c : y_val) {
    if (train_classes.find(c) == train_classes.end()) {
      throw std::invalid_argument("train_logreg: validation class " + std::to_string(c) +
                                  " absent from training set");
    }
  }

  GridSearchReport report;
  LogRegModel best;
  double best_score = -1.0;

  for (double lambda : cfg.lambda_grid) {
    FlatProblem prob{X_train, y_train, lambda, C, X_train.dimension};
    FitResult fit = lbfgs_fit(prob, class_names, cfg.max_iterations, cfg.gradient_tolerance);

    LogRegModel model;
    model.class_names = class_names;
    model.feature_dimension = X_train.dimension;
    model.lambda = lambda;
    model.weights.assign(fit.theta.begin(),
                         fit.theta.begin() + static_cast<std::ptrdiff_t>(C) * X_train.dimension);
    model.bias.assign(fit.theta.begin() + static_cast<std::ptrdiff_t>(C) * X_train.dimension,
                      fit.theta.end());

    // Micro-F1 over single-label predictions equals plain accuracy.
    std::int64_t correct = 0;
    std::vector<double> z;
    for (std::size_t i = 0; i < X_val.n_rows(); ++i) {
      row_logits(model, X_val, i, z);
      int arg = 0;
      for (int c = 1; c < C; ++c) {
        if (z[static_cast<std::size_t>(c)] > z[static_cast<std::size_t>(arg)]) arg = c;
      }
      if (arg == y_val[i]) ++correct;
    }
    const double score = X_val.n_rows() == 0
                             ? 0.0
                             : static_cast<double>(correct) / static_cast<double>(X_val.n_rows());

    report.entries.push_back({lambda, score, fit.loss, fit.iterations, fit.converged});
    if (score >= best_score) {  // >= : ascending grid, ties go to the larger lambda
      best_score = score;
      best = std::move(model);
      report.selected_lambda = lambda;
    }
  }
  return {std::move(best), std::move(report)};
}

ProbVector predict_proba(const LogRegModel& model, std::span<const double> x) {
  return softmax(logits_for(model, x));
}

ProbVector predict_proba(const LogRegModel& model, const SparseVector& x) {
  return softmax(logits_for(model, x));
}

int argmax_class(const ProbVector& p) {
  int arg = 0;
  for (std::size_t c = 1; c < p.probabilities.size(); ++c) {
    if (p.probabilities[c] > p.probabilities[static_cast<std::size_t>(arg)]) {
      arg = static_cast<int>(c);
    }
  }
  return arg;
}

int predict(const LogRegModel& model, std::span<const double> x) {
  return argmax_class(predict_proba(model, x));
}

int predict(const LogRegModel& model, const SparseVector& x) {
  return argmax_class(predict_proba(model, x));
}

double log_odds(const ProbVector& p, int c) {
  if (c < 0 || c >= static_cast<int>(p.probabilities.size())) {
    throw std::invalid_argument("log_odds: class index out of range");
  }
  const double clamped =
      std::clamp(p.probabilities[static_cast<std::size_t>(c)], 1e-12, 1.0 - 1e-12);
  return std::log(clamped / (1.0 - clamped));
}

double log_odds(const LogRegModel& model, std::span<const double> x, int c) {
  return log_odds(predict_proba(model, x), c);
}

double log_odds(const LogRegModel& model, const SparseVector& x, int c) {
  return log_odds(predict_proba(model, x), c);
}

}  // namespace fundcat::classify
