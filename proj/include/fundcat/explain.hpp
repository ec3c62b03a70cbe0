#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fundcat/classify.hpp"
#include "fundcat/corpus.hpp"
#include "fundcat/featurizer.hpp"
#include "fundcat/preprocess.hpp"

namespace fundcat::explain {

/// Coalition game over the token positions of one document: v(S) maps a
/// subset of positions to a real. Evaluations are memoized, so repeated
/// subsets (common in the partition recursion) cost one call.
class ValueFunction {
 public:
  using Evaluator = std::function<double(const std::vector<int>&)>;

  ValueFunction(std::vector<std::string> tokens, int target_class, Evaluator eval);

  /// positions must be sorted ascending, unique, within [0, n_tokens).
  double operator()(const std::vector<int>& positions) const;

  double full() const;
  double empty() const;
  int n_tokens() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  int target_class() const { return target_class_; }
  std::size_t evaluations() const { return cache_.size(); }

 private:
  std::vector<std::string> tokens_;
  int target_class_;
  Evaluator eval_;
  mutable std::unordered_map<std::string, double> cache_;  // mask string -> v
};

/// v(S) = target-class log-odds of the document rebuilt from only the raw
/// tokens at positions in S (order preserved), run through the same fitted
/// featurizer and model.
ValueFunction make_value_function(const classify::LogRegModel& model,
                                  const featurize::Featurizer& featurizer,
                                  const std::vector<std::string>& doc_tokens,
                                  int target_class);

struct Attribution {
  std::string token;
  int position = 0;
  double value = 0.0;  // log-odds units
  int target_class = 0;
};

/// Exact Shapley values by full subset enumeration; guarded at 20 tokens
/// (2^20 evaluations). Longer documents belong to owen_values.
std::vector<Attribution> exact_shapley(const ValueFunction& v);

/// Binary tree over contiguous token spans; node 0 is the root.
struct CoalitionTree {
  struct Node {
    int begin = 0;
    int end = 0;    // span [begin, end)
    int left = -1;  // -1 for leaves
    int right = -1;
  };
  std::vector<Node> nodes;
  int n_tokens = 0;
};

/// Balanced order-respecting hierarchy: a span [a,b) splits at ceil((a+b)/2).
CoalitionTree build_partition_tree(int n_tokens);

/// Owen values over the tree: each node's share is the average of its
/// marginal contribution v(S + span) - v(S) across the contexts S built
/// from ancestors' siblings (in/out, weight halving per level). Leaf shares
/// are the attributions; they sum to v(F) - v(empty) exactly.
std::vector<Attribution> owen_values(const ValueFunction& v, const CoalitionTree& tree);

/// Tokenizes the document, picks the target (named class or the model's
/// prediction on the full text), and attributes with exact Shapley for up
/// to 12 tokens, Owen values on the partition tree above that.
std::vector<Attribution> explain_document(
    const classify::LogRegModel& model, const featurize::Featurizer& featurizer,
    const corpus::Document& doc,
    const std::optional<std::string>& target_class = std::nullopt);

struct GlobalImportance {
  std::vector<std::string> class_names;
  std::vector<std::map<std::string, double>> sums;  // per class: token -> sum

  /// Top-k tokens for one class, value descending, ties lexicographic.
  std::vector<std::pair<std::string, double>> top_k(int class_index, int k) const;
};

/// Sums per-token attributions over the dataset. With per_class, every
/// class present in the dataset is explained as a target for every
/// document; otherwise each document contributes only to its predicted
/// class.
GlobalImportance global_importance(const classify::LogRegModel& model,
                                   const featurize::Featurizer& featurizer,
                                   const corpus::Dataset& docs, bool per_class);

}  // namespace fundcat::explain
