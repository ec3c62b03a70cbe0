#include "fundcat/explain.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace fundcat::explain {

ValueFunction::ValueFunction(std::vector<std::string> tokens, int target_class,
                             Evaluator eval)
    : tokens_(std::move(tokens)), target_class_(target_class), eval_(std::move(eval)) {
  if (tokens_.empty()) {
    throw std::invalid_argument("ValueFunction: document has no tokens");
  }
}

double ValueFunction::operator()(const std::vector<int>& positions) const {
  std::string mask(tokens_.size(), '0');
  int prev = -1;
  for (int p : positions) {
    if (p <= prev || p >= static_cast<int>(tokens_.size())) {
      throw std::invalid_argument("ValueFunction: positions must be sorted, unique, in range");
    }
    mask[static_cast<std::size_t>(p)] = '1';
    prev = p;
  }
  auto it = cache_.find(mask);
  if (it != cache_.end()) return it->second;
  const double v = eval_(positions);
  if (!std::isfinite(v)) {
    throw std::runtime_error("ValueFunction: non-finite value for subset mask " + mask);
  }
  cache_.emplace(std::move(mask), v);
  return v;
}

double ValueFunction::full() const {
  std::vector<int> all(tokens_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return (*this)(all);
}

double ValueFunction::empty() const { return (*this)({}); }

ValueFunction make_value_function(const classify::LogRegModel& model,
                                  const featurize::Featurizer& featurizer,
                                  const std::vector<std::string>& doc_tokens,
                                  int target_class) {
  if (target_class < 0 || target_class >= model.n_classes()) {
    throw std::invalid_argument("make_value_function: target class out of range");
  }
  if (featurizer.dimension() != model.feature_dimension) {
    throw std::invalid_argument("make_value_function: featurizer/model dimension mismatch");
  }
  auto tokens = doc_tokens;
  auto eval = [&model, &featurizer, tokens, target_class](const std::vector<int>& positions) {
    preprocess::TokenSequence subset;
    subset.reserve(positions.size());
    for (int p : positions) subset.push_back(tokens[static_cast<std::size_t>(p)]);
    const featurize::FeatureVec f = featurizer.transform(subset);
    const classify::ProbVector probs =
        f.is_sparse ? classify::predict_proba(model, f.sparse)
                    : classify::predict_proba(model, std::span<const double>(f.dense));
    return classify::log_odds(probs, target_class);
  };
  return ValueFunction(doc_tokens, target_class, std::move(eval));
}

std::vector<Attribution> exact_shapley(const ValueFunction& v) {
  const int n = v.n_tokens();
  if (n > 20) {
    throw std::invalid_argument(
        "exact_shapley: " + std::to_string(n) +
        " tokens exceeds the 20-token enumeration guard; use owen_values");
  }

  // v over all subsets, indexed by bitmask.
  const std::size_t n_masks = std::size_t{1} << n;
  std::vector<double> table(n_masks);
  std::vector<int> positions;
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    positions.clear();
    for (int i = 0; i < n; ++i) {
      if (mask & (std::size_t{1} << i)) positions.push_back(i);
    }
    table[mask] = v(positions);
  }

  // w(s) = s!(n-s-1)!/n! = 1 / (n * C(n-1, s)); binomials are exact here.
  std::vector<double> weight(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    double binom = 1.0;
    for (int k = 1; k <= s; ++k) {
      binom = binom * static_cast<double>(n - 1 - (k - 1)) / static_cast<double>(k);
    }
    weight[static_cast<std::size_t>(s)] = 1.0 / (static_cast<double>(n) * binom);
  }

  std::vector<Attribution> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      const int s = __builtin_popcountll(mask);
      phi += weight[static_cast<std::size_t>(s)] * (table[mask | bit] - table[mask]);
    }
    out[static_cast<std::size_t>(i)] = {v.tokens()[static_cast<std::size_t>(i)], i, phi,
                                        v.target_class()};
  }
  return out;
}

CoalitionTree build_partition_tree(int n_tokens) {
  if (n_tokens < 1) throw std::invalid_argument("build_partition_tree: need >= 1 token");
  CoalitionTree tree;
  tree.n_tokens = n_tokens;
  tree.nodes.push_back({0, n_tokens, -1, -1});
  // Breadth-first expansion; children of [a,b) split at ceil((a+b)/2).
  for (std::size_t idx = 0; idx < tree.nodes.size(); ++idx) {
    const int a = tree.nodes[idx].begin;
    const int b = tree.nodes[idx].end;
    if (b - a <= 1) continue;
    const int mid = (a + b + 1) / 2;
    tree.nodes[idx].left = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({a, mid, -1, -1});
    tree.nodes[idx].right = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({mid, b, -1, -1});
  }
  return tree;
}

namespace {

// Context masks are '0'/'1' strings over token positions; spans toggle in
// and out as the recursion walks the tree.
std::vector<int> mask_to_positions(const std::string& mask) {
  std::vector<int> positions;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == '1') positions.push_back(static_cast<int>(i));
  }
  return positions;
}

void set_span(std::string& mask, int begin, int end, char ch) {
  for (int i = begin; i < end; ++i) mask[static_cast<std::size_t>(i)] = ch;
}

struct Context {
  std::string mask;  // union of chosen ancestor-sibling spans
  double weight;
};

void owen_recurse(const ValueFunction& v, const CoalitionTree& tree, int node_idx,
                  const std::vector<Context>& contexts, std::vector<double>& leaf_values) {
  const auto& node = tree.nodes[static_cast<std::size_t>(node_idx)];

  if (node.left < 0) {
    // Leaf: weighted average of the token's marginal across contexts.
    double phi = 0.0;
    for (const auto& ctx : contexts) {
      std::string with = ctx.mask;
      set_span(with, node.begin, node.end, '1');
      const double marginal = v(mask_to_positions(with)) - v(mask_to_positions(ctx.mask));
      phi += ctx.weight * marginal;
    }
    leaf_values[static_cast<std::size_t>(node.begin)] = phi;
    return;
  }

  const auto& left = tree.nodes[static_cast<std::size_t>(node.left)];
  const auto& right = tree.nodes[static_cast<std::size_t>(node.right)];

  // Each child sees every parent context twice: sibling absent and sibling
  // present, at half the weight each.
  std::vector<Context> left_ctx, right_ctx;
  left_ctx.reserve(contexts.size() * 2);
  right_ctx.reserve(contexts.size() * 2);
  for (const auto& ctx : contexts) {
    left_ctx.push_back({ctx.mask, ctx.weight / 2.0});
    std::string with_sibling = ctx.mask;
    set_span(with_sibling, right.begin, right.end, '1');
    left_ctx.push_back({std::move(with_sibling), ctx.weight / 2.0});

    right_ctx.push_back({ctx.mask, ctx.weight / 2.0});
    with_sibling = ctx.mask;
    set_span(with_sibling, left.begin, left.end, '1');
    right_ctx.push_back({std::move(with_sibling), ctx.weight / 2.0});
  }
  owen_recurse(v, tree, node.left, left_ctx, leaf_values);
  owen_recurse(v, tree, node.right, right_ctx, leaf_values);
}

std::vector<Attribution> attribute(const ValueFunction& v) {
  if (v.n_tokens() <= 12) return exact_shapley(v);
  return owen_values(v, build_partition_tree(v.n_tokens()));
}

}  // namespace

std::vector<Attribution> owen_values(const ValueFunction& v, const CoalitionTree& tree) {
  if (tree.n_tokens != v.n_tokens()) {
    throw std::invalid_argument("owen_values: tree size does not match token count");
  }
  std::vector<double> leaf_values(static_cast<std::size_t>(tree.n_tokens), 0.0);
  std::vector<Context> root_ctx{{std::string(static_cast<std::size_t>(tree.n_tokens), '0'), 1.0}};
  owen_recurse(v, tree, 0, root_ctx, leaf_values);

  std::vector<Attribution> out(static_cast<std::size_t>(tree.n_tokens));
  for (int i = 0; i < tree.n_tokens; ++i) {
    out[static_cast<std::size_t>(i)] = {v.tokens()[static_cast<std::size_t>(i)], i,
                                        leaf_values[static_cast<std::size_t>(i)],
                                        v.target_class()};
  }
  return out;
}

std::vector<Attribution> explain_document(
    const classify::LogRegModel& model, const featurize::Featurizer& featurizer,
    const corpus::Document& doc, const std::optional<std::string>& target_class) {
  const auto tokens = preprocess::tokenize(doc.text);
  if (tokens.empty()) {
    throw std::runtime_error("explain_document: document '" + doc.id +
                             "' has no tokens after tokenization");
  }

  int target;
  if (target_class) {
    auto it = std::find(model.class_names.begin(), model.class_names.end(), *target_class);
    if (it == model.class_names.end()) {
      throw std::invalid_argument("explain_document: unknown class '" + *target_class + "'");
    }
    target = static_cast<int>(it - model.class_names.begin());
  } else {
    const featurize::FeatureVec f = featurizer.transform(tokens);
    target = f.is_sparse
                 ? classify::predict(model, f.sparse)
                 : classify::predict(model, std::span<const double>(f.dense));
  }

  ValueFunction v = make_value_function(model, featurizer, tokens, target);
  return attribute(v);
}

std::vector<std::pair<std::string, double>> GlobalImportance::top_k(int class_index,
                                                                    int k) const {
  if (class_index < 0 || class_index >= static_cast<int>(sums.size())) {
    throw std::invalid_argument("GlobalImportance: class index out of range");
  }
  std::vector<std::pair<std::string, double>> entries(
      sums[static_cast<std::size_t>(class_index)].begin(),
      sums[static_cast<std::size_t>(class_index)].end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(entries.size()) > k) entries.resize(static_cast<std::size_t>(k));
  return entries;
}

GlobalImportance global_importance(const classify::LogRegModel& model,
                                   const featurize::Featurizer& featurizer,
                                   const corpus::Dataset& docs, bool per_class) {
  if (docs.documents.empty()) {
    throw std::invalid_argument("global_importance: empty dataset");
  }

  GlobalImportance g;
  g.class_names = model.class_names;
  g.sums.resize(model.class_names.size());

  std::vector<int> targets;
  if (per_class) {
    std::set<std::string> present(docs.labels.begin(), docs.labels.end());
    for (const auto& label : present) {
      auto it = std::find(model.class_names.begin(), model.class_names.end(), label);
      if (it == model.class_names.end()) {
        throw std::invalid_argument("global_importance: dataset class '" + label +
                                    "' unknown to the model");
      }
      targets.push_back(static_cast<int>(it - model.class_names.begin()));
    }
  }

  for (const auto& doc : docs.documents) {
    const auto tokens = preprocess::tokenize(doc.text);
    if (tokens.empty()) continue;  // nothing to attribute

    if (per_class) {
      for (int target : targets) {
        ValueFunction v = make_value_function(model, featurizer, tokens, target);
        for (const auto& a : attribute(v)) {
          g.sums[static_cast<std::size_t>(target)][a.token] += a.value;
        }
      }
    } else {
      const featurize::FeatureVec f = featurizer.transform(tokens);
      const int target = f.is_sparse
                             ? classify::predict(model, f.sparse)
                             : classify::predict(model, std::span<const double>(f.dense));
      ValueFunction v = make_value_function(model, featurizer, tokens, target);
      for (const auto& a : attribute(v)) {
        g.sums[static_cast<std::size_t>(target)][a.token] += a.value;
      }
    }
  }
  return g;
}

}  // namespace fundcat::explain
