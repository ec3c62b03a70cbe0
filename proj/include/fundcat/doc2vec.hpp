#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "fundcat/preprocess.hpp"

namespace fundcat::doc2vec {

using preprocess::TokenSequence;

struct Doc2VecConfig {
  int dim = 100;
  int window = 15;
  int epochs = 40;
  int negatives = 5;
  double initial_lr = 0.025;
  int min_count = 2;
  std::uint64_t seed = 0;
};

/// Distributed bag-of-words paragraph vectors: one trained vector per
/// training document plus per-word output weights for negative sampling.
struct Doc2VecModel {
  Doc2VecConfig config;
  std::vector<std::string> vocab_terms;   // lexicographic order
  std::vector<std::int64_t> vocab_counts;
  std::unordered_map<std::string, int> term_index;
  std::vector<std::vector<double>> doc_vectors;
  std::vector<std::vector<double>> output_weights;
  std::vector<double> noise_cdf;          // cumulative unigram^0.75, last = 1
  std::vector<double> epoch_mean_loss;    // diagnostic, one entry per epoch
};

/// Trains dbow with negative sampling. For every epoch, document, and token
/// position, one target word is sampled uniformly from the window around
/// that position and the document vector is trained against it (logistic
/// loss, `negatives` noise words drawn from the unigram^0.75 distribution).
/// The learning rate decays linearly from initial_lr to 10% of it across
/// epochs. Deterministic for a fixed config.
Doc2VecModel train_doc2vec_dbow(const std::vector<TokenSequence>& train_seqs,
                                const Doc2VecConfig& config);

/// Embeds an unseen document: a fresh vector is initialized from seeded
/// small-uniform noise and optimized for `steps` passes with the model's
/// output weights frozen. A sequence with no in-vocabulary token maps to
/// the zero vector (with a warning).
std::vector<double> infer_doc2vec(const Doc2VecModel& model,
                                  const TokenSequence& seq,
                                  int steps,
                                  std::uint64_t seed);

void save_doc2vec_model(const Doc2VecModel& model, const std::string& path);
Doc2VecModel load_doc2vec_model(const std::string& path);

}  // namespace fundcat::doc2vec
