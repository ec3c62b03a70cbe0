#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fundcat/doc2vec.hpp"
#include "fundcat/featurize.hpp"
#include "fundcat/preprocess.hpp"

namespace fundcat::featurize {

/// A feature vector in whichever representation the featurizer produces.
struct FeatureVec {
  bool is_sparse = false;
  SparseVector sparse;
  std::vector<double> dense;
};

/// Uniform interface over the fitted featurizers. Input is the document's
/// raw token sequence (tokenization only); each implementation applies its
/// own normalization and n-gramming before mapping to numbers, so callers
/// can mask at the raw-token level.
class Featurizer {
 public:
  virtual ~Featurizer() = default;
  virtual int dimension() const = 0;
  virtual bool sparse_output() const = 0;
  virtual FeatureVec transform(const preprocess::TokenSequence& raw_tokens) const = 0;
  virtual std::string kind() const = 0;
};

class TfidfFeaturizer final : public Featurizer {
 public:
  TfidfFeaturizer(TfidfModel model, preprocess::Lexicon lexicon);

  int dimension() const override;
  bool sparse_output() const override { return true; }
  FeatureVec transform(const preprocess::TokenSequence& raw_tokens) const override;
  std::string kind() const override { return "tfidf"; }

  const TfidfModel& model() const { return model_; }
  const preprocess::Lexicon& lexicon() const { return lexicon_; }

 private:
  TfidfModel model_;
  preprocess::Lexicon lexicon_;
};

class AvgEmbeddingFeaturizer final : public Featurizer {
 public:
  AvgEmbeddingFeaturizer(EmbeddingTable table, preprocess::PreprocessConfig config,
                         preprocess::Lexicon lexicon);

  int dimension() const override;
  bool sparse_output() const override { return false; }
  FeatureVec transform(const preprocess::TokenSequence& raw_tokens) const override;
  std::string kind() const override { return "word2vec_avg"; }

  const EmbeddingTable& table() const { return table_; }
  const preprocess::PreprocessConfig& config() const { return config_; }

 private:
  EmbeddingTable table_;
  preprocess::PreprocessConfig config_;
  preprocess::Lexicon lexicon_;
};

class Doc2VecFeaturizer final : public Featurizer {
 public:
  Doc2VecFeaturizer(doc2vec::Doc2VecModel model, preprocess::PreprocessConfig config,
                    preprocess::Lexicon lexicon, int infer_steps, std::uint64_t infer_seed);

  int dimension() const override;
  bool sparse_output() const override { return false; }
  FeatureVec transform(const preprocess::TokenSequence& raw_tokens) const override;
  std::string kind() const override { return "doc2vec"; }

  const doc2vec::Doc2VecModel& model() const { return model_; }
  const preprocess::PreprocessConfig& config() const { return config_; }
  int infer_steps() const { return infer_steps_; }
  std::uint64_t infer_seed() const { return infer_seed_; }

 private:
  doc2vec::Doc2VecModel model_;
  preprocess::PreprocessConfig config_;
  preprocess::Lexicon lexicon_;
  int infer_steps_;
  std::uint64_t infer_seed_;
};

}  // namespace fundcat::featurize
