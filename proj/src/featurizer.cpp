#include "fundcat/featurizer.hpp"

#include <utility>

namespace fundcat::featurize {

namespace {

preprocess::TokenSequence run_pipeline(const preprocess::TokenSequence& raw_tokens,
                                       const preprocess::PreprocessConfig& cfg,
                                       const preprocess::Lexicon& lexicon) {
  return preprocess::ngrams(preprocess::normalize(raw_tokens, cfg, lexicon),
                            cfg.ngram_min, cfg.ngram_max);
}

}  // namespace

TfidfFeaturizer::TfidfFeaturizer(TfidfModel model, preprocess::Lexicon lexicon)
    : model_(std::move(model)), lexicon_(std::move(lexicon)) {}

int TfidfFeaturizer::dimension() const { return model_.vocabulary.size(); }

FeatureVec TfidfFeaturizer::transform(const preprocess::TokenSequence& raw_tokens) const {
  FeatureVec v;
  v.is_sparse = true;
  v.sparse = tfidf_transform(run_pipeline(raw_tokens, model_.preprocess, lexicon_), model_);
  return v;
}

AvgEmbeddingFeaturizer::AvgEmbeddingFeaturizer(EmbeddingTable table,
                                               preprocess::PreprocessConfig config,
                                               preprocess::Lexicon lexicon)
    : table_(std::move(table)),
      config_(std::move(config)),
      lexicon_(std::move(lexicon)) {}

int AvgEmbeddingFeaturizer::dimension() const { return table_.dimension; }

FeatureVec AvgEmbeddingFeaturizer::transform(
    const preprocess::TokenSequence& raw_tokens) const {
  FeatureVec v;
  v.dense = average_embedding(run_pipeline(raw_tokens, config_, lexicon_), table_);
  return v;
}

Doc2VecFeaturizer::Doc2VecFeaturizer(doc2vec::Doc2VecModel model,
                                     preprocess::PreprocessConfig config,
                                     preprocess::Lexicon lexicon, int infer_steps,
                                     std::uint64_t infer_seed)
    : model_(std::move(model)),
      config_(std::move(config)),
      lexicon_(std::move(lexicon)),
      infer_steps_(infer_steps),
      infer_seed_(infer_seed) {}

int Doc2VecFeaturizer::dimension() const { return model_.config.dim; }

FeatureVec Doc2VecFeaturizer::transform(
    const preprocess::TokenSequence& raw_tokens) const {
  FeatureVec v;
  const auto seq = run_pipeline(raw_tokens, config_, lexicon_);
  if (seq.empty()) {
    // Masked-out subsets hit this constantly during explanation; skip the
    // inference warning for a vacuously empty sequence.
    v.dense.assign(static_cast<std::size_t>(model_.config.dim), 0.0);
    return v;
  }
  v.dense = doc2vec::infer_doc2vec(model_, seq, infer_steps_, infer_seed_);
  return v;
}

}  // namespace fundcat::featurize
