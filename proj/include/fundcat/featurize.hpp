#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fundcat/preprocess.hpp"

namespace fundcat::featurize {

using preprocess::PreprocessConfig;
using preprocess::TokenSequence;

/// Term -> dense column index plus per-term document frequency (N_t) and
/// corpus size (N). Indices follow lexicographic term order.
struct Vocabulary {
  std::vector<std::string> terms;       // lexicographic order = column order
  std::vector<std::int64_t> doc_freq;   // N_t, parallel to terms
  std::int64_t n_docs = 0;              // N
  std::unordered_map<std::string, int> term_index;

  int size() const { return static_cast<int>(terms.size()); }
};

/// Terms with document frequency >= min_df are retained; with max_features
/// set, the top terms by document frequency are kept (ties broken
/// lexicographically). Throws if nothing survives pruning.
Vocabulary fit_vocabulary(const std::vector<TokenSequence>& train_seqs,
                          int min_df,
                          std::optional<int> max_features = std::nullopt);

/// Sparse vector with strictly increasing indices and finite nonzero values.
struct SparseVector {
  int dimension = 0;
  std::vector<std::pair<int, double>> entries;
};

struct TfidfModel {
  Vocabulary vocabulary;
  PreprocessConfig preprocess;
};

/// value(t) = (n_{t,d} / n_d) * log10(N / N_t) where n_d counts only
/// in-vocabulary tokens. Terms present in every training document have
/// IDF 0 and produce no entry; out-of-vocabulary tokens are ignored.
SparseVector tfidf_transform(const TokenSequence& seq, const TfidfModel& model);

void save_tfidf_model(const TfidfModel& model, const std::string& path);
TfidfModel load_tfidf_model(const std::string& path);

/// Word -> dense vector table of a single dimension.
struct EmbeddingTable {
  int dimension = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
};

/// Reads the word-vector text format: a "<count> <dim>" header line, then
/// one "<word> <v1> ... <vdim>" line per word. A duplicate word keeps its
/// last occurrence (with a warning on stderr).
EmbeddingTable load_embedding_table(const std::string& path);

/// Writes the same format with round-trip-exact decimal values, words in
/// lexicographic order.
void save_embedding_table(const EmbeddingTable& table, const std::string& path);

/// Unweighted mean of the vectors of in-table tokens; tokens absent from
/// the table are skipped, and a sequence with no in-table token maps to the
/// zero vector.
std::vector<double> average_embedding(const TokenSequence& seq,
                                      const EmbeddingTable& table);

/// Precomputed document embeddings keyed by document id.
struct DocEmbeddingStore {
  int dimension = 0;
  std::unordered_map<std::string, std::vector<double>> by_id;
};

/// Line-delimited JSON {"id": ..., "vector": [...]}; all vectors must share
/// one dimension and ids must be unique.
DocEmbeddingStore load_precomputed_embeddings(const std::string& path);

void save_precomputed_embeddings(const DocEmbeddingStore& store,
                                 const std::string& path);

}  // namespace fundcat::featurize
