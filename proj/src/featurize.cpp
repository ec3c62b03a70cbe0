#include "fundcat/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fundcat/util.hpp"
#include "nlohmann/json.hpp"

namespace fundcat::featurize {

using json = nlohmann::ordered_json;

Vocabulary fit_vocabulary(const std::vector<TokenSequence>& train_seqs,
                          int min_df,
                          std::optional<int> max_features) {
  if (train_seqs.empty()) {
    throw std::invalid_argument("fit_vocabulary: no training sequences");
  }
  if (min_df < 1) {
    throw std::invalid_argument("fit_vocabulary: min_df must be >= 1");
  }
  if (max_features && *max_features < 1) {
    throw std::invalid_argument("fit_vocabulary: max_features must be >= 1");
  }

  // std::map keeps terms sorted while we accumulate document frequencies.
  std::map<std::string, std::int64_t> df;
  for (const auto& seq : train_seqs) {
    std::set<std::string> seen(seq.begin(), seq.end());
    for (const auto& t : seen) ++df[t];
  }

  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto& [term, n] : df) {
    if (n >= min_df) kept.emplace_back(term, n);
  }
  if (max_features && static_cast<int>(kept.size()) > *max_features) {
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return a.second > b.second;  // df descending; stable keeps lexicographic ties
    });
    kept.resize(static_cast<std::size_t>(*max_features));
    std::sort(kept.begin(), kept.end());  // back to lexicographic column order
  }
  if (kept.empty()) {
    throw std::runtime_error("fit_vocabulary: vocabulary is empty after pruning");
  }

  Vocabulary v;
  v.n_docs = static_cast<std::int64_t>(train_seqs.size());
  v.terms.reserve(kept.size());
  v.doc_freq.reserve(kept.size());
  for (auto& [term, n] : kept) {
    v.term_index.emplace(term, static_cast<int>(v.terms.size()));
    v.terms.push_back(term);
    v.doc_freq.push_back(n);
  }
  return v;
}

SparseVector tfidf_transform(const TokenSequence& seq, const TfidfModel& model) {
  const Vocabulary& vocab = model.vocabulary;
  SparseVector out;
  out.dimension = vocab.size();

  // Term counts over in-vocabulary tokens only; n_d uses the same restriction.
  std::map<int, std::int64_t> counts;
  std::int64_t n_d = 0;
  for (const auto& tok : seq) {
    auto it = vocab.term_index.find(tok);
    if (it == vocab.term_index.end()) continue;
    ++counts[it->second];
    ++n_d;
  }
  if (n_d == 0) return out;

  const double n_docs = static_cast<double>(vocab.n_docs);
  for (const auto& [idx, n_td] : counts) {
    const double n_t = static_cast<double>(vocab.doc_freq[static_cast<std::size_t>(idx)]);
    const double idf = std::log10(n_docs / n_t);
    if (idf == 0.0) continue;  // term in every document carries no signal
    const double tf = static_cast<double>(n_td) / static_cast<double>(n_d);
    out.entries.emplace_back(idx, tf * idf);
  }
  return out;
}

namespace {

json preprocess_to_json(const PreprocessConfig& cfg) {
  json j;
  j["lowercase"] = cfg.lowercase;
  j["filter_stopwords"] = cfg.filter_stopwords;
  j["filter_non_alphabetic"] = cfg.filter_non_alphabetic;
  j["lemmatize"] = cfg.lemmatize;
  j["ngram_min"] = cfg.ngram_min;
  j["ngram_max"] = cfg.ngram_max;
  return j;
}

PreprocessConfig preprocess_from_json(const json& j) {
  PreprocessConfig cfg;
  cfg.lowercase = j.at("lowercase").get<bool>();
  cfg.filter_stopwords = j.at("filter_stopwords").get<bool>();
  cfg.filter_non_alphabetic = j.at("filter_non_alphabetic").get<bool>();
  cfg.lemmatize = j.at("lemmatize").get<bool>();
  cfg.ngram_min = j.at("ngram_min").get<int>();
  cfg.ngram_max = j.at("ngram_max").get<int>();
  return cfg;
}

}  // namespace

void save_tfidf_model(const TfidfModel& model, const std::string& path) {
  json j;
  j["preprocess"] = preprocess_to_json(model.preprocess);
  j["n_docs"] = model.vocabulary.n_docs;
  j["terms"] = model.vocabulary.terms;
  j["doc_freq"] = model.vocabulary.doc_freq;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

TfidfModel load_tfidf_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  json j = json::parse(in, nullptr, true);

  TfidfModel model;
  model.preprocess = preprocess_from_json(j.at("preprocess"));
  model.vocabulary.n_docs = j.at("n_docs").get<std::int64_t>();
  model.vocabulary.terms = j.at("terms").get<std::vector<std::string>>();
  model.vocabulary.doc_freq = j.at("doc_freq").get<std::vector<std::int64_t>>();
  if (model.vocabulary.terms.size() != model.vocabulary.doc_freq.size()) {
    throw std::runtime_error("tfidf model: terms/doc_freq length mismatch in " + path);
  }
  for (std::size_t i = 0; i < model.vocabulary.terms.size(); ++i) {
    model.vocabulary.term_index.emplace(model.vocabulary.terms[i], static_cast<int>(i));
  }
  return model;
}

EmbeddingTable load_embedding_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);

  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("embedding table is empty: " + path);
  }
  std::istringstream header(line);
  std::int64_t declared_count = 0;
  int dim = 0;
  if (!(header >> declared_count >> dim) || dim <= 0) {
    throw std::runtime_error("bad embedding header in " + path + ": " + line);
  }

  EmbeddingTable table;
  table.dimension = dim;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string word;
    if (!(row >> word)) continue;
    std::vector<double> vec(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
      if (!(row >> vec[static_cast<std::size_t>(i)])) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": expected " + std::to_string(dim) +
                                 " values for word '" + word + "'");
      }
      if (!std::isfinite(vec[static_cast<std::size_t>(i)])) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": non-finite value for word '" + word + "'");
      }
    }
    double extra;
    if (row >> extra) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": too many values for word '" + word + "'");
    }
    auto it = table.vectors.find(word);
    if (it != table.vectors.end()) {
      std::cerr << "warning: duplicate embedding for '" << word << "' at " << path
                << ":" << line_no << "; keeping last occurrence\n";
      it->second = std::move(vec);
    } else {
      table.vectors.emplace(std::move(word), std::move(vec));
    }
  }
  if (table.vectors.empty()) {
    throw std::runtime_error("embedding table has no vectors: " + path);
  }
  if (declared_count != static_cast<std::int64_t>(table.vectors.size())) {
    std::cerr << "warning: embedding header declares " << declared_count
              << " words but " << table.vectors.size() << " were read from "
              << path << "\n";
  }
  return table;
}

void save_embedding_table(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);

  std::vector<std::string> words;
  words.reserve(table.vectors.size());
  for (const auto& [w, _] : table.vectors) words.push_back(w);
  std::sort(words.begin(), words.end());

  out << table.vectors.size() << ' ' << table.dimension << '\n';
  for (const auto& w : words) {
    out << w;
    for (double v : table.vectors.at(w)) out << ' ' << util::format_double(v);
    out << '\n';
  }
}

std::vector<double> average_embedding(const TokenSequence& seq,
                                      const EmbeddingTable& table) {
  std::vector<double> sum(static_cast<std::size_t>(table.dimension), 0.0);
  std::int64_t hits = 0;
  for (const auto& tok : seq) {
    auto it = table.vectors.find(tok);
    if (it == table.vectors.end()) continue;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += it->second[i];
    ++hits;
  }
  if (hits > 0) {
    for (auto& v : sum) v /= static_cast<double>(hits);
  }
  return sum;
}

DocEmbeddingStore load_precomputed_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);

  DocEmbeddingStore store;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed embedding record");
    }
    if (!j.contains("id") || !j["id"].is_string() || !j.contains("vector") ||
        !j["vector"].is_array()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": record needs string 'id' and array 'vector'");
    }
    std::string id = j["id"].get<std::string>();
    std::vector<double> vec;
    vec.reserve(j["vector"].size());
    for (const auto& x : j["vector"]) {
      if (!x.is_number()) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": non-numeric vector component for id '" + id + "'");
      }
      vec.push_back(x.get<double>());
    }
    if (vec.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": empty vector for id '" + id + "'");
    }
    if (store.dimension == 0) {
      store.dimension = static_cast<int>(vec.size());
    } else if (static_cast<int>(vec.size()) != store.dimension) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": id '" + id +
                               "' has dimension " + std::to_string(vec.size()) +
                               ", expected " + std::to_string(store.dimension));
    }
    const std::string id_copy = id;
    if (!store.by_id.emplace(std::move(id), std::move(vec)).second) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": duplicate document id '" + id_copy + "'");
    }
  }
  if (store.by_id.empty()) {
    throw std::runtime_error("no embeddings found in " + path);
  }
  return store;
}

void save_precomputed_embeddings(const DocEmbeddingStore& store,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);

  std::vector<std::string> ids;
  ids.reserve(store.by_id.size());
  for (const auto& [id, _] : store.by_id) ids.push_back(id);
  std::sort(ids.begin(), ids.end());

  for (const auto& id : ids) {
    json j;
    j["id"] = id;
    json arr = json::array();
    for (double v : store.by_id.at(id)) arr.push_back(v);
    j["vector"] = std::move(arr);
    out << j.dump() << '\n';
  }
}

}  // namespace fundcat::featurize
