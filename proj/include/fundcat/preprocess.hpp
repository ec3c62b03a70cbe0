#pragma once

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace fundcat::preprocess {

/// Ordered token list. Tokens are never empty strings and keep source order.
using TokenSequence = std::vector<std::string>;

struct PreprocessConfig {
  bool lowercase = true;
  bool filter_stopwords = true;
  bool filter_non_alphabetic = true;  // drops tokens containing digits
  bool lemmatize = true;
  int ngram_min = 1;
  int ngram_max = 2;
};

/// Identity configuration: every flag off, unigrams only.
PreprocessConfig identity_config();

/// Tokenize + lowercase only, the light pipeline used by the embedding
/// featurizers.
PreprocessConfig lowercase_only_config();

/// Stopword list, lemma exception table and suffix rewrite rules.
/// Immutable after load; suffix rules are kept sorted longest-suffix-first.
struct Lexicon {
  std::unordered_set<std::string> stopwords;
  std::unordered_map<std::string, std::string> lemma_exceptions;
  std::vector<std::pair<std::string, std::string>> suffix_rules;
};

/// The lexicon bundled with the library (~150 English stopwords, a small
/// exception table, and the suffix rules ies->y, sses->ss, ing->"" with a
/// 3-character minimum stem, s->"" except after ss).
const Lexicon& default_lexicon();

/// Load a lexicon from JSON: {"stopwords": [...], "lemma_exceptions": {...},
/// "suffix_rules": [["ies","y"], ...]}.
Lexicon load_lexicon(const std::string& path);

/// Maximal runs of ASCII alphanumeric characters become tokens; everything
/// else is a delimiter.
TokenSequence tokenize(const std::string& text);

/// Applies, in order: lowercasing, digit-token filter, stopword filter,
/// lemmatization. n-gramming is separate (see ngrams).
TokenSequence normalize(const TokenSequence& seq, const PreprocessConfig& cfg,
                        const Lexicon& lex);

/// Exception table first, then the longest matching suffix rule, applied
/// once. Rules with an empty replacement require a stem of >= 3 characters.
/// The result is never empty; expects a lowercase word.
std::string lemmatize_token(const std::string& word, const Lexicon& lex);

/// For each n in [n_min, n_max], every contiguous n-token window joined with
/// "_", grouped by n in window order.
TokenSequence ngrams(const TokenSequence& seq, int n_min, int n_max);

/// Full per-document pipeline: normalize then n-gram per the config.
TokenSequence apply_pipeline(const TokenSequence& raw, const PreprocessConfig& cfg,
                             const Lexicon& lex);

}  // namespace fundcat::preprocess
