#include "fundcat/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fundcat::preprocess {

namespace {

bool is_alnum_ascii(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

bool has_digit(const std::string& s) {
  return std::any_of(s.begin(), s.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}

std::string to_lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

void sort_suffix_rules(std::vector<std::pair<std::string, std::string>>& rules) {
  // longest-suffix-first; stable so equal lengths keep their listed order
  std::stable_sort(rules.begin(), rules.end(),
                   [](const auto& a, const auto& b) {
                     return a.first.size() > b.first.size();
                   });
}

}  // namespace

PreprocessConfig identity_config() {
  PreprocessConfig c;
  c.lowercase = false;
  c.filter_stopwords = false;
  c.filter_non_alphabetic = false;
  c.lemmatize = false;
  c.ngram_min = 1;
  c.ngram_max = 1;
  return c;
}

PreprocessConfig lowercase_only_config() {
  PreprocessConfig c = identity_config();
  c.lowercase = true;
  return c;
}

TokenSequence tokenize(const std::string& text) {
  TokenSequence out;
  std::string cur;
  for (char c : text) {
    if (is_alnum_ascii(c)) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string lemmatize_token(const std::string& word, const Lexicon& lex) {
  auto it = lex.lemma_exceptions.find(word);
  if (it != lex.lemma_exceptions.end()) return it->second;
  for (const auto& [suffix, repl] : lex.suffix_rules) {
    if (word.size() <= suffix.size()) continue;  // proper suffix only
    if (word.compare(word.size() - suffix.size(), suffix.size(), suffix) != 0)
      continue;
    std::size_t stem_len = word.size() - suffix.size();
    if (repl.empty() && stem_len < 3) continue;
    return word.substr(0, stem_len) + repl;
  }
  return word;
}

TokenSequence normalize(const TokenSequence& seq, const PreprocessConfig& cfg,
                        const Lexicon& lex) {
  TokenSequence out;
  out.reserve(seq.size());
  for (const std::string& tok : seq) {
    std::string t = cfg.lowercase ? to_lower(tok) : tok;
    if (cfg.filter_non_alphabetic && has_digit(t)) continue;
    if (cfg.filter_stopwords && lex.stopwords.count(cfg.lowercase ? t : to_lower(t)))
      continue;
    if (cfg.lemmatize) t = lemmatize_token(t, lex);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

TokenSequence ngrams(const TokenSequence& seq, int n_min, int n_max) {
  if (n_min < 1 || n_min > n_max)
    throw std::invalid_argument("ngrams: require 1 <= n_min <= n_max");
  const int k = static_cast<int>(seq.size());
  TokenSequence out;
  for (int n = n_min; n <= n_max; ++n) {
    for (int i = 0; i + n <= k; ++i) {
      std::string joined = seq[i];
      for (int j = 1; j < n; ++j) {
        joined.push_back('_');
        joined += seq[i + j];
      }
      out.push_back(std::move(joined));
    }
  }
  return out;
}

TokenSequence apply_pipeline(const TokenSequence& raw, const PreprocessConfig& cfg,
                             const Lexicon& lex) {
  return ngrams(normalize(raw, cfg, lex), cfg.ngram_min, cfg.ngram_max);
}

Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon file: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  Lexicon lex;
  for (const auto& w : j.at("stopwords"))
    lex.stopwords.insert(to_lower(w.get<std::string>()));
  if (j.contains("lemma_exceptions"))
    for (auto& [k, v] : j.at("lemma_exceptions").items())
      lex.lemma_exceptions[to_lower(k)] = v.get<std::string>();
  if (j.contains("suffix_rules"))
    for (const auto& rule : j.at("suffix_rules"))
      lex.suffix_rules.emplace_back(rule.at(0).get<std::string>(),
                                    rule.at(1).get<std::string>());
  sort_suffix_rules(lex.suffix_rules);
  return lex;
}

namespace {

const char* const kDefaultStopwords[] = {
    "a",       "about",   "above",    "after",   "again",    "against",
    "all",     "also",    "am",       "an",      "and",      "any",
    "are",     "as",      "at",       "be",      "because",  "been",
    "before",  "being",   "below",    "between", "both",     "but",
    "by",      "can",     "cannot",   "could",   "did",      "do",
    "does",    "doing",   "down",     "during",  "each",     "either",
    "few",     "for",     "from",     "further", "had",      "has",
    "have",    "having",  "he",       "her",     "here",     "hers",
    "herself", "him",     "himself",  "his",     "how",      "i",
    "if",      "in",      "into",     "is",      "it",       "its",
    "itself",  "just",    "may",      "me",      "might",    "more",
    "most",    "must",    "my",       "myself",  "neither",  "no",
    "nor",     "not",     "now",      "of",      "off",      "on",
    "once",    "only",    "or",       "other",   "our",      "ours",
    "ourselves", "out",   "over",     "own",     "same",     "shall",
    "she",     "should",  "so",       "some",    "such",     "than",
    "that",    "the",     "their",    "theirs",  "them",     "themselves",
    "then",    "there",   "these",    "they",    "this",     "those",
    "through", "to",      "too",      "under",   "until",    "up",
    "upon",    "very",    "was",      "we",      "were",     "what",
    "when",    "where",   "whether",  "which",   "while",    "who",
    "whom",    "why",     "will",     "with",    "within",   "without",
    "would",   "yet",     "you",      "your",    "yours",    "yourself",
    "yourselves"};

Lexicon build_default_lexicon() {
  Lexicon lex;
  for (const char* w : kDefaultStopwords) lex.stopwords.insert(w);
  lex.lemma_exceptions = {
      {"housing", "house"}, {"indices", "index"},
      {"held", "hold"},     {"paid", "pay"},
      {"sought", "seek"},
  };
  // The ss->ss identity rule shadows s->"" for words ending in ss.
  lex.suffix_rules = {
      {"sses", "ss"}, {"ies", "y"}, {"ing", ""}, {"ss", "ss"}, {"s", ""},
  };
  sort_suffix_rules(lex.suffix_rules);
  return lex;
}

}  // namespace

const Lexicon& default_lexicon() {
  static const Lexicon lex = build_default_lexicon();
  return lex;
}

}  // namespace fundcat::preprocess
