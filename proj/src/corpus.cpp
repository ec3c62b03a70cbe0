#include "fundcat/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "fundcat/util.hpp"

namespace fundcat::corpus {

namespace {

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

[[noreturn]] void malformed(const std::string& path, std::size_t line_no,
                            const std::string& why) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) +
                           ": malformed record: " + why);
}

// Splits one CSV line into fields, honoring double-quote quoting with ""
// escapes. Embedded newlines are not supported.
std::vector<std::string> split_csv_line(const std::string& line,
                                        const std::string& path,
                                        std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) malformed(path, line_no, "unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

int Dataset::label_index(const std::string& label) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label) return -1;
  return static_cast<int>(it - labels.begin());
}

Dataset make_dataset(std::vector<Document> documents) {
  Dataset d;
  std::set<std::string> label_set;
  for (const Document& doc : documents) label_set.insert(doc.label);
  d.labels.assign(label_set.begin(), label_set.end());
  d.documents = std::move(documents);
  return d;
}

Dataset load_dataset(const std::string& path, DataFormat format,
                     LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  std::vector<Document> docs;
  std::unordered_set<std::string> seen_ids;
  std::size_t dropped = 0;
  std::string line;
  std::size_t line_no = 0;

  auto add_record = [&](std::string id, std::string text, std::string label,
                        std::size_t rec_line) {
    if (id.empty()) malformed(path, rec_line, "missing or empty id");
    if (is_blank(text) || label.empty()) {
      ++dropped;
      return;
    }
    if (!seen_ids.insert(id).second)
      throw std::runtime_error(path + ": duplicate document id: " + id);
    docs.push_back({std::move(id), std::move(text), std::move(label)});
  };

  if (format == DataFormat::jsonl) {
    while (std::getline(in, line)) {
      ++line_no;
      if (is_blank(line)) continue;
      nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
      if (rec.is_discarded() || !rec.is_object())
        malformed(path, line_no, "not a JSON object");
      auto field = [&](const char* name) -> std::string {
        if (!rec.contains(name)) return "";
        if (!rec[name].is_string())
          malformed(path, line_no, std::string(name) + " is not a string");
        return rec[name].get<std::string>();
      };
      add_record(field("id"), field("text"), field("label"), line_no);
    }
  } else {
    if (!std::getline(in, line)) throw std::runtime_error(path + ": no records");
    ++line_no;
    std::vector<std::string> header = split_csv_line(line, path, line_no);
    int id_col = -1, text_col = -1, label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == "id") id_col = static_cast<int>(i);
      if (header[i] == "text") text_col = static_cast<int>(i);
      if (header[i] == "label") label_col = static_cast<int>(i);
    }
    if (id_col < 0 || text_col < 0 || label_col < 0)
      throw std::runtime_error(path + ": CSV header must contain id,text,label");
    while (std::getline(in, line)) {
      ++line_no;
      if (is_blank(line)) continue;
      std::vector<std::string> fields = split_csv_line(line, path, line_no);
      if (fields.size() != header.size())
        malformed(path, line_no, "wrong field count");
      add_record(fields[id_col], fields[text_col], fields[label_col], line_no);
    }
  }

  if (docs.empty()) throw std::runtime_error(path + ": no records");
  if (stats) stats->dropped = dropped;
  return make_dataset(std::move(docs));
}

void save_dataset_jsonl(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const Document& doc : d.documents) {
    nlohmann::json rec{{"id", doc.id}, {"text", doc.text}, {"label", doc.label}};
    out << rec.dump() << "\n";
  }
}

Dataset clean_dataset(const Dataset& d, int min_per_class) {
  if (min_per_class < 1)
    throw std::invalid_argument("clean_dataset: min_per_class must be >= 1");
  std::unordered_map<std::string, int> counts;
  for (const Document& doc : d.documents) ++counts[doc.label];
  std::vector<Document> kept;
  for (const Document& doc : d.documents)
    if (counts[doc.label] >= min_per_class) kept.push_back(doc);
  if (kept.empty())
    throw std::runtime_error("clean_dataset: no class meets the minimum of " +
                             std::to_string(min_per_class));
  return make_dataset(std::move(kept));
}

DatasetSplits stratified_split(const Dataset& d, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
    throw std::invalid_argument("stratified_split: test_fraction must be in (0,1)");
  if (!(spec.val_fraction_of_train > 0.0 && spec.val_fraction_of_train < 1.0))
    throw std::invalid_argument(
        "stratified_split: val_fraction_of_train must be in (0,1)");

  // documents per class, in original order; classes in canonical order
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < d.documents.size(); ++i)
    by_class[d.documents[i].label].push_back(i);

  for (const auto& [label, idx] : by_class)
    if (static_cast<int>(idx.size()) < spec.min_per_class)
      throw std::runtime_error("stratified_split: class '" + label +
                               "' has fewer than min_per_class documents");

  enum : char { kTrain = 0, kVal = 1, kTest = 2 };
  std::vector<char> assignment(d.documents.size(), kTrain);
  std::mt19937_64 rng(spec.seed);

  for (auto& [label, idx] : by_class) {
    const std::int64_t n = static_cast<std::int64_t>(idx.size());
    std::int64_t n_test = util::round_half_up(static_cast<double>(n) * spec.test_fraction);
    std::int64_t rem = n - n_test;
    std::int64_t n_val =
        util::round_half_up(static_cast<double>(rem) * spec.val_fraction_of_train);
    std::int64_t n_train = rem - n_val;

    // keep every split non-empty, shifting one document at a time from the
    // currently largest split
    auto counts = std::array{&n_train, &n_val, &n_test};
    for (auto* empty_slot : counts) {
      while (*empty_slot == 0) {
        auto donor = std::max_element(counts.begin(), counts.end(),
                                      [](auto* a, auto* b) { return *a < *b; });
        if (**donor <= 1)
          throw std::runtime_error("stratified_split: class '" + label +
                                   "' is too small to appear in all three splits");
        --(**donor);
        ++(*empty_slot);
      }
    }

    util::deterministic_shuffle(idx, rng);
    for (std::int64_t i = 0; i < n; ++i) {
      char split = i < n_test ? kTest : (i < n_test + n_val ? kVal : kTrain);
      assignment[idx[i]] = split;
    }
  }

  std::vector<Document> train, val, test;
  for (std::size_t i = 0; i < d.documents.size(); ++i) {
    switch (assignment[i]) {
      case kTest: test.push_back(d.documents[i]); break;
      case kVal: val.push_back(d.documents[i]); break;
      default: train.push_back(d.documents[i]); break;
    }
  }
  return {make_dataset(std::move(train)), make_dataset(std::move(val)),
          make_dataset(std::move(test))};
}

namespace {

// Generated words avoid 'g', 'i' and 's' in their variable part so the
// lemmatizer's suffix rules never fire on them.
constexpr char kSynthAlphabet[] = "abcdefhjklmnopqrtuvwxyz";
constexpr int kSynthBase = 23;

std::string encode_base(int value, int width) {
  std::string out(width, kSynthAlphabet[0]);
  for (int i = width - 1; i >= 0; --i) {
    out[i] = kSynthAlphabet[value % kSynthBase];
    value /= kSynthBase;
  }
  return out;
}

std::string signature_word(int class_index, int word_index) {
  return "zq" + encode_base(class_index, 2) + encode_base(word_index, 3);
}

std::string shared_word(int word_index) {
  return "fil" + encode_base(word_index, 3);
}

}  // namespace

std::vector<std::string> synth_signature_vocab(int class_index,
                                               int vocab_per_class) {
  std::vector<std::string> v;
  v.reserve(vocab_per_class);
  for (int j = 0; j < vocab_per_class; ++j)
    v.push_back(signature_word(class_index, j));
  return v;
}

std::string synth_class_label(int class_index) {
  return "cat" + encode_base(class_index, 2);
}

Dataset synth_corpus(const SynthSpec& spec) {
  if (spec.n_classes < 1)
    throw std::invalid_argument("synth_corpus: n_classes must be positive");
  if (static_cast<int>(spec.docs_per_class.size()) != spec.n_classes)
    throw std::invalid_argument(
        "synth_corpus: docs_per_class must have n_classes entries");
  if (spec.vocab_per_class < 1 || spec.doc_length < 1 || spec.shared_vocab < 0)
    throw std::invalid_argument("synth_corpus: invalid generator parameters");
  if (spec.n_classes > kSynthBase * kSynthBase ||
      spec.vocab_per_class > kSynthBase * kSynthBase * kSynthBase)
    throw std::invalid_argument("synth_corpus: parameters exceed name space");

  std::mt19937_64 rng(spec.seed);
  std::vector<Document> docs;
  const int forced_signature =
      static_cast<int>(std::ceil(0.4 * spec.doc_length));

  for (int c = 0; c < spec.n_classes; ++c) {
    const std::string label = synth_class_label(c);
    for (int k = 0; k < spec.docs_per_class[c]; ++k) {
      std::vector<std::string> tokens;
      tokens.reserve(spec.doc_length);
      for (int t = 0; t < spec.doc_length; ++t) {
        bool from_signature =
            t < forced_signature || spec.shared_vocab == 0 ||
            util::uniform_unit(rng) < 0.5;
        if (from_signature) {
          tokens.push_back(signature_word(
              c, static_cast<int>(util::uniform_below(rng, spec.vocab_per_class))));
        } else {
          tokens.push_back(shared_word(
              static_cast<int>(util::uniform_below(rng, spec.shared_vocab))));
        }
      }
      util::deterministic_shuffle(tokens, rng);
      std::string text;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) text.push_back(' ');
        text += tokens[i];
      }
      std::ostringstream id;
      id << "c" << c << "d" << k;
      docs.push_back({id.str(), std::move(text), label});
    }
  }
  return make_dataset(std::move(docs));
}

}  // namespace fundcat::corpus
