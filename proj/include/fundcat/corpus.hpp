#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fundcat::corpus {

struct Document {
  std::string id;
  std::string text;
  std::string label;
};

/// Labeled corpus. `labels` is the distinct label set in lexicographic
/// order; that order is the canonical class index order used by every
/// matrix and report downstream.
struct Dataset {
  std::vector<Document> documents;
  std::vector<std::string> labels;

  /// Canonical class index of a label, -1 if absent.
  int label_index(const std::string& label) const;
};

/// Builds a Dataset from documents, collecting and sorting the label set.
Dataset make_dataset(std::vector<Document> documents);

enum class DataFormat { jsonl, csv };

struct LoadStats {
  std::size_t dropped = 0;  // records with missing/empty text or label
};

/// Reads a dataset file. Line-delimited JSON ({"id","text","label"} per
/// line) is the canonical format; CSV with an id,text,label header is also
/// accepted. Records with missing or empty text/label are dropped and
/// counted in `stats`. Malformed records and duplicate ids are errors.
Dataset load_dataset(const std::string& path, DataFormat format,
                     LoadStats* stats = nullptr);

/// Writes a dataset in the canonical line-delimited JSON format.
void save_dataset_jsonl(const Dataset& d, const std::string& path);

/// Removes every document whose class has fewer than min_per_class members
/// and recomputes the label set. Errors if nothing is left.
Dataset clean_dataset(const Dataset& d, int min_per_class);

struct SplitSpec {
  double test_fraction = 0.25;
  double val_fraction_of_train = 0.15;
  std::uint64_t seed = 0;
  int min_per_class = 9;
};

struct DatasetSplits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Stratified three-way split. Per class, the test count is
/// round-half-up(class_size * test_fraction) and the validation count is
/// round-half-up(remaining * val_fraction_of_train); a +-1 adjustment keeps
/// every class present in all three splits. Deterministic given the seed.
/// Throws if a class is too small to land in all three splits.
DatasetSplits stratified_split(const Dataset& d, const SplitSpec& spec);

struct SynthSpec {
  int n_classes = 10;
  std::vector<int> docs_per_class = std::vector<int>(10, 40);  // n_classes entries
  int vocab_per_class = 20;
  int shared_vocab = 50;
  int doc_length = 40;  // tokens per document
  std::uint64_t seed = 0;
};

/// Generates a labeled corpus with a disjoint signature vocabulary planted
/// per class plus shared filler terms. At least 40% of each document's
/// tokens come from its class signature. Deterministic given the seed; at
/// the defaults documents average roughly 300 characters.
Dataset synth_corpus(const SynthSpec& spec);

/// Ground truth of the generator, used by tests: the signature vocabulary
/// of a class and the label string for a class index.
std::vector<std::string> synth_signature_vocab(int class_index,
                                               int vocab_per_class);
std::string synth_class_label(int class_index);

}  // namespace fundcat::corpus
