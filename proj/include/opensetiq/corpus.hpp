#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace osiq {

/// One labeled text sample.
struct Document {
    std::string id;     // unique within a corpus
    std::string text;   // UTF-8
    std::string label;  // author class, non-empty
};

/// Documents plus the class inventory. `classes` lists the distinct
/// labels in order of first appearance and always matches the label set
/// actually present in `documents`.
struct LabeledCorpus {
    std::vector<Document> documents;
    std::vector<std::string> classes;

    bool has_class(const std::string& label) const;
    std::vector<const Document*> documents_of(const std::string& label) const;
};

/// Builds the class list from documents and checks invariants
/// (unique ids, non-empty labels, non-empty corpus).
LabeledCorpus make_corpus(std::vector<Document> documents);

enum class CorpusFormat { csv, directory_per_author };

/// CSV needs the exact header `id,label,text` (RFC-4180 quoting).
/// Directory layout is `<author>/<doc>.txt`; authors and files are read
/// in lexicographic order so document order is stable.
LabeledCorpus load_corpus(const std::string& path, CorpusFormat format);

/// Writes a corpus in the CSV schema accepted by load_corpus.
void save_corpus_csv(const std::string& path, const LabeledCorpus& corpus);

/// Known/unknown class split for one open-set round.
struct ClassPartition {
    std::vector<std::string> known;         // trained classes
    std::vector<std::string> unknown_pool;  // disjoint from known
    std::uint64_t seed = 0;
};

struct SplitSpec {
    int k_seed = 5;                 // >= 2
    int k_unknown = 3;              // >= 1
    double train_fraction = 0.7;    // in (0, 1)
};

struct PartitionResult {
    std::vector<Document> train;  // known classes only, train_fraction of each
    std::vector<Document> test;   // held-out known docs + every unknown-class doc
    ClassPartition partition;
};

/// Seeded random known/unknown selection and per-class train/test split.
/// Throws PartitionError when the corpus has fewer than
/// k_seed + k_unknown classes.
PartitionResult make_partition(const LabeledCorpus& corpus, const SplitSpec& spec,
                               std::uint64_t seed);

struct SyntheticSpec {
    int num_authors = 50;
    int docs_per_author = 100;
    int doc_len = 200;       // tokens per document
    int vocab_size = 5000;
    double style_skew = 0.5; // in (0, 1]; higher = more distinct authors
    std::uint64_t seed = 0;
};

/// Synthetic authorship corpus. Each author draws its own unigram
/// distribution from a Dirichlet around a shared Zipf-like base; documents
/// sample tokens i.i.d. from it. style_skew near 1 gives near-disjoint
/// author vocab usage, near 0 makes authors indistinguishable. Pure
/// function of the spec: identical arguments give identical corpora.
LabeledCorpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace osiq
