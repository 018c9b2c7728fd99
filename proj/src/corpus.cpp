#include "opensetiq/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "opensetiq/csv.hpp"
#include "opensetiq/error.hpp"
#include "opensetiq/rng.hpp"

namespace fs = std::filesystem;

namespace osiq {

bool LabeledCorpus::has_class(const std::string& label) const {
    return std::find(classes.begin(), classes.end(), label) != classes.end();
}

std::vector<const Document*> LabeledCorpus::documents_of(const std::string& label) const {
    std::vector<const Document*> out;
    for (const Document& d : documents) {
        if (d.label == label) out.push_back(&d);
    }
    return out;
}

LabeledCorpus make_corpus(std::vector<Document> documents) {
    if (documents.empty()) throw FormatError("corpus has no documents");
    std::set<std::string> seen_ids;
    LabeledCorpus corpus;
    for (Document& d : documents) {
        if (d.label.empty()) throw FormatError("document '" + d.id + "' has an empty label");
        if (!seen_ids.insert(d.id).second) throw FormatError("duplicate document id: " + d.id);
        if (!corpus.has_class(d.label)) corpus.classes.push_back(d.label);
    }
    corpus.documents = std::move(documents);
    return corpus;
}

namespace {

LabeledCorpus load_csv_corpus(const std::string& path) {
    const auto rows = csv::read_file(path);
    if (rows.empty()) throw FormatError(path + ": empty CSV");
    const csv::Row expected_header = {"id", "label", "text"};
    if (rows[0] != expected_header) {
        throw FormatError(path + ": header must be exactly 'id,label,text'");
    }
    std::vector<Document> docs;
    docs.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 3) {
            throw FormatError(path + ": row " + std::to_string(i + 1) + " has " +
                              std::to_string(rows[i].size()) + " fields, expected 3");
        }
        docs.push_back({rows[i][0], rows[i][2], rows[i][1]});
    }
    return make_corpus(std::move(docs));
}

LabeledCorpus load_directory_corpus(const std::string& path) {
    if (!fs::is_directory(path)) throw FormatError(path + ": not a directory");
    std::vector<std::string> authors;
    for (const auto& entry : fs::directory_iterator(path)) {
        if (entry.is_directory()) authors.push_back(entry.path().filename().string());
    }
    std::sort(authors.begin(), authors.end());
    std::vector<Document> docs;
    for (const std::string& author : authors) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(fs::path(path) / author)) {
            if (entry.is_regular_file() && entry.path().extension() == ".txt") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const fs::path& file : files) {
            std::ifstream in(file, std::ios::binary);
            if (!in) throw FormatError("cannot read " + file.string());
            std::ostringstream buf;
            buf << in.rdbuf();
            docs.push_back({author + "/" + file.stem().string(), buf.str(), author});
        }
    }
    if (docs.empty()) throw FormatError(path + ": no <author>/<doc>.txt files found");
    return make_corpus(std::move(docs));
}

}  // namespace

LabeledCorpus load_corpus(const std::string& path, CorpusFormat format) {
    if (!fs::exists(path)) throw FormatError("no such path: " + path);
    switch (format) {
        case CorpusFormat::csv:
            return load_csv_corpus(path);
        case CorpusFormat::directory_per_author:
            return load_directory_corpus(path);
    }
    throw ParamError("unknown corpus format");
}

void save_corpus_csv(const std::string& path, const LabeledCorpus& corpus) {
    std::vector<csv::Row> rows;
    rows.reserve(corpus.documents.size() + 1);
    rows.push_back({"id", "label", "text"});
    for (const Document& d : corpus.documents) {
        rows.push_back({d.id, d.label, d.text});
    }
    csv::write_file(path, rows);
}

PartitionResult make_partition(const LabeledCorpus& corpus, const SplitSpec& spec,
                               std::uint64_t seed) {
    if (spec.k_seed < 2) throw ParamError("k_seed must be >= 2");
    if (spec.k_unknown < 1) throw ParamError("k_unknown must be >= 1");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw ParamError("train_fraction must be in (0,1)");
    }
    const std::size_t wanted =
        static_cast<std::size_t>(spec.k_seed) + static_cast<std::size_t>(spec.k_unknown);
    if (corpus.classes.size() < wanted) {
        throw PartitionError("corpus has " + std::to_string(corpus.classes.size()) +
                             " classes, need at least " + std::to_string(wanted));
    }

    Rng rng(derive_seed(seed, 0xC1A55E5));
    const auto picks = rng.sample_indices(corpus.classes.size(), wanted);

    PartitionResult result;
    result.partition.seed = seed;
    for (std::size_t i = 0; i < picks.size(); ++i) {
        const std::string& label = corpus.classes[picks[i]];
        if (i < static_cast<std::size_t>(spec.k_seed)) {
            result.partition.known.push_back(label);
        } else {
            result.partition.unknown_pool.push_back(label);
        }
    }

    for (const std::string& label : result.partition.known) {
        const auto docs = corpus.documents_of(label);
        std::vector<std::size_t> order(docs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng class_rng(derive_seed(seed, splitmix64(std::hash<std::string>{}(label))));
        class_rng.shuffle(order);
        // at least one document on each side of the split
        std::size_t n_train = static_cast<std::size_t>(
            spec.train_fraction * static_cast<double>(docs.size()));
        n_train = std::clamp<std::size_t>(n_train, 1, docs.size() - 1);
        for (std::size_t i = 0; i < order.size(); ++i) {
            (i < n_train ? result.train : result.test).push_back(*docs[order[i]]);
        }
    }
    for (const std::string& label : result.partition.unknown_pool) {
        for (const Document* d : corpus.documents_of(label)) result.test.push_back(*d);
    }
    return result;
}

namespace {

std::string padded_index(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

LabeledCorpus generate_synthetic(const SyntheticSpec& spec) {
    if (spec.num_authors < 1 || spec.docs_per_author < 1 || spec.doc_len < 1 ||
        spec.vocab_size < 1) {
        throw ParamError("synthetic corpus counts must all be >= 1");
    }
    if (!(spec.style_skew > 0.0 && spec.style_skew <= 1.0)) {
        throw ParamError("style_skew must be in (0,1]");
    }

    // Zipf-like shared base distribution over the vocabulary.
    std::vector<double> base(static_cast<std::size_t>(spec.vocab_size));
    double base_total = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        base[i] = 1.0 / static_cast<double>(i + 10);
        base_total += base[i];
    }
    for (double& b : base) b /= base_total;

    // Dirichlet concentration: high skew -> low concentration -> authors
    // far from the base (distinct); skew -> 0 -> authors collapse onto it.
    const double concentration =
        static_cast<double>(spec.vocab_size) * (1.0 - spec.style_skew) / spec.style_skew + 1.0;
    std::vector<double> alpha(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) alpha[i] = base[i] * concentration;

    const int author_width = static_cast<int>(std::to_string(spec.num_authors - 1).size());
    const int doc_width = static_cast<int>(std::to_string(spec.docs_per_author - 1).size());

    std::vector<Document> docs;
    docs.reserve(static_cast<std::size_t>(spec.num_authors) *
                 static_cast<std::size_t>(spec.docs_per_author));
    for (int a = 0; a < spec.num_authors; ++a) {
        const std::string label = "author" + padded_index(a, author_width);
        Rng author_rng(derive_seed(spec.seed, 0xA0000000ULL + static_cast<std::uint64_t>(a)));
        const std::vector<double> dist = author_rng.dirichlet(alpha);
        std::vector<double> cumulative(dist.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < dist.size(); ++i) {
            acc += dist[i];
            cumulative[i] = acc;
        }
        cumulative.back() = 1.0;

        for (int d = 0; d < spec.docs_per_author; ++d) {
            std::string text;
            text.reserve(static_cast<std::size_t>(spec.doc_len) * 6);
            for (int t = 0; t < spec.doc_len; ++t) {
                const double u = author_rng.uniform();
                const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
                const std::size_t word =
                    static_cast<std::size_t>(std::distance(cumulative.begin(), it));
                if (t) text.push_back(' ');
                text += "w" + std::to_string(std::min(word, dist.size() - 1));
            }
            docs.push_back({label + "-d" + padded_index(d, doc_width), std::move(text), label});
        }
    }
    return make_corpus(std::move(docs));
}

}  // namespace osiq
