#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "opensetiq/corpus.hpp"

namespace osiq {

struct VectorizerSpec {
    int dim = 2048;                       // >= 16
    std::vector<int> ngram_orders = {1, 2};
    std::uint64_t hash_seed = 0;
    bool lowercase = true;
};

/// Dense document representation. Unit L2 norm, except the all-zero
/// vector produced by empty text.
struct FeatureVector {
    Eigen::VectorXd values;
    std::string source_id;  // originating document, may be empty
};

/// Canonical-composes Latin sequences, optionally lowercases, then splits
/// on Unicode whitespace. Punctuation stays attached to its token.
std::vector<std::string> tokenize(const std::string& text, bool lowercase = true);

/// Signed feature hashing over token n-grams: each n-gram lands at
/// hash % dim with sign taken from the hash's top bit, counts are
/// accumulated and the result L2-normalized.
FeatureVector vectorize(const Document& doc, const VectorizerSpec& spec);

/// Seeded 64-bit string hash used by the vectorizer (splitmix-mixed FNV-1a).
std::uint64_t hash_ngram(const std::string& ngram, std::uint64_t seed);

void validate(const VectorizerSpec& spec);

}  // namespace osiq
