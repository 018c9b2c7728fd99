#include "opensetiq/features.hpp"

#include "opensetiq/error.hpp"
#include "opensetiq/rng.hpp"
#include "opensetiq/unicode.hpp"

namespace osiq {

void validate(const VectorizerSpec& spec) {
    if (spec.dim < 16) throw ParamError("vectorizer dim must be >= 16");
    if (spec.ngram_orders.empty()) throw ParamError("ngram_orders must be non-empty");
    for (int n : spec.ngram_orders) {
        if (n < 1) throw ParamError("every n-gram order must be >= 1");
    }
}

std::vector<std::string> tokenize(const std::string& text, bool lowercase) {
    auto points = unicode::decode_utf8(text);
    unicode::compose_latin(points);
    if (lowercase) {
        for (char32_t& cp : points) cp = unicode::to_lower(cp);
    }
    std::vector<std::string> tokens;
    std::vector<char32_t> current;
    for (char32_t cp : points) {
        if (unicode::is_space(cp)) {
            if (!current.empty()) {
                tokens.push_back(unicode::encode_utf8(current));
                current.clear();
            }
        } else {
            current.push_back(cp);
        }
    }
    if (!current.empty()) tokens.push_back(unicode::encode_utf8(current));
    return tokens;
}

std::uint64_t hash_ngram(const std::string& ngram, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
    for (unsigned char c : ngram) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h);
}

FeatureVector vectorize(const Document& doc, const VectorizerSpec& spec) {
    validate(spec);
    const auto tokens = tokenize(doc.text, spec.lowercase);

    FeatureVector fv;
    fv.source_id = doc.id;
    fv.values = Eigen::VectorXd::Zero(spec.dim);

    for (int order : spec.ngram_orders) {
        const auto n = static_cast<std::size_t>(order);
        if (tokens.size() < n) continue;
        // order participates in the seed so equal text at different orders
        // cannot collide trivially
        const std::uint64_t order_seed = derive_seed(spec.hash_seed, static_cast<std::uint64_t>(order));
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string gram = tokens[i];
            for (std::size_t k = 1; k < n; ++k) {
                gram.push_back('\x1f');
                gram += tokens[i + k];
            }
            const std::uint64_t h = hash_ngram(gram, order_seed);
            const auto index = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(spec.dim));
            const double sign = (h >> 63) ? -1.0 : 1.0;
            fv.values[index] += sign;
        }
    }

    const double norm = fv.values.norm();
    if (norm > 0.0) fv.values /= norm;
    return fv;
}

}  // namespace osiq
