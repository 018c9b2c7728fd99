#pragma once

#include <set>
#include <string>
#include <vector>

#include "opensetiq/clustering.hpp"

namespace osiq {

/// Reserved prediction label for samples the ensemble rejects.
inline constexpr const char* kUnknownLabel = "unknown";

/// Ground truth for one open-set test round. `labels[i]` is sample i's
/// true class; a sample is unknown when its label is outside `known_set`.
struct GroundTruth {
    std::vector<std::string> labels;
    std::set<std::string> known_set;

    bool unknown(std::size_t i) const { return known_set.count(labels[i]) == 0; }
};

struct VMeasureParams {
    double beta = 1.0;  // > 1 weighs completeness more heavily
};

/// Count-ratio cluster quality of one cluster (not the entropy-based
/// V-measure components: both definitions exist side by side on purpose).
struct IcaBreakdown {
    double homogeneity = 0.0;   // n_{c|k} / N_k for the predominant class c
    double completeness = 0.0;  // n_{c|k} / N_c, N_c over the full round
    double uia = 0.0;           // unknown members / N_k
    double ica = 0.0;           // mean of the three
    long n_c_given_k = 0;
    long n_k = 0;
    long n_c = 0;
    long n_u_given_k = 0;
};

/// Davies-Bouldin index from the stored centroids and dispersions:
/// (1/n) sum_i max_{j!=i} (sigma_i + sigma_j) / d(c_i, c_j). Lower is
/// better. Needs n >= 2; coincident centroids raise MetricError naming
/// the offending pair.
double davies_bouldin(const ClusterSet& cs);

/// Entropy-based homogeneity/completeness blend, computed exactly as
/// V = (1+beta)*h*c / (beta*h + c); 0 when the denominator vanishes.
/// h = 1 - H(C|K)/H(C), 1 when H(C) = 0. Completeness normalizes H(K|C)
/// by its feasible maximum given the class sizes (sum_c p(c) log n_c), so
/// the all-singleton clustering scores 0 and the all-in-one clustering 1;
/// the common H(K) normalizer cannot reach 0 there. Noise assignments (-1)
/// count as one cluster. The beta placement follows this exact formula,
/// which differs from the original V-measure's weighting.
double v_measure(const std::vector<int>& assignments, const std::vector<std::string>& truth,
                 const VMeasureParams& params = {});

/// Plain misclassification rate.
double closed_error(const std::vector<std::string>& predictions,
                    const std::vector<std::string>& truth);

/// Closed-set error over the known samples plus the fraction of unknown
/// samples not predicted as `kUnknownLabel`. Range [0, 2]. Requires at
/// least one known and one unknown sample.
double open_set_error(const std::vector<std::string>& predictions, const GroundTruth& truth);

/// Count-ratio homogeneity/completeness/unknown-identification of one
/// cluster, given member indices into the test round. Predominant-class
/// ties break lexicographically.
IcaBreakdown ica_components(const std::vector<std::size_t>& members, const GroundTruth& truth);

/// Unweighted mean of the per-cluster ICA scores.
double ica(const std::vector<std::vector<std::size_t>>& clusters, const GroundTruth& truth);

struct ClassScores {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long support = 0;  // true instances
};

struct ClassificationReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;  // unweighted mean of per-class F1 over label_set
    std::vector<ClassScores> per_class;
};

/// Accuracy plus per-class precision/recall/F1 over the given label set;
/// classes absent from both predictions and truth contribute F1 = 0.
ClassificationReport classification_report(const std::vector<std::string>& predictions,
                                           const std::vector<std::string>& truth,
                                           const std::vector<std::string>& label_set);

}  // namespace osiq
