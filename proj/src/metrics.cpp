#include "opensetiq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "opensetiq/error.hpp"

namespace osiq {

double davies_bouldin(const ClusterSet& cs) {
    if (cs.n < 2) throw MetricError("Davies-Bouldin needs at least 2 clusters");
    double total = 0.0;
    for (int i = 0; i < cs.n; ++i) {
        double worst = 0.0;
        for (int j = 0; j < cs.n; ++j) {
            if (j == i) continue;
            const double d = (cs.centroids[static_cast<std::size_t>(i)] -
                              cs.centroids[static_cast<std::size_t>(j)])
                                 .norm();
            if (d == 0.0) {
                throw MetricError("Davies-Bouldin: clusters " + std::to_string(i) + " and " +
                                  std::to_string(j) + " have coincident centroids");
            }
            worst = std::max(worst, (cs.dispersions[static_cast<std::size_t>(i)] +
                                     cs.dispersions[static_cast<std::size_t>(j)]) /
                                        d);
        }
        total += worst;
    }
    return total / static_cast<double>(cs.n);
}

namespace {

double entropy_from_counts(const std::map<std::string, long>& counts, double total) {
    double h = 0.0;
    for (const auto& [_, c] : counts) {
        if (c > 0) {
            const double p = static_cast<double>(c) / total;
            h -= p * std::log(p);
        }
    }
    return h;
}

}  // namespace

double v_measure(const std::vector<int>& assignments, const std::vector<std::string>& truth,
                 const VMeasureParams& params) {
    if (assignments.empty() || assignments.size() != truth.size()) {
        throw MetricError("v_measure: inputs must be equal-length and non-empty");
    }
    if (params.beta < 0.0) throw ParamError("v_measure: beta must be >= 0");

    const double n = static_cast<double>(assignments.size());
    std::map<std::string, long> class_counts;
    std::map<int, long> cluster_counts;
    std::map<std::pair<int, std::string>, long> joint;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        ++class_counts[truth[i]];
        ++cluster_counts[assignments[i]];
        ++joint[{assignments[i], truth[i]}];
    }

    const double h_class = entropy_from_counts(class_counts, n);
    double h_class_given_cluster = 0.0;  // H(C|K)
    double h_cluster_given_class = 0.0;  // H(K|C)
    for (const auto& [key, c] : joint) {
        const auto& [cluster_id, class_id] = key;
        const double p = static_cast<double>(c) / n;
        h_class_given_cluster -= p * std::log(static_cast<double>(c) /
                                              static_cast<double>(cluster_counts[cluster_id]));
        h_cluster_given_class -=
            p * std::log(static_cast<double>(c) / static_cast<double>(class_counts[class_id]));
    }
    // completeness normalizer: the largest H(K|C) any clustering of these
    // classes can produce (every class fully shattered into singletons), so
    // the all-singleton clustering scores exactly 0
    double h_split_max = 0.0;
    for (const auto& [_, c] : class_counts) {
        h_split_max += static_cast<double>(c) / n * std::log(static_cast<double>(c));
    }

    const double homogeneity = h_class > 0.0 ? 1.0 - h_class_given_cluster / h_class : 1.0;
    const double completeness =
        h_split_max > 0.0 ? 1.0 - h_cluster_given_class / h_split_max : 1.0;
    const double denom = params.beta * homogeneity + completeness;
    if (denom <= 0.0) return 0.0;
    return (1.0 + params.beta) * homogeneity * completeness / denom;
}

double closed_error(const std::vector<std::string>& predictions,
                    const std::vector<std::string>& truth) {
    if (predictions.empty() || predictions.size() != truth.size()) {
        throw MetricError("closed_error: inputs must be equal-length and non-empty");
    }
    long wrong = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] != truth[i]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(predictions.size());
}

double open_set_error(const std::vector<std::string>& predictions, const GroundTruth& truth) {
    if (predictions.size() != truth.labels.size()) {
        throw MetricError("open_set_error: predictions do not match ground truth size");
    }
    long known = 0, known_wrong = 0, unknown = 0, unknown_missed = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (truth.unknown(i)) {
            ++unknown;
            if (predictions[i] != kUnknownLabel) ++unknown_missed;
        } else {
            ++known;
            if (predictions[i] != truth.labels[i]) ++known_wrong;
        }
    }
    if (known == 0 || unknown == 0) {
        throw MetricError("open_set_error needs at least one known and one unknown sample");
    }
    return static_cast<double>(known_wrong) / static_cast<double>(known) +
           static_cast<double>(unknown_missed) / static_cast<double>(unknown);
}

IcaBreakdown ica_components(const std::vector<std::size_t>& members, const GroundTruth& truth) {
    if (members.empty()) throw MetricError("ica_components: empty cluster");
    std::map<std::string, long> in_cluster;
    long unknown_members = 0;
    for (std::size_t idx : members) {
        if (idx >= truth.labels.size()) throw MetricError("ica_components: member out of range");
        ++in_cluster[truth.labels[idx]];
        if (truth.unknown(idx)) ++unknown_members;
    }
    // predominant class; std::map order makes ties lexicographic
    std::string predominant;
    long best = -1;
    for (const auto& [label, count] : in_cluster) {
        if (count > best) {
            best = count;
            predominant = label;
        }
    }
    long class_total = 0;  // N_c over the full test round
    for (const std::string& label : truth.labels) {
        if (label == predominant) ++class_total;
    }

    IcaBreakdown out;
    out.n_k = static_cast<long>(members.size());
    out.n_c_given_k = best;
    out.n_c = class_total;
    out.n_u_given_k = unknown_members;
    out.homogeneity = static_cast<double>(best) / static_cast<double>(out.n_k);
    out.completeness = static_cast<double>(best) / static_cast<double>(class_total);
    out.uia = static_cast<double>(unknown_members) / static_cast<double>(out.n_k);
    out.ica = (out.homogeneity + out.completeness + out.uia) / 3.0;
    return out;
}

double ica(const std::vector<std::vector<std::size_t>>& clusters, const GroundTruth& truth) {
    if (clusters.empty()) throw MetricError("ica: no clusters");
    double total = 0.0;
    for (const auto& members : clusters) {
        total += ica_components(members, truth).ica;
    }
    return total / static_cast<double>(clusters.size());
}

ClassificationReport classification_report(const std::vector<std::string>& predictions,
                                           const std::vector<std::string>& truth,
                                           const std::vector<std::string>& label_set) {
    if (predictions.empty() || predictions.size() != truth.size()) {
        throw MetricError("classification_report: inputs must be equal-length and non-empty");
    }
    ClassificationReport report;
    long correct = 0;
    std::map<std::string, long> tp, fp, fn, support;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        ++support[truth[i]];
        if (predictions[i] == truth[i]) {
            ++correct;
            ++tp[truth[i]];
        } else {
            ++fp[predictions[i]];
            ++fn[truth[i]];
        }
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());

    double f1_sum = 0.0;
    for (const std::string& label : label_set) {
        ClassScores scores;
        scores.label = label;
        scores.support = support.count(label) ? support[label] : 0;
        const long t = tp.count(label) ? tp[label] : 0;
        const long p_denom = t + (fp.count(label) ? fp[label] : 0);
        const long r_denom = t + (fn.count(label) ? fn[label] : 0);
        scores.precision = p_denom ? static_cast<double>(t) / static_cast<double>(p_denom) : 0.0;
        scores.recall = r_denom ? static_cast<double>(t) / static_cast<double>(r_denom) : 0.0;
        const double pr = scores.precision + scores.recall;
        scores.f1 = pr > 0.0 ? 2.0 * scores.precision * scores.recall / pr : 0.0;
        f1_sum += scores.f1;
        report.per_class.push_back(std::move(scores));
    }
    report.macro_f1 = label_set.empty() ? 0.0 : f1_sum / static_cast<double>(label_set.size());
    return report;
}

}  // namespace osiq
