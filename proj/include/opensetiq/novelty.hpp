#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "opensetiq/classifier.hpp"

namespace osiq {

struct EnsembleConfig {
    int lof_k = 20;
    double lof_threshold = 1.5;     // floor under the calibrated LOF cut
    int iforest_trees = 100;
    int iforest_subsample = 256;
    int weibull_tail = 20;          // largest distances per class used in the fit
    double calibration_quantile = 0.99;  // q in (0, 1]
    std::uint64_t seed = 0;
};

struct WeibullParams {
    double shape = 1.0;
    double scale = 1.0;
};

/// sqrt((x-mu)^T sigma_inv (x-mu)); sigma_inv must be SPD.
double mahalanobis_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                            const Eigen::MatrixXd& sigma_inv);

/// Two-parameter Weibull MLE: safeguarded Newton on the shape profile
/// equation, then the closed-form scale. Needs >= 3 strictly positive
/// samples. Near-identical samples return the documented degenerate fit
/// (shape capped at 50, scale ~ the common value).
WeibullParams weibull_fit(const std::vector<double>& samples);

double weibull_cdf(const WeibullParams& params, double x);

/// Per-class means with one pooled shrinkage covariance. The shrinkage
/// target is (trace/d)*I so Mahalanobis distances survive orthogonal maps
/// of the feature space; each class carries a Weibull over the tail of its
/// own training distances.
struct MahalanobisWeibull {
    std::vector<std::string> classes;  // sorted
    std::vector<Eigen::VectorXd> means;
    Eigen::MatrixXd cov_inverse;
    std::vector<WeibullParams> tails;

    /// min over classes of the tail CDF at the class distance: close to 1
    /// only when x sits in the extreme tail of every class.
    double score(const Eigen::VectorXd& x) const;
};

/// Brute-force LOF with distances floored at 1e-12 so duplicates stay finite.
struct LofModel {
    std::vector<Eigen::VectorXd> train;
    int k = 0;
    std::vector<double> k_distance;
    std::vector<double> lrd;

    double score(const Eigen::VectorXd& x) const;
};

struct IsolationTree {
    struct Node {
        int feature = -1;      // -1 marks a leaf
        double cutoff = 0.0;
        int left = -1, right = -1;
        int size = 0;          // leaf population
    };
    std::vector<Node> nodes;  // node 0 is the root
};

struct IsolationForest {
    std::vector<IsolationTree> trees;
    int subsample = 0;

    double score(const Eigen::VectorXd& x) const;  // in (0,1); higher = more anomalous
    double mean_path_length(const Eigen::VectorXd& x) const;
};

/// Average unsuccessful-search path length c(n); the score normalizer.
double iforest_path_normalizer(int n);

IsolationForest fit_iforest(const std::vector<Eigen::VectorXd>& points, int trees, int subsample,
                            std::uint64_t seed);

/// One sample's vote. Outlier when at least two detectors flag it.
struct Verdict {
    bool mahalanobis = false;
    bool lof = false;
    bool iforest = false;
    bool is_outlier = false;
    double mahalanobis_score = 0.0;
    double lof_score = 0.0;
    double iforest_score = 0.0;
};

Verdict make_verdict(bool mahal, bool lof, bool iforest, double s_mahal = 0.0,
                     double s_lof = 0.0, double s_iforest = 0.0);

struct FittedEnsemble {
    MahalanobisWeibull mahal;
    LofModel lof;
    IsolationForest forest;
    // thresholds calibrated at the q-quantile of the training scores; the
    // Mahalanobis cut is additionally floored at q itself (its score is
    // already a tail probability) and the LOF cut at config.lof_threshold.
    double mahal_cut = 0.0;
    double lof_cut = 0.0;
    double iforest_cut = 0.0;
    EnsembleConfig config;
    std::optional<TrainedClassifier> classifier;  // penultimate space + labels

    Verdict judge(const Eigen::VectorXd& x) const;
};

/// Fits all three detectors in the space of the given vectors and
/// calibrates the thresholds. Every class needs >= 3 samples and the total
/// must exceed lof_k. Deterministic given config.seed.
FittedEnsemble fit_ensemble(const std::map<std::string, std::vector<Eigen::VectorXd>>& by_class,
                            const EnsembleConfig& config);

/// Maps training samples through the classifier's penultimate layer,
/// groups them by label and fits; detect() then judges raw feature vectors.
FittedEnsemble fit_ensemble(const TrainedClassifier& classifier,
                            const std::vector<TrainSample>& samples,
                            const EnsembleConfig& config);

struct DetectionResult {
    struct Accepted {
        std::size_t index = 0;  // position in the test list
        std::string label;      // classifier argmax
    };
    struct Outlier {
        std::size_t index = 0;
        Verdict verdict;
    };
    std::vector<Accepted> accepted;
    std::vector<Outlier> outliers;
};

/// Scores every test vector with the 2-of-3 vote; accepted samples get the
/// classifier's argmax label. The two lists partition the input.
DetectionResult detect(const FittedEnsemble& ensemble, const std::vector<FeatureVector>& test);

/// Stores the fit inputs and calibrated cuts; loading refits
/// deterministically and restores an identical ensemble.
std::string ensemble_to_json(const FittedEnsemble& ensemble,
                             const std::map<std::string, std::vector<Eigen::VectorXd>>& by_class);
FittedEnsemble ensemble_from_json(const std::string& json_text);

}  // namespace osiq
