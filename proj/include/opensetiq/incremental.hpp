#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "opensetiq/classifier.hpp"
#include "opensetiq/clustering.hpp"
#include "opensetiq/corpus.hpp"
#include "opensetiq/metrics.hpp"
#include "opensetiq/novelty.hpp"

namespace osiq {

struct LoopConfig {
    int k_seed = 5;
    int k_unknown = 3;   // pool classes injected per test round
    int k_new = 1;       // dominant clusters promoted per round, <= k_unknown
    int n_max = 1;       // iteration cap
    double delta = 0.4;  // stop when post-retrain macro-F1 falls below this
    int m_min = 10;      // dominant-cluster size floor, >= 3
    double train_fraction = 0.7;
    VectorizerSpec vectorizer;
    NetworkConfig network;       // input_dim is forced to vectorizer.dim
    EnsembleConfig ensemble;
    ClusterParams clustering;    // k defaults to the round's k_unknown
    std::uint64_t seed = 0;
};

void validate(const LoopConfig& config);

struct PromotedCluster {
    std::string label;           // synthetic "novel-<iter>-<rank>"
    std::size_t size = 0;
    std::string majority_truth;  // ground-truth majority, evaluation only
};

struct IterationReport {
    int iteration = 0;  // 1-based
    // closed-set argmax over the full open-set test mix, before exposure
    double pre_accuracy = 0.0;
    double pre_macro_f1 = 0.0;
    // same evaluation after promotion + retrain (promoted samples excluded:
    // they are training data now)
    double post_accuracy = 0.0;
    double post_macro_f1 = 0.0;
    double epsilon_os = 0.0;
    double davies_bouldin = 0.0;  // NaN when the outlier set yields < 2 clusters
    double v_measure = 0.0;       // NaN when there was nothing to cluster
    std::vector<IcaBreakdown> promoted_ica;
    double ica = 0.0;             // mean over promoted clusters, NaN when none
    std::vector<PromotedCluster> promoted;
    std::size_t outlier_count = 0;
    std::size_t test_count = 0;
};

/// The evolving loop state. Training documents carry current labels
/// (pseudo-labels for promoted clusters); held-out documents keep their
/// true author labels and feed every later test round.
struct LearningState {
    std::vector<std::string> current_classes;
    std::vector<Document> train_docs;
    std::vector<Document> heldout_docs;
    std::map<std::string, std::string> promoted_majority;  // pseudo -> majority author
    std::vector<std::string> remaining_pool;
    int iteration = 0;  // completed iterations
    std::vector<IterationReport> history;

    /// Truth labels the classifier can currently express: seed classes
    /// plus the majority authors behind promoted pseudo-classes.
    std::set<std::string> known_truth_set() const;
};

/// Vectorizes each document once; safe because documents are immutable.
class FeatureCache {
public:
    explicit FeatureCache(const VectorizerSpec& spec) : spec_(spec) {}
    const FeatureVector& get(const Document& doc);

private:
    VectorizerSpec spec_;
    std::map<std::string, FeatureVector> cache_;
};

/// Seed-class pick + per-class train/held-out split.
LearningState initialize_state(const LabeledCorpus& corpus, const LoopConfig& config);

struct IterationOutcome {
    IterationReport report;
    TrainedClassifier post_model;  // retrained with the promoted classes
};

/// Test seams: either component of the discovery path can be replaced by
/// an oracle (the loop-contract tests use ground-truth doubles here).
struct IterationHooks {
    /// Per-test-document outlier flag; replaces the fitted ensemble.
    std::function<std::vector<bool>(const std::vector<Document>& test_docs)> detect;
    /// Assignments (-1 = noise) over the outlier list, which indexes into
    /// test_docs; replaces the clustering algorithm.
    std::function<std::vector<int>(const std::vector<std::size_t>& outlier_test_index,
                                   const std::vector<Document>& test_docs)>
        cluster;
};

/// What the round's outlier set looked like; handed to the observer so the
/// harness can emit plot data without rerunning anything.
struct IterationArtifacts {
    int iteration = 0;
    std::vector<std::string> outlier_ids;    // document ids
    std::vector<std::string> outlier_truth;  // author labels, evaluation only
    std::vector<int> cluster_assignments;    // -1 = noise / unclustered
    std::vector<Eigen::VectorXd> outlier_features;  // normalized penultimate
};
using IterationObserver = std::function<void(const IterationArtifacts&)>;

/// One full round: train, open-set test, cluster the outliers, promote
/// dominant clusters under pseudo-labels, retrain, report. Ground-truth
/// labels of injected classes are used only inside the report. Throws
/// PartitionError when the pool has fewer than k_unknown classes left.
/// `carried_model` may pass the previous round's post model (identical to
/// what this round would train, so retraining is skipped).
IterationOutcome run_iteration(LearningState& state, const LabeledCorpus& corpus,
                               const LoopConfig& config, FeatureCache& cache,
                               const TrainedClassifier* carried_model = nullptr,
                               const IterationObserver& observer = {},
                               const IterationHooks* hooks = nullptr);

struct RunResult {
    TrainedClassifier model;
    std::vector<IterationReport> reports;
    LearningState state;
};

/// Runs iterations until the pool is exhausted, n_max is reached, or the
/// post-retrain macro-F1 drops below delta. When `checkpoint_dir` is given,
/// the state manifest and classifier checkpoint are written after every
/// iteration.
RunResult run(const LabeledCorpus& corpus, const LoopConfig& config,
              const std::string& checkpoint_dir = "",
              const IterationObserver& observer = {});

/// Continues a loaded state; used for resume.
RunResult run_from(LearningState state, const LabeledCorpus& corpus, const LoopConfig& config,
                   const std::string& checkpoint_dir = "",
                   const IterationObserver& observer = {});

std::string state_to_json(const LearningState& state);
/// Documents are stored as (id, label) pairs; text is resolved from the
/// corpus, which must contain every referenced id.
LearningState state_from_json(const std::string& json_text, const LabeledCorpus& corpus);

void save_state(const std::string& dir, const LearningState& state,
                const TrainedClassifier& model);
LearningState load_state(const std::string& dir, const LabeledCorpus& corpus);

}  // namespace osiq
