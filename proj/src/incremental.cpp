#include "opensetiq/incremental.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "opensetiq/error.hpp"
#include "opensetiq/rng.hpp"

namespace osiq {

namespace {

constexpr std::uint64_t kTagInit = 0x5EED0001;
constexpr std::uint64_t kTagSplit = 0x5EED0002;
constexpr std::uint64_t kTagPick = 0x5EED0003;
constexpr std::uint64_t kTagNet = 0x5EED0004;
constexpr std::uint64_t kTagEnsemble = 0x5EED0005;
constexpr std::uint64_t kTagCluster = 0x5EED0006;

const double kNan = std::numeric_limits<double>::quiet_NaN();

bool is_pseudo(const std::string& label) {
    return label.rfind(kNovelPrefix, 0) == 0;
}

// model generation g: the pre model of iteration i uses g = i, its post
// model g = i + 1, so a carried post model is bit-identical to the next
// round's fresh pre model
std::uint64_t net_seed(const LoopConfig& config, int generation) {
    return derive_seed(config.seed, derive_seed(kTagNet, static_cast<std::uint64_t>(generation)));
}

std::string mapped_label(const std::string& prediction,
                         const std::map<std::string, std::string>& promoted_majority) {
    const auto it = promoted_majority.find(prediction);
    return it == promoted_majority.end() ? prediction : it->second;
}

struct Evaluation {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

Evaluation evaluate_closed(const TrainedClassifier& model, const std::vector<Document>& docs,
                           FeatureCache& cache,
                           const std::map<std::string, std::string>& promoted_majority) {
    std::vector<std::string> preds, truths;
    preds.reserve(docs.size());
    truths.reserve(docs.size());
    std::set<std::string> labels;
    for (const Document& d : docs) {
        const std::string p = mapped_label(predict(model, cache.get(d)).label, promoted_majority);
        preds.push_back(p);
        truths.push_back(d.label);
        labels.insert(p);
        labels.insert(d.label);
    }
    const ClassificationReport report = classification_report(
        preds, truths, std::vector<std::string>(labels.begin(), labels.end()));
    return {report.accuracy, report.macro_f1};
}

std::vector<TrainSample> to_samples(const std::vector<Document>& docs, FeatureCache& cache) {
    std::vector<TrainSample> out;
    out.reserve(docs.size());
    for (const Document& d : docs) out.push_back({cache.get(d), d.label});
    return out;
}

}  // namespace

void validate(const LoopConfig& config) {
    if (config.k_seed < 2) throw ParamError("loop: k_seed must be >= 2");
    if (config.k_unknown < 1) throw ParamError("loop: k_unknown must be >= 1");
    if (config.k_new < 1 || config.k_new > config.k_unknown) {
        throw ParamError("loop: k_new must be in [1, k_unknown]");
    }
    if (config.n_max < 1) throw ParamError("loop: n_max must be >= 1");
    if (config.delta < 0.0 || config.delta > 1.0) throw ParamError("loop: delta must be in [0,1]");
    if (config.m_min < 3) throw ParamError("loop: m_min must be >= 3");
    if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
        throw ParamError("loop: train_fraction must be in (0,1)");
    }
}

std::set<std::string> LearningState::known_truth_set() const {
    std::set<std::string> out;
    for (const std::string& c : current_classes) {
        if (!is_pseudo(c)) out.insert(c);
    }
    for (const auto& [_, majority] : promoted_majority) out.insert(majority);
    return out;
}

const FeatureVector& FeatureCache::get(const Document& doc) {
    const auto it = cache_.find(doc.id);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(doc.id, vectorize(doc, spec_)).first->second;
}

LearningState initialize_state(const LabeledCorpus& corpus, const LoopConfig& config) {
    validate(config);
    for (const std::string& c : corpus.classes) {
        if (is_pseudo(c)) {
            throw FormatError("corpus label '" + c + "' collides with the reserved novel- prefix");
        }
    }
    const std::size_t needed =
        static_cast<std::size_t>(config.k_seed) + static_cast<std::size_t>(config.k_unknown);
    if (corpus.classes.size() < needed) {
        throw PartitionError("corpus has " + std::to_string(corpus.classes.size()) +
                             " classes, loop needs at least " + std::to_string(needed));
    }

    LearningState state;
    Rng rng(derive_seed(config.seed, kTagInit));
    const auto picks =
        rng.sample_indices(corpus.classes.size(), static_cast<std::size_t>(config.k_seed));
    std::set<std::size_t> seed_set(picks.begin(), picks.end());
    for (std::size_t p : picks) state.current_classes.push_back(corpus.classes[p]);
    for (std::size_t i = 0; i < corpus.classes.size(); ++i) {
        if (!seed_set.count(i)) state.remaining_pool.push_back(corpus.classes[i]);
    }

    for (const std::string& label : state.current_classes) {
        const auto docs = corpus.documents_of(label);
        std::vector<std::size_t> order(docs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng class_rng(derive_seed(derive_seed(config.seed, kTagSplit),
                                  splitmix64(std::hash<std::string>{}(label))));
        class_rng.shuffle(order);
        std::size_t n_train = static_cast<std::size_t>(config.train_fraction *
                                                       static_cast<double>(docs.size()));
        n_train = std::clamp<std::size_t>(n_train, 1, docs.size() - 1);
        for (std::size_t i = 0; i < order.size(); ++i) {
            (i < n_train ? state.train_docs : state.heldout_docs).push_back(*docs[order[i]]);
        }
    }
    return state;
}

IterationOutcome run_iteration(LearningState& state, const LabeledCorpus& corpus,
                               const LoopConfig& config, FeatureCache& cache,
                               const TrainedClassifier* carried_model,
                               const IterationObserver& observer,
                               const IterationHooks* hooks) {
    validate(config);
    if (state.remaining_pool.size() < static_cast<std::size_t>(config.k_unknown)) {
        throw PartitionError("unknown-class pool exhausted");
    }
    const int iteration = state.iteration + 1;

    NetworkConfig net = config.network;
    net.input_dim = config.vectorizer.dim;

    // (1) train on the current inventory
    net.seed = net_seed(config, state.iteration);
    const std::vector<TrainSample> train_samples = to_samples(state.train_docs, cache);
    const TrainedClassifier pre_model =
        carried_model ? *carried_model : train(train_samples, net);

    // (2) inject k_unknown fresh pool classes into the test mix
    Rng pick_rng(derive_seed(config.seed,
                             derive_seed(kTagPick, static_cast<std::uint64_t>(iteration))));
    const auto pick_idx = pick_rng.sample_indices(state.remaining_pool.size(),
                                                  static_cast<std::size_t>(config.k_unknown));
    std::vector<std::string> injected;
    for (std::size_t p : pick_idx) injected.push_back(state.remaining_pool[p]);

    std::vector<Document> test_docs = state.heldout_docs;
    for (const std::string& label : injected) {
        for (const Document* d : corpus.documents_of(label)) test_docs.push_back(*d);
    }

    IterationReport report;
    report.iteration = iteration;
    report.test_count = test_docs.size();

    // (3) pre-exposure closed-set scores over the full open-set mix
    const Evaluation pre = evaluate_closed(pre_model, test_docs, cache, state.promoted_majority);
    report.pre_accuracy = pre.accuracy;
    report.pre_macro_f1 = pre.macro_f1;

    // (4) open-set detection
    std::vector<FeatureVector> test_features;
    test_features.reserve(test_docs.size());
    for (const Document& d : test_docs) test_features.push_back(cache.get(d));

    DetectionResult detection;
    if (hooks && hooks->detect) {
        const std::vector<bool> flags = hooks->detect(test_docs);
        if (flags.size() != test_docs.size()) {
            throw ShapeError("detect hook returned wrong flag count");
        }
        for (std::size_t i = 0; i < test_docs.size(); ++i) {
            if (flags[i]) {
                detection.outliers.push_back({i, make_verdict(true, true, true)});
            } else {
                detection.accepted.push_back({i, predict(pre_model, test_features[i]).label});
            }
        }
    } else {
        EnsembleConfig ens_cfg = config.ensemble;
        ens_cfg.seed = derive_seed(
            config.seed, derive_seed(kTagEnsemble, static_cast<std::uint64_t>(iteration)));
        const FittedEnsemble ensemble = fit_ensemble(pre_model, train_samples, ens_cfg);
        detection = detect(ensemble, test_features);
    }
    report.outlier_count = detection.outliers.size();

    GroundTruth truth;
    truth.known_set = state.known_truth_set();
    truth.labels.reserve(test_docs.size());
    for (const Document& d : test_docs) truth.labels.push_back(d.label);

    // (5) Eq-4 style open-set error of the pre-exposure round
    {
        std::vector<std::string> open_preds(test_docs.size());
        for (const auto& a : detection.accepted) {
            open_preds[a.index] = mapped_label(a.label, state.promoted_majority);
        }
        for (const auto& o : detection.outliers) open_preds[o.index] = kUnknownLabel;
        report.epsilon_os = open_set_error(open_preds, truth);
    }

    // (6) cluster the outlier set in normalized penultimate space
    report.davies_bouldin = kNan;
    report.v_measure = kNan;
    report.ica = kNan;
    std::vector<DominantCluster> dominant;
    std::vector<std::size_t> outlier_test_index;
    std::vector<Eigen::VectorXd> outlier_features;
    outlier_features.reserve(detection.outliers.size());
    for (const auto& o : detection.outliers) {
        Eigen::VectorXd v = penultimate(pre_model, test_features[o.index]).values;
        const double norm = v.norm();
        if (norm > 0.0) v /= norm;
        outlier_features.push_back(std::move(v));
        outlier_test_index.push_back(o.index);
    }
    std::vector<int> outlier_assignments(outlier_features.size(), -1);
    if (detection.outliers.size() >= 2) {
        ClusterSet cs;
        if (hooks && hooks->cluster) {
            cs = cluster_set_from_assignments(outlier_features,
                                              hooks->cluster(outlier_test_index, test_docs));
        } else {
            ClusterParams params = config.clustering;
            params.seed = derive_seed(
                config.seed, derive_seed(kTagCluster, static_cast<std::uint64_t>(iteration)));
            cs = cluster(outlier_features, params, config.k_unknown);
        }
        outlier_assignments = cs.assignments;

        if (cs.n >= 2) report.davies_bouldin = davies_bouldin(cs);
        if (cs.n >= 1) {
            std::vector<std::string> outlier_truth;
            outlier_truth.reserve(outlier_test_index.size());
            for (std::size_t idx : outlier_test_index) outlier_truth.push_back(truth.labels[idx]);
            report.v_measure = v_measure(cs.assignments, outlier_truth);
        }
        dominant = select_dominant(cs, config.k_new, config.m_min, iteration);
    }

    // (7) promote dominant clusters under fresh pseudo-labels
    std::set<std::string> promoted_ids;
    std::set<std::string> majorities_this_round;
    for (const DominantCluster& dc : dominant) {
        std::vector<std::size_t> member_test_idx;
        member_test_idx.reserve(dc.members.size());
        for (std::size_t m : dc.members) member_test_idx.push_back(outlier_test_index[m]);

        const IcaBreakdown breakdown = ica_components(member_test_idx, truth);
        report.promoted_ica.push_back(breakdown);

        std::map<std::string, long> counts;
        for (std::size_t idx : member_test_idx) ++counts[truth.labels[idx]];
        std::string majority;
        long best = -1;
        for (const auto& [label, count] : counts) {
            if (count > best) {
                best = count;
                majority = label;
            }
        }

        for (std::size_t idx : member_test_idx) {
            const Document& src = test_docs[idx];
            state.train_docs.push_back({src.id, src.text, dc.label});
            promoted_ids.insert(src.id);
        }
        state.current_classes.push_back(dc.label);
        state.promoted_majority[dc.label] = majority;
        majorities_this_round.insert(majority);
        report.promoted.push_back({dc.label, dc.members.size(), majority});
    }
    if (!report.promoted_ica.empty()) {
        double total = 0.0;
        for (const IcaBreakdown& b : report.promoted_ica) total += b.ica;
        report.ica = total / static_cast<double>(report.promoted_ica.size());
    }

    // (8) bookkeeping: consume the injected classes; leftovers of a
    // promoted majority author become that pseudo-class's held-out pool
    std::erase_if(state.heldout_docs,
                  [&](const Document& d) { return promoted_ids.count(d.id) > 0; });
    const std::set<std::string> injected_set(injected.begin(), injected.end());
    for (const Document& d : test_docs) {
        if (promoted_ids.count(d.id)) continue;
        if (injected_set.count(d.label) && majorities_this_round.count(d.label)) {
            state.heldout_docs.push_back(d);
        }
    }
    std::erase_if(state.remaining_pool,
                  [&](const std::string& c) { return injected_set.count(c) > 0; });

    // (9) retrain with the enlarged inventory and score the held-back mix
    net.seed = net_seed(config, state.iteration + 1);
    TrainedClassifier post_model = train(to_samples(state.train_docs, cache), net);
    std::vector<Document> post_eval_docs;
    for (const Document& d : test_docs) {
        if (!promoted_ids.count(d.id)) post_eval_docs.push_back(d);
    }
    const Evaluation post =
        evaluate_closed(post_model, post_eval_docs, cache, state.promoted_majority);
    report.post_accuracy = post.accuracy;
    report.post_macro_f1 = post.macro_f1;

    if (observer) {
        IterationArtifacts artifacts;
        artifacts.iteration = iteration;
        for (std::size_t idx : outlier_test_index) {
            artifacts.outlier_ids.push_back(test_docs[idx].id);
            artifacts.outlier_truth.push_back(truth.labels[idx]);
        }
        artifacts.cluster_assignments = outlier_assignments;
        artifacts.outlier_features = outlier_features;
        observer(artifacts);
    }

    state.iteration = iteration;
    state.history.push_back(report);
    return {std::move(report), std::move(post_model)};
}

RunResult run_from(LearningState state, const LabeledCorpus& corpus, const LoopConfig& config,
                   const std::string& checkpoint_dir, const IterationObserver& observer) {
    validate(config);
    FeatureCache cache(config.vectorizer);
    std::optional<TrainedClassifier> model;

    while (state.iteration < config.n_max &&
           state.remaining_pool.size() >= static_cast<std::size_t>(config.k_unknown)) {
        IterationOutcome outcome =
            run_iteration(state, corpus, config, cache, model ? &*model : nullptr, observer);
        model = std::move(outcome.post_model);
        if (!checkpoint_dir.empty()) save_state(checkpoint_dir, state, *model);
        if (outcome.report.post_macro_f1 < config.delta) break;
    }
    if (!model) {
        // no iteration ran (exhausted pool or resumed at n_max): train the
        // current inventory so the caller still gets a usable classifier
        NetworkConfig net = config.network;
        net.input_dim = config.vectorizer.dim;
        net.seed = net_seed(config, state.iteration);
        model = train(to_samples(state.train_docs, cache), net);
    }
    RunResult result;
    result.model = std::move(*model);
    result.reports = state.history;
    result.state = std::move(state);
    return result;
}

RunResult run(const LabeledCorpus& corpus, const LoopConfig& config,
              const std::string& checkpoint_dir, const IterationObserver& observer) {
    return run_from(initialize_state(corpus, config), corpus, config, checkpoint_dir, observer);
}

namespace {

nlohmann::json report_to_json(const IterationReport& r) {
    nlohmann::json j;
    j["iteration"] = r.iteration;
    j["pre_accuracy"] = r.pre_accuracy;
    j["pre_macro_f1"] = r.pre_macro_f1;
    j["post_accuracy"] = r.post_accuracy;
    j["post_macro_f1"] = r.post_macro_f1;
    j["epsilon_os"] = r.epsilon_os;
    j["davies_bouldin"] = r.davies_bouldin;
    j["v_measure"] = r.v_measure;
    j["ica"] = r.ica;
    j["outlier_count"] = r.outlier_count;
    j["test_count"] = r.test_count;
    nlohmann::json promoted = nlohmann::json::array();
    for (const PromotedCluster& p : r.promoted) {
        promoted.push_back({{"label", p.label}, {"size", p.size}, {"majority", p.majority_truth}});
    }
    j["promoted"] = std::move(promoted);
    nlohmann::json breakdowns = nlohmann::json::array();
    for (const IcaBreakdown& b : r.promoted_ica) {
        breakdowns.push_back({{"homogeneity", b.homogeneity},
                              {"completeness", b.completeness},
                              {"uia", b.uia},
                              {"ica", b.ica},
                              {"n_c_given_k", b.n_c_given_k},
                              {"n_k", b.n_k},
                              {"n_c", b.n_c},
                              {"n_u_given_k", b.n_u_given_k}});
    }
    j["promoted_ica"] = std::move(breakdowns);
    return j;
}

double json_double(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return v.get<double>();
}

IterationReport report_from_json(const nlohmann::json& j) {
    IterationReport r;
    r.iteration = j.at("iteration").get<int>();
    r.pre_accuracy = json_double(j, "pre_accuracy");
    r.pre_macro_f1 = json_double(j, "pre_macro_f1");
    r.post_accuracy = json_double(j, "post_accuracy");
    r.post_macro_f1 = json_double(j, "post_macro_f1");
    r.epsilon_os = json_double(j, "epsilon_os");
    r.davies_bouldin = json_double(j, "davies_bouldin");
    r.v_measure = json_double(j, "v_measure");
    r.ica = json_double(j, "ica");
    r.outlier_count = j.at("outlier_count").get<std::size_t>();
    r.test_count = j.at("test_count").get<std::size_t>();
    for (const auto& p : j.at("promoted")) {
        r.promoted.push_back({p.at("label").get<std::string>(), p.at("size").get<std::size_t>(),
                              p.at("majority").get<std::string>()});
    }
    for (const auto& b : j.at("promoted_ica")) {
        IcaBreakdown ib;
        ib.homogeneity = b.at("homogeneity").get<double>();
        ib.completeness = b.at("completeness").get<double>();
        ib.uia = b.at("uia").get<double>();
        ib.ica = b.at("ica").get<double>();
        ib.n_c_given_k = b.at("n_c_given_k").get<long>();
        ib.n_k = b.at("n_k").get<long>();
        ib.n_c = b.at("n_c").get<long>();
        ib.n_u_given_k = b.at("n_u_given_k").get<long>();
        r.promoted_ica.push_back(ib);
    }
    return r;
}

nlohmann::json docs_to_json(const std::vector<Document>& docs) {
    nlohmann::json out = nlohmann::json::array();
    for (const Document& d : docs) out.push_back({{"id", d.id}, {"label", d.label}});
    return out;
}

std::vector<Document> docs_from_json(const nlohmann::json& j,
                                     const std::map<std::string, const Document*>& by_id) {
    std::vector<Document> out;
    for (const auto& e : j) {
        const std::string id = e.at("id").get<std::string>();
        const auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw FormatError("state references unknown document id: " + id);
        }
        out.push_back({id, it->second->text, e.at("label").get<std::string>()});
    }
    return out;
}

}  // namespace

std::string state_to_json(const LearningState& state) {
    nlohmann::json j;
    j["format"] = "opensetiq-state";
    j["version"] = 1;
    j["iteration"] = state.iteration;
    j["current_classes"] = state.current_classes;
    j["remaining_pool"] = state.remaining_pool;
    j["train"] = docs_to_json(state.train_docs);
    j["heldout"] = docs_to_json(state.heldout_docs);
    j["promoted_majority"] = state.promoted_majority;
    nlohmann::json history = nlohmann::json::array();
    for (const IterationReport& r : state.history) history.push_back(report_to_json(r));
    j["history"] = std::move(history);
    return j.dump();
}

LearningState state_from_json(const std::string& json_text, const LabeledCorpus& corpus) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("state parse error: ") + e.what());
    }
    if (j.value("format", "") != "opensetiq-state" || j.value("version", 0) != 1) {
        throw FormatError("not a version-1 state manifest");
    }
    std::map<std::string, const Document*> by_id;
    for (const Document& d : corpus.documents) by_id[d.id] = &d;

    LearningState state;
    state.iteration = j.at("iteration").get<int>();
    state.current_classes = j.at("current_classes").get<std::vector<std::string>>();
    state.remaining_pool = j.at("remaining_pool").get<std::vector<std::string>>();
    state.train_docs = docs_from_json(j.at("train"), by_id);
    state.heldout_docs = docs_from_json(j.at("heldout"), by_id);
    state.promoted_majority =
        j.at("promoted_majority").get<std::map<std::string, std::string>>();
    for (const auto& r : j.at("history")) state.history.push_back(report_from_json(r));
    return state;
}

void save_state(const std::string& dir, const LearningState& state,
                const TrainedClassifier& model) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(std::filesystem::path(dir) / "state.json", std::ios::binary);
        if (!out) throw FormatError("cannot write state manifest in " + dir);
        out << state_to_json(state);
    }
    save_checkpoint((std::filesystem::path(dir) / "classifier.json").string(), model);
}

LearningState load_state(const std::string& dir, const LabeledCorpus& corpus) {
    std::ifstream in(std::filesystem::path(dir) / "state.json", std::ios::binary);
    if (!in) throw FormatError("no state manifest in " + dir);
    std::ostringstream buf;
    buf << in.rdbuf();
    return state_from_json(buf.str(), corpus);
}

}  // namespace osiq
