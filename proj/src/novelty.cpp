#include "opensetiq/novelty.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "opensetiq/error.hpp"
#include "opensetiq/rng.hpp"

namespace osiq {

namespace {

constexpr double kDistanceFloor = 1e-12;
constexpr double kShrinkage = 0.1;
constexpr double kShapeCap = 50.0;

}  // namespace

double mahalanobis_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                            const Eigen::MatrixXd& sigma_inv) {
    if (x.size() != mu.size() || sigma_inv.rows() != sigma_inv.cols() ||
        sigma_inv.rows() != x.size()) {
        throw ShapeError("mahalanobis_distance: inconsistent shapes");
    }
    const Eigen::VectorXd diff = x - mu;
    const double q = diff.dot(sigma_inv * diff);
    if (q < -1e-9) throw NumericError("mahalanobis_distance: matrix is not positive definite");
    return std::sqrt(std::max(q, 0.0));
}

WeibullParams weibull_fit(const std::vector<double>& samples) {
    if (samples.size() < 3) throw ParamError("weibull_fit: need at least 3 samples");
    double peak = 0.0;
    for (double s : samples) {
        if (s <= 0.0) throw NumericError("weibull_fit: samples must be strictly positive");
        peak = std::max(peak, s);
    }
    // work on x/max(x): shape is scale-invariant and x^k cannot overflow
    const double n = static_cast<double>(samples.size());
    std::vector<double> x(samples.size());
    double mean_ln = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        x[i] = samples[i] / peak;
        mean_ln += std::log(x[i]);
    }
    mean_ln /= n;

    double var_ln = 0.0;
    for (double v : x) var_ln += (std::log(v) - mean_ln) * (std::log(v) - mean_ln);
    var_ln /= n;
    if (var_ln < 1e-16) {  // all samples (numerically) identical
        return {kShapeCap, peak * std::exp(mean_ln)};
    }

    const auto profile = [&](double k, double& f, double& df) {
        double s0 = 0.0, s1 = 0.0, s2 = 0.0;
        for (double v : x) {
            const double ln = std::log(v);
            const double p = std::pow(v, k);
            s0 += p;
            s1 += p * ln;
            s2 += p * ln * ln;
        }
        f = s1 / s0 - 1.0 / k - mean_ln;
        df = (s2 * s0 - s1 * s1) / (s0 * s0) + 1.0 / (k * k);
    };

    // the profile is strictly increasing in k, so bracket then use
    // Newton steps safeguarded by bisection
    double lo = 1e-3, hi = std::max(2.0, 1.2 / std::sqrt(var_ln));
    double f, df;
    profile(hi, f, df);
    int expand = 0;
    while (f < 0.0 && expand++ < 60) {
        lo = hi;
        hi *= 2.0;
        profile(hi, f, df);
    }
    if (f < 0.0) throw FitError("weibull_fit: profile root not bracketed");

    double k = std::clamp(1.2 / std::sqrt(var_ln), lo, hi);
    bool converged = false;
    for (int iter = 0; iter < 100; ++iter) {
        profile(k, f, df);
        if (f > 0.0) hi = k; else lo = k;
        double next = df > 0.0 ? k - f / df : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - k) < 1e-12 * std::max(1.0, k)) {
            k = next;
            converged = true;
            break;
        }
        k = next;
    }
    if (!converged) throw FitError("weibull_fit: no convergence in 100 iterations");

    if (k > kShapeCap) k = kShapeCap;
    double s0 = 0.0;
    for (double v : x) s0 += std::pow(v, k);
    const double scale = peak * std::pow(s0 / n, 1.0 / k);
    return {k, scale};
}

double weibull_cdf(const WeibullParams& params, double value) {
    if (value <= 0.0) return 0.0;
    return 1.0 - std::exp(-std::pow(value / params.scale, params.shape));
}

double MahalanobisWeibull::score(const Eigen::VectorXd& x) const {
    double lowest = 1.0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const double d = mahalanobis_distance(x, means[c], cov_inverse);
        lowest = std::min(lowest, weibull_cdf(tails[c], d));
    }
    return lowest;
}

double LofModel::score(const Eigen::VectorXd& x) const {
    const std::size_t n = train.size();
    const auto k_eff = static_cast<std::size_t>(k);
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        dist.emplace_back(std::max((x - train[j]).norm(), kDistanceFloor), j);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_eff), dist.end());

    double reach_sum = 0.0;
    for (std::size_t r = 0; r < k_eff; ++r) {
        reach_sum += std::max(k_distance[dist[r].second], dist[r].first);
    }
    const double lrd_x = static_cast<double>(k_eff) / std::max(reach_sum, kDistanceFloor);
    double ratio = 0.0;
    for (std::size_t r = 0; r < k_eff; ++r) {
        ratio += lrd[dist[r].second];
    }
    return ratio / (static_cast<double>(k_eff) * lrd_x);
}

namespace {

LofModel fit_lof(const std::vector<Eigen::VectorXd>& points, int k,
                 std::vector<double>& training_scores) {
    const std::size_t n = points.size();
    if (k < 2) throw ParamError("lof: k must be >= 2");
    if (n <= static_cast<std::size_t>(k)) {
        throw ParamError("lof: training set must be larger than k");
    }

    LofModel model;
    model.train = points;
    model.k = k;
    model.k_distance.assign(n, 0.0);
    model.lrd.assign(n, 0.0);

    const auto k_eff = static_cast<std::size_t>(k);
    std::vector<std::vector<std::size_t>> neighbors(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            dist.emplace_back(std::max((points[i] - points[j]).norm(), kDistanceFloor), j);
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_eff),
                          dist.end());
        neighbors[i].reserve(k_eff);
        for (std::size_t r = 0; r < k_eff; ++r) neighbors[i].push_back(dist[r].second);
        model.k_distance[i] = dist[k_eff - 1].first;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double reach_sum = 0.0;
        for (std::size_t j : neighbors[i]) {
            const double d = std::max((points[i] - points[j]).norm(), kDistanceFloor);
            reach_sum += std::max(model.k_distance[j], d);
        }
        model.lrd[i] = static_cast<double>(k_eff) / std::max(reach_sum, kDistanceFloor);
    }

    training_scores.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double ratio = 0.0;
        for (std::size_t j : neighbors[i]) ratio += model.lrd[j];
        training_scores[i] = ratio / (static_cast<double>(k_eff) * model.lrd[i]);
    }
    return model;
}

}  // namespace

double iforest_path_normalizer(int n) {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    const double m = static_cast<double>(n);
    return 2.0 * (std::log(m - 1.0) + 0.5772156649015329) - 2.0 * (m - 1.0) / m;
}

namespace {

int build_tree(IsolationTree& tree, const std::vector<Eigen::VectorXd>& points,
               std::vector<std::size_t>& ids, int lo, int hi, int depth, int height_limit,
               Rng& rng) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const int count = hi - lo;
    if (depth >= height_limit || count <= 1) {
        tree.nodes[static_cast<std::size_t>(index)].size = count;
        return index;
    }
    const auto dim = points[ids[static_cast<std::size_t>(lo)]].size();
    std::vector<int> splittable;
    for (Eigen::Index f = 0; f < dim; ++f) {
        double mn = points[ids[static_cast<std::size_t>(lo)]][f];
        double mx = mn;
        for (int i = lo + 1; i < hi; ++i) {
            const double v = points[ids[static_cast<std::size_t>(i)]][f];
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        if (mx > mn) splittable.push_back(static_cast<int>(f));
    }
    if (splittable.empty()) {  // duplicated points
        tree.nodes[static_cast<std::size_t>(index)].size = count;
        return index;
    }
    const int feature = splittable[rng.below(splittable.size())];
    double mn = points[ids[static_cast<std::size_t>(lo)]][feature];
    double mx = mn;
    for (int i = lo + 1; i < hi; ++i) {
        const double v = points[ids[static_cast<std::size_t>(i)]][feature];
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    const double cutoff = rng.uniform(mn, mx);

    auto mid_it = std::partition(ids.begin() + lo, ids.begin() + hi, [&](std::size_t id) {
        return points[id][feature] < cutoff;
    });
    int mid = static_cast<int>(mid_it - ids.begin());
    if (mid == lo || mid == hi) mid = lo + count / 2;  // degenerate cutoff

    tree.nodes[static_cast<std::size_t>(index)].feature = feature;
    tree.nodes[static_cast<std::size_t>(index)].cutoff = cutoff;
    const int left = build_tree(tree, points, ids, lo, mid, depth + 1, height_limit, rng);
    tree.nodes[static_cast<std::size_t>(index)].left = left;
    const int right = build_tree(tree, points, ids, mid, hi, depth + 1, height_limit, rng);
    tree.nodes[static_cast<std::size_t>(index)].right = right;
    return index;
}

double tree_path_length(const IsolationTree& tree, const Eigen::VectorXd& x) {
    int node = 0;
    double depth = 0.0;
    for (;;) {
        const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
        if (nd.feature < 0) return depth + iforest_path_normalizer(nd.size);
        node = x[nd.feature] < nd.cutoff ? nd.left : nd.right;
        depth += 1.0;
    }
}

}  // namespace

IsolationForest fit_iforest(const std::vector<Eigen::VectorXd>& points, int trees, int subsample,
                            std::uint64_t seed) {
    if (points.empty()) throw ParamError("iforest: no points");
    if (trees < 1) throw ParamError("iforest: need at least one tree");
    if (subsample < 2) throw ParamError("iforest: subsample must be >= 2");

    IsolationForest forest;
    forest.subsample = std::min<int>(subsample, static_cast<int>(points.size()));
    const int height_limit =
        std::max(1, static_cast<int>(std::ceil(std::log2(static_cast<double>(forest.subsample)))));

    Rng rng(derive_seed(seed, 0x1F0E57));
    for (int t = 0; t < trees; ++t) {
        auto ids = rng.sample_indices(points.size(), static_cast<std::size_t>(forest.subsample));
        IsolationTree tree;
        build_tree(tree, points, ids, 0, static_cast<int>(ids.size()), 0, height_limit, rng);
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

double IsolationForest::mean_path_length(const Eigen::VectorXd& x) const {
    double total = 0.0;
    for (const IsolationTree& tree : trees) total += tree_path_length(tree, x);
    return total / static_cast<double>(trees.size());
}

double IsolationForest::score(const Eigen::VectorXd& x) const {
    return std::pow(2.0, -mean_path_length(x) / iforest_path_normalizer(subsample));
}

Verdict make_verdict(bool mahal, bool lof, bool iforest, double s_mahal, double s_lof,
                     double s_iforest) {
    Verdict v;
    v.mahalanobis = mahal;
    v.lof = lof;
    v.iforest = iforest;
    v.is_outlier = (static_cast<int>(mahal) + static_cast<int>(lof) + static_cast<int>(iforest)) >= 2;
    v.mahalanobis_score = s_mahal;
    v.lof_score = s_lof;
    v.iforest_score = s_iforest;
    return v;
}

Verdict FittedEnsemble::judge(const Eigen::VectorXd& x) const {
    const double s_m = mahal.score(x);
    const double s_l = lof.score(x);
    const double s_i = forest.score(x);
    return make_verdict(s_m > mahal_cut, s_l > lof_cut, s_i > iforest_cut, s_m, s_l, s_i);
}

namespace {

double upper_quantile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto idx = static_cast<std::ptrdiff_t>(std::ceil(q * n)) - 1;
    idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(values.size()) - 1);
    return values[static_cast<std::size_t>(idx)];
}

}  // namespace

FittedEnsemble fit_ensemble(const std::map<std::string, std::vector<Eigen::VectorXd>>& by_class,
                            const EnsembleConfig& config) {
    if (by_class.empty()) throw FitError("fit_ensemble: no classes");
    if (!(config.calibration_quantile > 0.0 && config.calibration_quantile <= 1.0)) {
        throw ParamError("fit_ensemble: calibration quantile must be in (0,1]");
    }
    if (config.weibull_tail < 3) throw ParamError("fit_ensemble: weibull_tail must be >= 3");

    std::size_t total = 0;
    Eigen::Index dim = -1;
    for (const auto& [label, vecs] : by_class) {
        if (vecs.size() < 3) {
            throw FitError("fit_ensemble: class '" + label + "' has fewer than 3 samples");
        }
        for (const auto& v : vecs) {
            if (dim < 0) dim = v.size();
            if (v.size() != dim) throw ShapeError("fit_ensemble: inconsistent feature dims");
        }
        total += vecs.size();
    }
    if (total <= static_cast<std::size_t>(config.lof_k)) {
        throw FitError("fit_ensemble: need more than lof_k training samples");
    }

    FittedEnsemble ens;
    ens.config = config;

    // Mahalanobis channel: per-class means, pooled shrunk covariance
    for (const auto& [label, vecs] : by_class) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
        for (const auto& v : vecs) mean += v;
        mean /= static_cast<double>(vecs.size());
        ens.mahal.classes.push_back(label);
        ens.mahal.means.push_back(std::move(mean));
    }
    Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(dim, dim);
    {
        std::size_t c = 0;
        for (const auto& [label, vecs] : by_class) {
            for (const auto& v : vecs) {
                const Eigen::VectorXd diff = v - ens.mahal.means[c];
                pooled.noalias() += diff * diff.transpose();
            }
            ++c;
        }
    }
    const double denom = std::max<double>(1.0, static_cast<double>(total - by_class.size()));
    pooled /= denom;
    const double avg_var = std::max(pooled.trace() / static_cast<double>(dim), 1e-12);
    Eigen::MatrixXd shrunk = (1.0 - kShrinkage) * pooled;
    shrunk.diagonal().array() += kShrinkage * avg_var;

    Eigen::LLT<Eigen::MatrixXd> llt(shrunk);
    if (llt.info() != Eigen::Success) {
        throw NumericError("fit_ensemble: shrunk covariance is not positive definite");
    }
    ens.mahal.cov_inverse = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
    // symmetrize away the solve's rounding
    ens.mahal.cov_inverse = 0.5 * (ens.mahal.cov_inverse + ens.mahal.cov_inverse.transpose()).eval();

    {
        std::size_t c = 0;
        for (const auto& [label, vecs] : by_class) {
            std::vector<double> dists;
            dists.reserve(vecs.size());
            for (const auto& v : vecs) {
                dists.push_back(mahalanobis_distance(v, ens.mahal.means[c], ens.mahal.cov_inverse));
            }
            std::sort(dists.begin(), dists.end());
            const std::size_t tail = std::min<std::size_t>(
                static_cast<std::size_t>(config.weibull_tail), dists.size());
            std::vector<double> top(dists.end() - static_cast<std::ptrdiff_t>(tail), dists.end());
            std::erase_if(top, [](double d) { return d <= 0.0; });
            if (top.size() >= 3) {
                ens.mahal.tails.push_back(weibull_fit(top));
            } else {  // a class collapsed onto its mean
                ens.mahal.tails.push_back({kShapeCap, std::max(dists.back(), kDistanceFloor)});
            }
            ++c;
        }
    }

    // pooled feature list, class-major; order only matters for determinism
    std::vector<Eigen::VectorXd> all;
    all.reserve(total);
    for (const auto& [label, vecs] : by_class) {
        all.insert(all.end(), vecs.begin(), vecs.end());
    }

    std::vector<double> lof_scores;
    ens.lof = fit_lof(all, config.lof_k, lof_scores);
    ens.forest = fit_iforest(all, config.iforest_trees, config.iforest_subsample, config.seed);

    std::vector<double> mahal_scores, iforest_scores;
    mahal_scores.reserve(total);
    iforest_scores.reserve(total);
    for (const auto& v : all) {
        mahal_scores.push_back(ens.mahal.score(v));
        iforest_scores.push_back(ens.forest.score(v));
    }

    const double q = config.calibration_quantile;
    ens.mahal_cut = std::max(q, upper_quantile(mahal_scores, q));
    ens.lof_cut = std::max(config.lof_threshold, upper_quantile(lof_scores, q));
    ens.iforest_cut = upper_quantile(iforest_scores, q);
    return ens;
}

FittedEnsemble fit_ensemble(const TrainedClassifier& classifier,
                            const std::vector<TrainSample>& samples,
                            const EnsembleConfig& config) {
    std::map<std::string, std::vector<Eigen::VectorXd>> by_class;
    for (const TrainSample& s : samples) {
        by_class[s.label].push_back(penultimate(classifier, s.features).values);
    }
    FittedEnsemble ens = fit_ensemble(by_class, config);
    ens.classifier = classifier;
    return ens;
}

DetectionResult detect(const FittedEnsemble& ensemble, const std::vector<FeatureVector>& test) {
    if (!ensemble.classifier) {
        throw ParamError("detect: ensemble was fitted without a classifier");
    }
    DetectionResult result;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const FeatureVector penult = penultimate(*ensemble.classifier, test[i]);
        const Verdict v = ensemble.judge(penult.values);
        if (v.is_outlier) {
            result.outliers.push_back({i, v});
        } else {
            result.accepted.push_back({i, predict(*ensemble.classifier, test[i]).label});
        }
    }
    return result;
}

std::string ensemble_to_json(const FittedEnsemble& ensemble,
                             const std::map<std::string, std::vector<Eigen::VectorXd>>& by_class) {
    nlohmann::json j;
    j["format"] = "opensetiq-ensemble";
    j["version"] = 1;
    j["config"] = {{"lof_k", ensemble.config.lof_k},
                   {"lof_threshold", ensemble.config.lof_threshold},
                   {"iforest_trees", ensemble.config.iforest_trees},
                   {"iforest_subsample", ensemble.config.iforest_subsample},
                   {"weibull_tail", ensemble.config.weibull_tail},
                   {"calibration_quantile", ensemble.config.calibration_quantile},
                   {"seed", ensemble.config.seed}};
    nlohmann::json features = nlohmann::json::object();
    for (const auto& [label, vecs] : by_class) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& v : vecs) {
            rows.push_back(std::vector<double>(v.data(), v.data() + v.size()));
        }
        features[label] = std::move(rows);
    }
    j["features_by_class"] = std::move(features);
    if (ensemble.classifier) {
        j["classifier"] = nlohmann::json::parse(to_checkpoint_json(*ensemble.classifier));
    }
    return j.dump();
}

FittedEnsemble ensemble_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("ensemble parse error: ") + e.what());
    }
    if (j.value("format", "") != "opensetiq-ensemble" || j.value("version", 0) != 1) {
        throw FormatError("not a version-1 ensemble snapshot");
    }
    EnsembleConfig config;
    const auto& jc = j.at("config");
    config.lof_k = jc.at("lof_k").get<int>();
    config.lof_threshold = jc.at("lof_threshold").get<double>();
    config.iforest_trees = jc.at("iforest_trees").get<int>();
    config.iforest_subsample = jc.at("iforest_subsample").get<int>();
    config.weibull_tail = jc.at("weibull_tail").get<int>();
    config.calibration_quantile = jc.at("calibration_quantile").get<double>();
    config.seed = jc.at("seed").get<std::uint64_t>();

    std::map<std::string, std::vector<Eigen::VectorXd>> by_class;
    for (const auto& [label, rows] : j.at("features_by_class").items()) {
        for (const auto& row : rows) {
            const auto data = row.get<std::vector<double>>();
            by_class[label].push_back(
                Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size())));
        }
    }
    FittedEnsemble ens = fit_ensemble(by_class, config);
    if (j.contains("classifier")) {
        ens.classifier = from_checkpoint_json(j.at("classifier").dump());
    }
    return ens;
}

}  // namespace osiq
