#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "opensetiq/error.hpp"
#include "opensetiq/novelty.hpp"
#include "opensetiq/rng.hpp"

using namespace osiq;

namespace {

std::vector<Eigen::VectorXd> gaussian_blob(Rng& rng, int n, const Eigen::VectorXd& center,
                                           double sigma) {
    std::vector<Eigen::VectorXd> out;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v(center.size());
        for (Eigen::Index d = 0; d < center.size(); ++d) v[d] = center[d] + rng.normal(0, sigma);
        out.push_back(std::move(v));
    }
    return out;
}

Eigen::VectorXd vec2(double x, double y) {
    Eigen::VectorXd v(2);
    v << x, y;
    return v;
}

Eigen::MatrixXd random_rotation(Rng& rng, int dim) {
    Eigen::MatrixXd g(dim, dim);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    if (q.determinant() < 0) q.col(0) = -q.col(0);
    return q;
}

}  // namespace

TEST_CASE("mahalanobis_distance closed-form cases") {
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(2, 2);
    CHECK(mahalanobis_distance(vec2(3, 4), vec2(0, 0), identity) == doctest::Approx(5.0));
    CHECK(mahalanobis_distance(vec2(1, 2), vec2(1, 2), identity) == 0.0);

    Eigen::MatrixXd sigma_inv = Eigen::MatrixXd::Zero(2, 2);
    sigma_inv(0, 0) = 0.25;  // sigma = diag(4, 1)
    sigma_inv(1, 1) = 1.0;
    CHECK(mahalanobis_distance(vec2(2, 1), vec2(0, 0), sigma_inv) ==
          doctest::Approx(std::sqrt(2.0)));

    CHECK_THROWS_AS(mahalanobis_distance(vec2(1, 1), Eigen::VectorXd::Zero(3), identity),
                    ShapeError);
}

TEST_CASE("weibull_fit recovers known parameters") {
    Rng rng(3);
    std::vector<double> samples;
    const double shape = 2.0, scale = 1.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        samples.push_back(scale * std::pow(-std::log(1.0 - u), 1.0 / shape));
    }
    const WeibullParams fit = weibull_fit(samples);
    CHECK(std::abs(fit.shape - shape) / shape < 0.05);
    CHECK(std::abs(fit.scale - scale) / scale < 0.05);
}

TEST_CASE("weibull_fit degenerate and error cases") {
    const WeibullParams fit = weibull_fit({3.5, 3.5, 3.5, 3.5});
    CHECK(fit.shape == doctest::Approx(50.0));
    CHECK(fit.scale == doctest::Approx(3.5).epsilon(1e-9));

    CHECK_THROWS_AS(weibull_fit({1.0, 2.0}), ParamError);
    CHECK_THROWS_AS(weibull_fit({1.0, -2.0, 3.0}), NumericError);
    CHECK_THROWS_AS(weibull_fit({1.0, 0.0, 3.0}), NumericError);
}

TEST_CASE("weibull cdf endpoints") {
    Rng rng(5);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> samples;
        for (int i = 0; i < 50; ++i) samples.push_back(0.5 + rng.uniform() * 3.0);
        const WeibullParams fit = weibull_fit(samples);
        CHECK(fit.shape > 0.0);
        CHECK(fit.scale > 0.0);
        CHECK(weibull_cdf(fit, 0.0) == 0.0);
        CHECK(weibull_cdf(fit, 1e12) == doctest::Approx(1.0));
        // monotone
        double prev = 0.0;
        for (double x = 0.1; x < 8.0; x += 0.1) {
            const double c = weibull_cdf(fit, x);
            CHECK(c >= prev);
            prev = c;
        }
    }
}

TEST_CASE("lof behaves on a dense uniform grid") {
    std::vector<Eigen::VectorXd> grid;
    for (int i = 0; i < 20; ++i) {
        for (int j = 0; j < 20; ++j) grid.push_back(vec2(i, j));
    }
    EnsembleConfig cfg;
    cfg.lof_k = 10;
    std::map<std::string, std::vector<Eigen::VectorXd>> by_class{{"grid", grid}};
    const FittedEnsemble ens = fit_ensemble(by_class, cfg);

    // interior point: density matches its neighbors
    CHECK(ens.lof.score(vec2(10.2, 9.7)) > 0.8);
    CHECK(ens.lof.score(vec2(10.2, 9.7)) < 1.2);

    // a point on top of a training point inside the grid
    CHECK(ens.lof.score(vec2(10, 10)) == doctest::Approx(1.0).epsilon(0.3));
}

TEST_CASE("lof flags a far point and rejects bad k") {
    Rng rng(6);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng blob_rng(seed + 100);
        const auto blob = gaussian_blob(blob_rng, 100, vec2(0, 0), 1.0);
        double diameter = 0.0;
        for (const auto& a : blob) {
            for (const auto& b : blob) diameter = std::max(diameter, (a - b).norm());
        }
        EnsembleConfig cfg;
        cfg.lof_k = 10;
        std::map<std::string, std::vector<Eigen::VectorXd>> by_class{{"blob", blob}};
        const FittedEnsemble ens = fit_ensemble(by_class, cfg);
        CHECK(ens.lof.score(vec2(10.0 * diameter, 0)) > 1.5);
    }

    std::map<std::string, std::vector<Eigen::VectorXd>> tiny{
        {"t", {vec2(0, 0), vec2(1, 0), vec2(0, 1)}}};
    EnsembleConfig cfg;
    cfg.lof_k = 3;  // k >= training size
    CHECK_THROWS_AS(fit_ensemble(tiny, cfg), FitError);
}

TEST_CASE("isolation forest score bounds and ordering") {
    Rng rng(7);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng blob_rng(seed + 40);
        const auto blob = gaussian_blob(blob_rng, 256, vec2(0, 0), 1.0);
        const IsolationForest forest = fit_iforest(blob, 100, 256, seed);

        double mean_inlier = 0.0;
        for (const auto& p : blob) {
            const double s = forest.score(p);
            CHECK(s > 0.0);
            CHECK(s < 1.0);
            mean_inlier += s;
        }
        mean_inlier /= static_cast<double>(blob.size());
        const double far = forest.score(vec2(50, 50));
        CHECK(far > mean_inlier);
    }
}

TEST_CASE("isolation forest with subsample 2 bounds the expected path") {
    Rng rng(8);
    const auto blob = gaussian_blob(rng, 64, vec2(0, 0), 1.0);
    const IsolationForest forest = fit_iforest(blob, 50, 2, 3);
    CHECK(iforest_path_normalizer(2) == doctest::Approx(1.0));
    for (int t = 0; t < 10; ++t) {
        const Eigen::VectorXd probe = vec2(rng.normal(0, 3), rng.normal(0, 3));
        CHECK(forest.mean_path_length(probe) <= 1.0 + 1e-12);
        CHECK(forest.score(probe) >= std::pow(2.0, -1.0 / iforest_path_normalizer(2)) - 1e-12);
    }
}

TEST_CASE("verdict is the 2-of-3 majority for all flag combinations") {
    for (int mask = 0; mask < 8; ++mask) {
        const bool m = mask & 1, l = mask & 2, f = mask & 4;
        const Verdict v = make_verdict(m, l, f);
        const int votes = static_cast<int>(m) + static_cast<int>(l) + static_cast<int>(f);
        CHECK(v.is_outlier == (votes >= 2));
    }
}

TEST_CASE("calibration bounds training flags near 1 - q") {
    Rng rng(9);
    std::map<std::string, std::vector<Eigen::VectorXd>> by_class{
        {"a", gaussian_blob(rng, 500, vec2(0, 0), 1.0)},
        {"b", gaussian_blob(rng, 500, vec2(6, 0), 1.0)}};
    EnsembleConfig cfg;
    cfg.calibration_quantile = 0.99;
    cfg.seed = 17;
    const FittedEnsemble ens = fit_ensemble(by_class, cfg);

    int flag_m = 0, flag_l = 0, flag_f = 0;
    for (const auto& [label, vecs] : by_class) {
        for (const auto& v : vecs) {
            const Verdict verdict = ens.judge(v);
            flag_m += verdict.mahalanobis;
            flag_l += verdict.lof;
            flag_f += verdict.iforest;
        }
    }
    // 1000 samples at q = 0.99: quantile calibration caps strict exceedances
    // at (1-q) n + 1 = 11; the spec's empirical slack allows up to 25
    CHECK(flag_m <= 25);
    CHECK(flag_l <= 25);
    CHECK(flag_f <= 25);
}

TEST_CASE("q = 1 flags no training sample") {
    Rng rng(10);
    std::map<std::string, std::vector<Eigen::VectorXd>> by_class{
        {"a", gaussian_blob(rng, 60, vec2(0, 0), 1.0)},
        {"b", gaussian_blob(rng, 60, vec2(4, 0), 1.0)}};
    EnsembleConfig cfg;
    cfg.calibration_quantile = 1.0;
    const FittedEnsemble ens = fit_ensemble(by_class, cfg);
    for (const auto& [label, vecs] : by_class) {
        for (const auto& v : vecs) {
            const Verdict verdict = ens.judge(v);
            CHECK_FALSE(verdict.mahalanobis);
            CHECK_FALSE(verdict.lof);
            CHECK_FALSE(verdict.iforest);
            CHECK_FALSE(verdict.is_outlier);
        }
    }
}

TEST_CASE("a probe far from two tight classes trips all three detectors") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        std::map<std::string, std::vector<Eigen::VectorXd>> by_class{
            {"a", gaussian_blob(rng, 120, vec2(0, 0), 1.0)},
            {"b", gaussian_blob(rng, 120, vec2(8, 0), 1.0)}};
        EnsembleConfig cfg;
        cfg.seed = seed;
        const FittedEnsemble ens = fit_ensemble(by_class, cfg);
        const Verdict v = ens.judge(vec2(4, 100));  // ~10 sigma from both
        CHECK(v.mahalanobis);
        CHECK(v.lof);
        CHECK(v.iforest);
        CHECK(v.is_outlier);
    }
}

TEST_CASE("mahalanobis channel is invariant under rotation of the feature space") {
    Rng rng(11);
    const int dim = 6;
    std::map<std::string, std::vector<Eigen::VectorXd>> by_class;
    Eigen::VectorXd c0 = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd c1 = Eigen::VectorXd::Constant(dim, 3.0);
    by_class["a"] = gaussian_blob(rng, 80, c0, 1.0);
    by_class["b"] = gaussian_blob(rng, 80, c1, 0.5);

    EnsembleConfig cfg;
    cfg.seed = 4;
    const FittedEnsemble ens = fit_ensemble(by_class, cfg);

    const Eigen::MatrixXd q = random_rotation(rng, dim);
    std::map<std::string, std::vector<Eigen::VectorXd>> rotated;
    for (const auto& [label, vecs] : by_class) {
        for (const auto& v : vecs) rotated[label].push_back(q * v);
    }
    const FittedEnsemble rotated_ens = fit_ensemble(rotated, cfg);

    for (int probe = 0; probe < 25; ++probe) {
        Eigen::VectorXd x(dim);
        for (int d = 0; d < dim; ++d) x[d] = rng.normal(1.5, 2.0);
        for (std::size_t c = 0; c < ens.mahal.classes.size(); ++c) {
            const double base =
                mahalanobis_distance(x, ens.mahal.means[c], ens.mahal.cov_inverse);
            const double rot = mahalanobis_distance(q * x, rotated_ens.mahal.means[c],
                                                    rotated_ens.mahal.cov_inverse);
            CHECK(base == doctest::Approx(rot).epsilon(1e-6));
        }
    }
}

TEST_CASE("fits are deterministic given the config seed") {
    Rng rng(12);
    std::map<std::string, std::vector<Eigen::VectorXd>> by_class{
        {"a", gaussian_blob(rng, 60, vec2(0, 0), 1.0)},
        {"b", gaussian_blob(rng, 60, vec2(5, 0), 1.0)}};
    EnsembleConfig cfg;
    cfg.seed = 99;
    const FittedEnsemble e1 = fit_ensemble(by_class, cfg);
    const FittedEnsemble e2 = fit_ensemble(by_class, cfg);
    CHECK(e1.mahal_cut == e2.mahal_cut);
    CHECK(e1.lof_cut == e2.lof_cut);
    CHECK(e1.iforest_cut == e2.iforest_cut);
    Rng probe_rng(1);
    for (int i = 0; i < 10; ++i) {
        const Eigen::VectorXd x = vec2(probe_rng.normal(0, 4), probe_rng.normal(0, 4));
        const Verdict v1 = e1.judge(x);
        const Verdict v2 = e2.judge(x);
        CHECK(v1.mahalanobis_score == v2.mahalanobis_score);
        CHECK(v1.lof_score == v2.lof_score);
        CHECK(v1.iforest_score == v2.iforest_score);
    }
}

TEST_CASE("ensemble snapshot restores an identical ensemble") {
    Rng rng(13);
    std::map<std::string, std::vector<Eigen::VectorXd>> by_class{
        {"a", gaussian_blob(rng, 30, vec2(0, 0), 1.0)},
        {"b", gaussian_blob(rng, 30, vec2(5, 0), 1.0)}};
    EnsembleConfig cfg;
    cfg.lof_k = 5;
    cfg.seed = 21;
    const FittedEnsemble original = fit_ensemble(by_class, cfg);
    const FittedEnsemble restored = ensemble_from_json(ensemble_to_json(original, by_class));
    CHECK(restored.mahal_cut == original.mahal_cut);
    CHECK(restored.lof_cut == original.lof_cut);
    CHECK(restored.iforest_cut == original.iforest_cut);
    const Eigen::VectorXd probe = vec2(2.5, 8.0);
    const Verdict a = original.judge(probe);
    const Verdict b = restored.judge(probe);
    CHECK(a.mahalanobis_score == b.mahalanobis_score);
    CHECK(a.lof_score == b.lof_score);
    CHECK(a.iforest_score == b.iforest_score);
}

TEST_CASE("fit_ensemble rejects undersized classes") {
    std::map<std::string, std::vector<Eigen::VectorXd>> by_class{
        {"a", {vec2(0, 0), vec2(1, 0)}},
        {"b", {vec2(5, 0), vec2(6, 0), vec2(5, 1), vec2(6, 1)}}};
    EnsembleConfig cfg;
    CHECK_THROWS_AS(fit_ensemble(by_class, cfg), FitError);
}
