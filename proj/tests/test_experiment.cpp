#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "opensetiq/csv.hpp"
#include "opensetiq/error.hpp"
#include "opensetiq/experiment.hpp"

using namespace osiq;
namespace fs = std::filesystem;

namespace {

std::string minimal_config(const std::string& out_dir) {
    std::ostringstream cfg;
    cfg << "synthetic.authors = 6\n"
        << "synthetic.docs_per_author = 10\n"
        << "synthetic.doc_len = 60\n"
        << "synthetic.vocab = 300\n"
        << "synthetic.skew = 0.95\n"
        << "synthetic.seed = 4\n"
        << "out = " << out_dir << "\n"
        << "seeds = 1\n"
        << "sweep.k_seed = 3\n"
        << "sweep.k_new = 1\n"
        << "sweep.algorithm = kmeans\n"
        << "loop.n_max = 1\n"
        << "loop.m_min = 5\n"
        << "vectorizer.dim = 256\n"
        << "network.penultimate_dim = 16\n"
        << "network.epochs = 20\n"
        << "ensemble.lof_k = 8\n"
        << "ensemble.weibull_tail = 10\n";
    return cfg.str();
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("config parser reports positions and rejects unknown keys") {
    CHECK_THROWS_WITH_AS(parse_experiment_config("out = x\nseeds = 1\nbogus_key = 3\n"),
                         doctest::Contains("line 3"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_experiment_config("out = x\nseeds = 1\nloop.n_max = nope\n"),
                         doctest::Contains("line 3"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_experiment_config("seeds = 1\n"), doctest::Contains("out"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_experiment_config("out = x\n"), doctest::Contains("seeds"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_experiment_config("out = x\nout = y\nseeds = 1\n"),
                         doctest::Contains("duplicate"), ConfigError);
}

TEST_CASE("config parser fills defaults and parses sweeps") {
    const ExperimentConfig config = parse_experiment_config(
        "out = results\n"
        "seeds = 1,2,3\n"
        "sweep.k_seed = 5,10\n"
        "sweep.k_new = 1,3\n"
        "sweep.algorithm = spectral,dbscan\n"
        "cluster.bandwidth = 0.4\n"
        "loop.k_unknown = 4\n");
    CHECK(config.out_dir == "results");
    CHECK(config.seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(config.sweep_k_seed == std::vector<int>{5, 10});
    CHECK(config.sweep_k_new == std::vector<int>{1, 3});
    REQUIRE(config.sweep_algorithms.size() == 2);
    CHECK(config.sweep_algorithms[1] == ClusterAlgorithm::dbscan);
    CHECK(config.fixed_k_unknown == 4);
    CHECK(config.base.clustering.rbf_bandwidth == 0.4);
    CHECK(config.synthetic.has_value());  // no corpus.path -> synthetic source
}

TEST_CASE("minimal run emits the documented report files") {
    const fs::path out = fs::temp_directory_path() / "osiq_test_experiment";
    fs::remove_all(out);
    const ExperimentConfig config = parse_experiment_config(minimal_config(out.string()));
    const ExperimentResult result = run_experiment(config);
    REQUIRE(result.cells.size() == 1);
    INFO(result.cells[0].error);
    REQUIRE(result.all_ok());

    for (const char* name : {"iterations.csv", "table1.csv", "table2.csv", "table3.csv"}) {
        INFO(name);
        CHECK(fs::exists(out / name));
    }
    CHECK(fs::exists(out / "clusters_ks3_kn1_kmeans_s1_i1.csv"));

    const auto iterations = csv::read_file((out / "iterations.csv").string());
    REQUIRE(iterations.size() == 2);
    CHECK(iterations[0][0] == "k_seed");
    CHECK(iterations[0].back() == "promoted");
    CHECK(iterations[1][0] == "3");

    const auto table1 = csv::read_file((out / "table1.csv").string());
    REQUIRE(table1.size() == 2);
    CHECK(table1[0] == csv::Row{"k_seed", "k_new", "algorithm", "seed", "pre_accuracy",
                                "pre_macro_f1", "post_accuracy", "post_macro_f1"});

    const auto clusters = csv::read_file((out / "clusters_ks3_kn1_kmeans_s1_i1.csv").string());
    CHECK(clusters[0] == csv::Row{"sample_id", "pc1", "pc2", "cluster", "truth_label"});
}

TEST_CASE("same config twice gives byte-identical reports") {
    const fs::path out_a = fs::temp_directory_path() / "osiq_test_det_a";
    const fs::path out_b = fs::temp_directory_path() / "osiq_test_det_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    run_experiment(parse_experiment_config(minimal_config(out_a.string())));
    run_experiment(parse_experiment_config(minimal_config(out_b.string())));
    for (const char* name : {"iterations.csv", "table1.csv", "table2.csv", "table3.csv",
                             "clusters_ks3_kn1_kmeans_s1_i1.csv"}) {
        INFO(name);
        CHECK(slurp(out_a / name) == slurp(out_b / name));
    }
}

TEST_CASE("pca projection preserves the dominant separation") {
    std::vector<Eigen::VectorXd> rows;
    for (int i = 0; i < 20; ++i) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(5);
        v[0] = i < 10 ? 0.0 : 100.0;
        v[1] = i % 3;
        rows.push_back(v);
    }
    const auto projected = pca_project_2d(rows);
    REQUIRE(projected.size() == 20);
    // first component separates the two groups by ~100
    const double gap = std::abs(projected[0][0] - projected[19][0]);
    CHECK(gap > 50.0);
}

TEST_CASE("corpus file source feeds the experiment") {
    const fs::path dir = fs::temp_directory_path() / "osiq_test_corpus_source";
    fs::remove_all(dir);
    fs::create_directories(dir);
    SyntheticSpec spec;
    spec.num_authors = 5;
    spec.docs_per_author = 10;
    spec.doc_len = 50;
    spec.vocab_size = 200;
    spec.style_skew = 0.9;
    spec.seed = 2;
    save_corpus_csv((dir / "corpus.csv").string(), generate_synthetic(spec));

    std::ostringstream cfg;
    cfg << "corpus.path = " << (dir / "corpus.csv").string() << "\n"
        << "corpus.format = csv\n"
        << "out = " << (dir / "out").string() << "\n"
        << "seeds = 1\n"
        << "sweep.k_seed = 3\n"
        << "sweep.k_new = 1\n"
        << "sweep.algorithm = kmeans\n"
        << "loop.m_min = 5\n"
        << "vectorizer.dim = 256\n"
        << "network.epochs = 15\n"
        << "network.penultimate_dim = 16\n"
        << "ensemble.lof_k = 8\n"
        << "ensemble.weibull_tail = 10\n";
    const ExperimentResult result = run_experiment(parse_experiment_config(cfg.str()));
    const std::string first_error = result.cells.empty() ? "" : result.cells[0].error;
    INFO(first_error);
    CHECK(result.all_ok());
    CHECK(fs::exists(dir / "out" / "iterations.csv"));
}
