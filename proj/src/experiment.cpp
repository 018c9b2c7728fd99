#include "opensetiq/experiment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "opensetiq/csv.hpp"
#include "opensetiq/error.hpp"

namespace fs = std::filesystem;

namespace osiq {

namespace {

struct ConfigEntry {
    std::string value;
    int line = 0;
    bool used = false;
};

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

class ConfigReader {
public:
    explicit ConfigReader(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        int number = 0;
        while (std::getline(in, line)) {
            ++number;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string stripped = trim(line);
            if (stripped.empty()) continue;
            const auto eq = stripped.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("line " + std::to_string(number) + ": expected key = value");
            }
            const std::string key = trim(stripped.substr(0, eq));
            if (key.empty()) {
                throw ConfigError("line " + std::to_string(number) + ": empty key");
            }
            if (entries_.count(key)) {
                throw ConfigError("line " + std::to_string(number) + ": duplicate key '" + key +
                                  "'");
            }
            entries_[key] = {trim(stripped.substr(eq + 1)), number, false};
        }
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    std::optional<std::string> get(const std::string& key) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        it->second.used = true;
        return it->second.value;
    }

    [[noreturn]] void fail(const std::string& key, const std::string& message) const {
        const auto it = entries_.find(key);
        const std::string where =
            it == entries_.end() ? "" : "line " + std::to_string(it->second.line) + ": ";
        throw ConfigError(where + "key '" + key + "': " + message);
    }

    long get_int(const std::string& key, long fallback, long lo, long hi) {
        const auto raw = get(key);
        if (!raw) return fallback;
        try {
            std::size_t pos = 0;
            const long v = std::stol(*raw, &pos);
            if (pos != raw->size()) throw std::invalid_argument("trailing characters");
            if (v < lo || v > hi) {
                fail(key, "value " + *raw + " outside [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
            }
            return v;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail(key, "expected an integer, got '" + *raw + "'");
        }
    }

    double get_real(const std::string& key, double fallback, double lo, double hi) {
        const auto raw = get(key);
        if (!raw) return fallback;
        try {
            std::size_t pos = 0;
            const double v = std::stod(*raw, &pos);
            if (pos != raw->size()) throw std::invalid_argument("trailing characters");
            if (v < lo || v > hi) fail(key, "value " + *raw + " out of range");
            return v;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail(key, "expected a number, got '" + *raw + "'");
        }
    }

    bool get_bool(const std::string& key, bool fallback) {
        const auto raw = get(key);
        if (!raw) return fallback;
        if (*raw == "true" || *raw == "1") return true;
        if (*raw == "false" || *raw == "0") return false;
        fail(key, "expected true/false, got '" + *raw + "'");
    }

    std::vector<std::string> split_list(const std::string& key, const std::string& raw) {
        std::vector<std::string> out;
        std::string item;
        std::istringstream in(raw);
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (item.empty()) fail(key, "empty list element");
            out.push_back(item);
        }
        if (out.empty()) fail(key, "list must not be empty");
        return out;
    }

    void check_all_used() const {
        for (const auto& [key, entry] : entries_) {
            if (!entry.used) {
                throw ConfigError("line " + std::to_string(entry.line) + ": unknown key '" + key +
                                  "'");
            }
        }
    }

private:
    std::map<std::string, ConfigEntry> entries_;
};

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
    ConfigReader reader(text);
    ExperimentConfig config;

    if (const auto path = reader.get("corpus.path")) {
        config.corpus_path = *path;
        const auto format = reader.get("corpus.format").value_or("csv");
        if (format == "csv") {
            config.corpus_format = CorpusFormat::csv;
        } else if (format == "dir") {
            config.corpus_format = CorpusFormat::directory_per_author;
        } else {
            reader.fail("corpus.format", "expected csv or dir, got '" + format + "'");
        }
    } else {
        SyntheticSpec spec;
        spec.num_authors = static_cast<int>(reader.get_int("synthetic.authors", 50, 1, 100000));
        spec.docs_per_author =
            static_cast<int>(reader.get_int("synthetic.docs_per_author", 40, 1, 1000000));
        spec.doc_len = static_cast<int>(reader.get_int("synthetic.doc_len", 120, 1, 1000000));
        spec.vocab_size = static_cast<int>(reader.get_int("synthetic.vocab", 3000, 1, 10000000));
        spec.style_skew = reader.get_real("synthetic.skew", 0.75, 1e-9, 1.0);
        spec.seed = static_cast<std::uint64_t>(
            reader.get_int("synthetic.seed", 1, 0, std::numeric_limits<long>::max()));
        config.synthetic = spec;
    }

    const auto out = reader.get("out");
    if (!out) throw ConfigError("missing required key 'out'");
    config.out_dir = *out;

    const auto seeds_raw = reader.get("seeds");
    if (!seeds_raw) throw ConfigError("missing required key 'seeds'");
    for (const std::string& s : reader.split_list("seeds", *seeds_raw)) {
        try {
            config.seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
            reader.fail("seeds", "expected integers, got '" + s + "'");
        }
    }

    if (const auto raw = reader.get("sweep.k_seed")) {
        config.sweep_k_seed.clear();
        for (const std::string& s : reader.split_list("sweep.k_seed", *raw)) {
            config.sweep_k_seed.push_back(static_cast<int>(std::stol(s)));
        }
    }
    if (const auto raw = reader.get("sweep.k_new")) {
        config.sweep_k_new.clear();
        for (const std::string& s : reader.split_list("sweep.k_new", *raw)) {
            config.sweep_k_new.push_back(static_cast<int>(std::stol(s)));
        }
    }
    if (const auto raw = reader.get("sweep.algorithm")) {
        config.sweep_algorithms.clear();
        for (const std::string& s : reader.split_list("sweep.algorithm", *raw)) {
            try {
                config.sweep_algorithms.push_back(algorithm_from_name(s));
            } catch (const ParamError& e) {
                reader.fail("sweep.algorithm", e.what());
            }
        }
    }

    if (const auto raw = reader.get("loop.k_unknown")) {
        if (*raw != "match") {
            try {
                config.fixed_k_unknown = static_cast<int>(std::stol(*raw));
            } catch (const std::exception&) {
                reader.fail("loop.k_unknown", "expected an integer or 'match'");
            }
        }
    }
    config.base.n_max = static_cast<int>(reader.get_int("loop.n_max", 1, 1, 1000));
    config.base.delta = reader.get_real("loop.delta", 0.0, 0.0, 1.0);
    config.base.m_min = static_cast<int>(reader.get_int("loop.m_min", 10, 3, 1000000));
    config.base.train_fraction = reader.get_real("loop.train_fraction", 0.7, 1e-9, 1.0 - 1e-9);
    config.checkpoints = reader.get_bool("loop.checkpoints", false);

    config.base.vectorizer.dim =
        static_cast<int>(reader.get_int("vectorizer.dim", 2048, 16, 1 << 22));
    config.base.vectorizer.hash_seed = static_cast<std::uint64_t>(
        reader.get_int("vectorizer.hash_seed", 0, 0, std::numeric_limits<long>::max()));
    if (const auto raw = reader.get("vectorizer.ngram_orders")) {
        config.base.vectorizer.ngram_orders.clear();
        for (const std::string& s : reader.split_list("vectorizer.ngram_orders", *raw)) {
            config.base.vectorizer.ngram_orders.push_back(static_cast<int>(std::stol(s)));
        }
    }

    config.base.network.penultimate_dim =
        static_cast<int>(reader.get_int("network.penultimate_dim", 64, 2, 8192));
    config.base.network.learning_rate = reader.get_real("network.learning_rate", 0.05, 1e-9, 100.0);
    config.base.network.epochs = static_cast<int>(reader.get_int("network.epochs", 40, 1, 100000));
    config.base.network.batch_size =
        static_cast<int>(reader.get_int("network.batch_size", 32, 1, 1 << 20));
    config.base.network.l2_penalty = reader.get_real("network.l2", 1e-4, 0.0, 1.0);

    config.base.ensemble.lof_k = static_cast<int>(reader.get_int("ensemble.lof_k", 20, 2, 100000));
    config.base.ensemble.lof_threshold =
        reader.get_real("ensemble.lof_threshold", 1.5, 0.0, 1e9);
    config.base.ensemble.iforest_trees =
        static_cast<int>(reader.get_int("ensemble.iforest_trees", 100, 1, 100000));
    config.base.ensemble.iforest_subsample =
        static_cast<int>(reader.get_int("ensemble.iforest_subsample", 256, 2, 1 << 20));
    config.base.ensemble.weibull_tail =
        static_cast<int>(reader.get_int("ensemble.weibull_tail", 20, 3, 1 << 20));
    config.base.ensemble.calibration_quantile =
        reader.get_real("ensemble.quantile", 0.99, 1e-9, 1.0);

    if (const auto raw = reader.get("cluster.k")) {
        if (*raw == "auto") {
            config.base.clustering.eigengap_k = true;
        } else if (*raw != "match") {
            try {
                config.base.clustering.k = static_cast<int>(std::stol(*raw));
            } catch (const std::exception&) {
                reader.fail("cluster.k", "expected an integer, 'match' or 'auto'");
            }
        }
    }
    config.base.clustering.eps = reader.get_real("cluster.eps", 0.5, 1e-12, 1e9);
    config.base.clustering.min_pts =
        static_cast<int>(reader.get_int("cluster.min_pts", 5, 1, 1 << 20));
    config.base.clustering.birch_threshold =
        reader.get_real("cluster.birch_threshold", 0.5, 0.0, 1e9);
    config.base.clustering.branching =
        static_cast<int>(reader.get_int("cluster.branching", 50, 2, 1 << 20));
    if (const auto raw = reader.get("cluster.bandwidth")) {
        if (*raw != "median") {
            try {
                config.base.clustering.rbf_bandwidth = std::stod(*raw);
            } catch (const std::exception&) {
                reader.fail("cluster.bandwidth", "expected a number or 'median'");
            }
        }
    }

    reader.check_all_used();

    if (config.sweep_k_seed.empty() || config.sweep_k_new.empty() ||
        config.sweep_algorithms.empty() || config.seeds.empty()) {
        throw ConfigError("every sweep axis and the seed list need at least one value");
    }
    return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_experiment_config(buf.str());
}

std::string CellSpec::tag() const {
    return "ks" + std::to_string(k_seed) + "_kn" + std::to_string(k_new) + "_" +
           algorithm_name(algorithm) + "_s" + std::to_string(seed);
}

bool ExperimentResult::all_ok() const {
    return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok; });
}

LabeledCorpus resolve_corpus(const ExperimentConfig& config) {
    if (config.synthetic) return generate_synthetic(*config.synthetic);
    return load_corpus(config.corpus_path, config.corpus_format);
}

std::vector<std::array<double, 2>> pca_project_2d(const std::vector<Eigen::VectorXd>& rows) {
    std::vector<std::array<double, 2>> out(rows.size(), {0.0, 0.0});
    if (rows.empty()) return out;
    const Eigen::Index dim = rows[0].size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& r : rows) mean += r;
    mean /= static_cast<double>(rows.size());

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& r : rows) {
        const Eigen::VectorXd d = r - mean;
        cov.noalias() += d * d.transpose();
    }
    cov /= std::max(1.0, static_cast<double>(rows.size()) - 1.0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericError("pca: eigensolver failed");
    // top-2 components; fix each sign so the largest-magnitude entry is positive
    Eigen::MatrixXd basis(dim, 2);
    for (int c = 0; c < 2; ++c) {
        const Eigen::Index col = std::max<Eigen::Index>(dim - 1 - c, 0);
        Eigen::VectorXd v = solver.eigenvectors().col(col);
        Eigen::Index peak;
        v.cwiseAbs().maxCoeff(&peak);
        if (v[peak] < 0.0) v = -v;
        basis.col(c) = v;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Eigen::Vector2d p = basis.transpose() * (rows[i] - mean);
        out[i] = {p[0], p[1]};
    }
    return out;
}

namespace {

const std::vector<std::string> kIterationsHeader = {
    "k_seed", "k_new", "k_unknown", "algorithm", "seed", "iteration",
    "pre_accuracy", "pre_macro_f1", "post_accuracy", "post_macro_f1",
    "epsilon_os", "davies_bouldin", "v_measure", "ica",
    "ica_homogeneity", "ica_completeness", "ica_uia",
    "outliers", "test_size", "promoted"};

const std::vector<std::string> kTable1Header = {
    "k_seed", "k_new", "algorithm", "seed",
    "pre_accuracy", "pre_macro_f1", "post_accuracy", "post_macro_f1"};

const std::vector<std::string> kTable2Header = {
    "k_seed", "k_new", "algorithm", "seed", "davies_bouldin", "v_measure"};

const std::vector<std::string> kTable3Header = {"k_seed", "k_new", "algorithm", "seed", "ica"};

std::string promoted_column(const IterationReport& r) {
    std::string out;
    for (std::size_t i = 0; i < r.promoted.size(); ++i) {
        if (i) out.push_back(';');
        out += r.promoted[i].label + "=" + r.promoted[i].majority_truth + "(" +
               std::to_string(r.promoted[i].size) + ")";
    }
    return out;
}

double mean_component(const IterationReport& r, double IcaBreakdown::* field) {
    if (r.promoted_ica.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (const IcaBreakdown& b : r.promoted_ica) total += b.*field;
    return total / static_cast<double>(r.promoted_ica.size());
}

void write_atomic(const fs::path& path, const std::vector<csv::Row>& rows) {
    const fs::path tmp = path.string() + ".tmp";
    csv::write_file(tmp.string(), rows);
    fs::rename(tmp, path);
}

class AggregateWriter {
public:
    AggregateWriter(fs::path dir, std::size_t n_tasks) : dir_(std::move(dir)), done_(n_tasks) {}

    void complete(std::size_t index, const CellResult& result) {
        const std::lock_guard<std::mutex> lock(mutex_);
        done_[index] = std::make_unique<CellResult>(result);
        rewrite();
    }

private:
    void rewrite() {
        std::vector<csv::Row> iterations = {kIterationsHeader};
        std::vector<csv::Row> table1 = {kTable1Header};
        std::vector<csv::Row> table2 = {kTable2Header};
        std::vector<csv::Row> table3 = {kTable3Header};
        for (const auto& cell : done_) {
            if (!cell || !cell->ok) continue;
            const CellSpec& s = cell->spec;
            const std::vector<std::string> prefix = {
                std::to_string(s.k_seed), std::to_string(s.k_new),
                algorithm_name(s.algorithm), std::to_string(s.seed)};
            for (const IterationReport& r : cell->reports) {
                iterations.push_back(
                    {std::to_string(s.k_seed), std::to_string(s.k_new),
                     std::to_string(s.k_unknown), algorithm_name(s.algorithm),
                     std::to_string(s.seed), std::to_string(r.iteration),
                     csv::format_double(r.pre_accuracy), csv::format_double(r.pre_macro_f1),
                     csv::format_double(r.post_accuracy), csv::format_double(r.post_macro_f1),
                     csv::format_double(r.epsilon_os), csv::format_double(r.davies_bouldin),
                     csv::format_double(r.v_measure), csv::format_double(r.ica),
                     csv::format_double(mean_component(r, &IcaBreakdown::homogeneity)),
                     csv::format_double(mean_component(r, &IcaBreakdown::completeness)),
                     csv::format_double(mean_component(r, &IcaBreakdown::uia)),
                     std::to_string(r.outlier_count), std::to_string(r.test_count),
                     promoted_column(r)});
            }
            if (!cell->reports.empty()) {
                const IterationReport& first = cell->reports.front();
                csv::Row row1 = prefix;
                row1.insert(row1.end(), {csv::format_double(first.pre_accuracy),
                                         csv::format_double(first.pre_macro_f1),
                                         csv::format_double(first.post_accuracy),
                                         csv::format_double(first.post_macro_f1)});
                table1.push_back(std::move(row1));
                csv::Row row2 = prefix;
                row2.insert(row2.end(), {csv::format_double(first.davies_bouldin),
                                         csv::format_double(first.v_measure)});
                table2.push_back(std::move(row2));
                csv::Row row3 = prefix;
                row3.push_back(csv::format_double(first.ica));
                table3.push_back(std::move(row3));
            }
        }
        write_atomic(dir_ / "iterations.csv", iterations);
        write_atomic(dir_ / "table1.csv", table1);
        write_atomic(dir_ / "table2.csv", table2);
        write_atomic(dir_ / "table3.csv", table3);
    }

    fs::path dir_;
    std::vector<std::unique_ptr<CellResult>> done_;
    std::mutex mutex_;
};

std::size_t worker_count(std::size_t n_tasks) {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("OPENSETIQ_THREADS")) {
        try {
            const long parsed = std::stol(env);
            if (parsed >= 1) n = static_cast<std::size_t>(parsed);
        } catch (const std::exception&) {
            // unparsable value: keep the hardware default
        }
    }
    return std::min(n, std::max<std::size_t>(1, n_tasks));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    fs::create_directories(config.out_dir);
    const LabeledCorpus corpus = resolve_corpus(config);

    std::vector<CellSpec> tasks;
    for (int k_seed : config.sweep_k_seed) {
        for (int k_new : config.sweep_k_new) {
            for (ClusterAlgorithm algorithm : config.sweep_algorithms) {
                for (std::uint64_t seed : config.seeds) {
                    CellSpec spec;
                    spec.k_seed = k_seed;
                    spec.k_new = k_new;
                    spec.k_unknown = config.fixed_k_unknown.value_or(k_new);
                    spec.algorithm = algorithm;
                    spec.seed = seed;
                    tasks.push_back(spec);
                }
            }
        }
    }

    ExperimentResult result;
    result.cells.resize(tasks.size());
    AggregateWriter writer(config.out_dir, tasks.size());
    std::atomic<std::size_t> next{0};

    auto run_task = [&](std::size_t index) {
        const CellSpec& spec = tasks[index];
        CellResult cell;
        cell.spec = spec;
        try {
            LoopConfig loop = config.base;
            loop.k_seed = spec.k_seed;
            loop.k_new = spec.k_new;
            loop.k_unknown = std::max(spec.k_unknown, spec.k_new);
            loop.clustering.algorithm = spec.algorithm;
            loop.seed = spec.seed;

            const std::string checkpoint_dir =
                config.checkpoints ? (fs::path(config.out_dir) / ("state_" + spec.tag())).string()
                                   : "";
            const IterationObserver observer = [&](const IterationArtifacts& artifacts) {
                const auto projected = pca_project_2d(artifacts.outlier_features);
                std::vector<csv::Row> rows = {{"sample_id", "pc1", "pc2", "cluster", "truth_label"}};
                for (std::size_t i = 0; i < artifacts.outlier_ids.size(); ++i) {
                    rows.push_back({artifacts.outlier_ids[i], csv::format_double(projected[i][0]),
                                    csv::format_double(projected[i][1]),
                                    std::to_string(artifacts.cluster_assignments[i]),
                                    artifacts.outlier_truth[i]});
                }
                const fs::path path =
                    fs::path(config.out_dir) /
                    ("clusters_" + spec.tag() + "_i" + std::to_string(artifacts.iteration) + ".csv");
                write_atomic(path, rows);
            };

            RunResult run_result = run(corpus, loop, checkpoint_dir, observer);
            cell.reports = std::move(run_result.reports);
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.ok = false;
            cell.error = e.what();
        }
        writer.complete(index, cell);
        result.cells[index] = std::move(cell);
    };

    const std::size_t workers = worker_count(tasks.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t index = next.fetch_add(1);
                    if (index >= tasks.size()) return;
                    run_task(index);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }
    return result;
}

}  // namespace osiq
