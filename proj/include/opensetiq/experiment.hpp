#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "opensetiq/incremental.hpp"

namespace osiq {

/// Sweep protocol: every (k_seed, k_new, algorithm) cell runs once per
/// seed. k_unknown follows k_new unless pinned in the config.
struct ExperimentConfig {
    // corpus source: a file path or a synthetic generator spec
    std::string corpus_path;
    CorpusFormat corpus_format = CorpusFormat::csv;
    std::optional<SyntheticSpec> synthetic;

    std::string out_dir;
    std::vector<std::uint64_t> seeds;

    std::vector<int> sweep_k_seed = {5};
    std::vector<int> sweep_k_new = {1};
    std::vector<ClusterAlgorithm> sweep_algorithms = {ClusterAlgorithm::spectral};

    std::optional<int> fixed_k_unknown;  // empty: k_unknown = k_new per cell
    bool checkpoints = false;

    LoopConfig base;  // k_seed/k_new/k_unknown/clustering overwritten per cell
};

/// Parses the flat key=value config format. Unknown keys, bad values and
/// missing required keys raise ConfigError with the line number.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

struct CellSpec {
    int k_seed = 0;
    int k_new = 0;
    int k_unknown = 0;
    ClusterAlgorithm algorithm = ClusterAlgorithm::spectral;
    std::uint64_t seed = 0;

    std::string tag() const;  // "ks5_kn1_spectral_s1"
};

struct CellResult {
    CellSpec spec;
    bool ok = false;
    std::string error;
    std::vector<IterationReport> reports;
};

struct ExperimentResult {
    std::vector<CellResult> cells;
    bool all_ok() const;
};

/// Runs every sweep cell x seed, writing iterations.csv, table1.csv,
/// table2.csv, table3.csv and per-round clusters_<tag>_i<iter>.csv under
/// out_dir. Aggregate files are rewritten (atomically) as cells finish, so
/// an interrupted run keeps everything already completed. Worker count
/// comes from the OPENSETIQ_THREADS environment variable when set.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Loads or generates the configured corpus.
LabeledCorpus resolve_corpus(const ExperimentConfig& config);

/// Projects rows onto their top two principal components.
std::vector<std::array<double, 2>> pca_project_2d(const std::vector<Eigen::VectorXd>& rows);

}  // namespace osiq
