// Command-line front end: corpus generation, sweep runs, standalone metrics.

#include <CLI11.hpp>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "opensetiq/clustering.hpp"
#include "opensetiq/corpus.hpp"
#include "opensetiq/csv.hpp"
#include "opensetiq/error.hpp"
#include "opensetiq/experiment.hpp"
#include "opensetiq/metrics.hpp"

namespace {

int cmd_generate(const osiq::SyntheticSpec& spec, const std::string& out_path) {
    const osiq::LabeledCorpus corpus = osiq::generate_synthetic(spec);
    osiq::save_corpus_csv(out_path, corpus);
    std::cout << "wrote " << corpus.documents.size() << " documents over "
              << corpus.classes.size() << " authors to " << out_path << "\n";
    return 0;
}

int cmd_run(const std::string& config_path) {
    const osiq::ExperimentConfig config = osiq::load_experiment_config(config_path);
    const osiq::ExperimentResult result = osiq::run_experiment(config);
    int failures = 0;
    for (const osiq::CellResult& cell : result.cells) {
        if (!cell.ok) {
            ++failures;
            std::cerr << "cell " << cell.spec.tag() << " failed: " << cell.error << "\n";
        }
    }
    std::cout << (result.cells.size() - static_cast<std::size_t>(failures)) << "/"
              << result.cells.size() << " sweep cells completed; reports in " << config.out_dir
              << "\n";
    return failures == 0 ? 0 : 1;
}

struct MetricsInputs {
    std::string clusters_path;
    std::string truth_path;
    std::string features_path;
    std::string predictions_path;
};

// column-0 keyed lookup used by every metrics input file
std::map<std::string, std::vector<std::string>> read_keyed_csv(const std::string& path,
                                                               std::size_t min_fields,
                                                               const char* what) {
    const auto rows = osiq::csv::read_file(path);
    if (rows.size() < 2) throw osiq::FormatError(std::string(what) + ": no data rows");
    std::map<std::string, std::vector<std::string>> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < min_fields) {
            throw osiq::FormatError(std::string(what) + ": row " + std::to_string(i + 1) +
                                    " has too few fields");
        }
        if (!out.emplace(rows[i][0], rows[i]).second) {
            throw osiq::FormatError(std::string(what) + ": duplicate sample_id " + rows[i][0]);
        }
    }
    return out;
}

int cmd_metrics(const MetricsInputs& inputs) {
    if (inputs.truth_path.empty()) {
        std::cerr << "--truth is required\n";
        return 2;
    }
    // truth: sample_id,label,known  (known in {0,1})
    const auto truth_rows = read_keyed_csv(inputs.truth_path, 3, "truth");
    std::vector<std::string> ids;
    osiq::GroundTruth truth;
    std::map<std::string, std::size_t> index_of;
    for (const auto& [id, row] : truth_rows) {
        index_of[id] = truth.labels.size();
        ids.push_back(id);
        truth.labels.push_back(row[1]);
        if (row[2] == "1") truth.known_set.insert(row[1]);
    }

    std::vector<osiq::csv::Row> report_rows = {{"metric", "value"}};
    const auto emit = [&](const std::string& name, double value) {
        report_rows.push_back({name, osiq::csv::format_double(value)});
    };

    if (!inputs.clusters_path.empty()) {
        // clusters: sample_id,cluster
        const auto cluster_rows = read_keyed_csv(inputs.clusters_path, 2, "clusters");
        std::vector<int> assignments(truth.labels.size(), -1);
        std::vector<std::vector<std::size_t>> members;
        std::map<int, std::size_t> cluster_slot;
        for (const auto& [id, row] : cluster_rows) {
            const auto it = index_of.find(id);
            if (it == index_of.end()) {
                throw osiq::FormatError("clusters reference unknown sample_id " + id);
            }
            const int c = std::stoi(row[1]);
            assignments[it->second] = c;
            if (c >= 0) {
                const auto slot = cluster_slot.emplace(c, members.size());
                if (slot.second) members.emplace_back();
                members[slot.first->second].push_back(it->second);
            }
        }
        emit("v_measure", osiq::v_measure(assignments, truth.labels));
        if (!members.empty()) emit("ica", osiq::ica(members, truth));

        if (!inputs.features_path.empty()) {
            const auto feature_rows = read_keyed_csv(inputs.features_path, 2, "features");
            std::vector<Eigen::VectorXd> points(truth.labels.size());
            for (const auto& [id, row] : feature_rows) {
                const auto it = index_of.find(id);
                if (it == index_of.end()) continue;
                Eigen::VectorXd v(static_cast<Eigen::Index>(row.size()) - 1);
                for (std::size_t f = 1; f < row.size(); ++f) {
                    v[static_cast<Eigen::Index>(f - 1)] = std::stod(row[f]);
                }
                points[it->second] = std::move(v);
            }
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (points[i].size() == 0) {
                    throw osiq::FormatError("features missing for sample_id " + ids[i]);
                }
            }
            const osiq::ClusterSet cs = osiq::cluster_set_from_assignments(points, assignments);
            if (cs.n >= 2) emit("davies_bouldin", osiq::davies_bouldin(cs));
        }
    }

    if (!inputs.predictions_path.empty()) {
        // predictions: sample_id,predicted ("unknown" marks an outlier verdict)
        const auto pred_rows = read_keyed_csv(inputs.predictions_path, 2, "predictions");
        std::vector<std::string> preds(truth.labels.size());
        for (const auto& [id, row] : pred_rows) {
            const auto it = index_of.find(id);
            if (it == index_of.end()) {
                throw osiq::FormatError("predictions reference unknown sample_id " + id);
            }
            preds[it->second] = row[1];
        }
        bool any_known = false, any_unknown = false;
        for (std::size_t i = 0; i < truth.labels.size(); ++i) {
            (truth.unknown(i) ? any_unknown : any_known) = true;
        }
        std::vector<std::string> known_preds, known_truth;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (!truth.unknown(i)) {
                known_preds.push_back(preds[i]);
                known_truth.push_back(truth.labels[i]);
            }
        }
        if (!known_preds.empty()) emit("closed_error", osiq::closed_error(known_preds, known_truth));
        if (any_known && any_unknown) emit("open_set_error", osiq::open_set_error(preds, truth));
    }

    for (const auto& row : report_rows) std::cout << osiq::csv::format_row(row) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"open-set incremental author discovery toolkit"};
    app.require_subcommand(1);

    osiq::SyntheticSpec spec;
    std::string out_path = "corpus.csv";
    CLI::App* generate = app.add_subcommand("generate", "write a synthetic authorship corpus CSV");
    generate->add_option("--authors", spec.num_authors, "author count")
        ->check(CLI::PositiveNumber);
    generate->add_option("--docs", spec.docs_per_author, "documents per author")
        ->check(CLI::PositiveNumber);
    generate->add_option("--doc-len", spec.doc_len, "tokens per document")
        ->check(CLI::PositiveNumber);
    generate->add_option("--vocab", spec.vocab_size, "vocabulary size")
        ->check(CLI::PositiveNumber);
    generate->add_option("--skew", spec.style_skew, "style divergence in (0,1]")
        ->check(CLI::Range(1e-9, 1.0));
    generate->add_option("--seed", spec.seed, "generator seed");
    generate->add_option("-o,--out", out_path, "output CSV path");

    std::string config_path;
    CLI::App* run = app.add_subcommand("run", "run the sweep protocol from a config file");
    run->add_option("--config", config_path, "experiment config file")->required();

    MetricsInputs metrics_inputs;
    CLI::App* metrics = app.add_subcommand("metrics", "compute the evaluation metrics from CSVs");
    metrics->add_option("--truth", metrics_inputs.truth_path,
                        "CSV sample_id,label,known(0/1)")->required();
    metrics->add_option("--clusters", metrics_inputs.clusters_path, "CSV sample_id,cluster");
    metrics->add_option("--features", metrics_inputs.features_path, "CSV sample_id,f0,f1,...");
    metrics->add_option("--predictions", metrics_inputs.predictions_path,
                        "CSV sample_id,predicted");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(spec, out_path);
        if (run->parsed()) return cmd_run(config_path);
        if (metrics->parsed()) return cmd_metrics(metrics_inputs);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
