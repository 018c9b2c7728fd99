#include "opensetiq/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "opensetiq/error.hpp"
#include "opensetiq/rng.hpp"

namespace osiq {

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double peak = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - peak).exp();
    return p / p.sum();
}

void check_dim(const TrainedClassifier& model, const FeatureVector& fv) {
    if (fv.values.size() != model.w1.cols()) {
        throw ShapeError("feature vector has dim " + std::to_string(fv.values.size()) +
                         ", classifier expects " + std::to_string(model.w1.cols()));
    }
}

int label_index(const TrainedClassifier& model, const std::string& label) {
    const auto it = std::lower_bound(model.class_labels.begin(), model.class_labels.end(), label);
    if (it == model.class_labels.end() || *it != label) {
        throw TrainingError("label not in classifier inventory: " + label);
    }
    return static_cast<int>(it - model.class_labels.begin());
}

// Accumulates CE loss and gradients over the given sample indices.
// Gradients are means over the batch; L2 terms are added by the caller.
double batch_ce_gradient(const TrainedClassifier& model,
                         const std::vector<TrainSample>& samples,
                         const std::vector<std::size_t>& batch, ParameterGradients& grad) {
    grad.w1.setZero(model.w1.rows(), model.w1.cols());
    grad.b1.setZero(model.b1.size());
    grad.w2.setZero(model.w2.rows(), model.w2.cols());
    grad.b2.setZero(model.b2.size());

    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const std::size_t i : batch) {
        const Eigen::VectorXd& x = samples[i].features.values;
        const Eigen::VectorXd h = (model.w1 * x + model.b1).array().tanh();
        const Eigen::VectorXd p = softmax(model.w2 * h + model.b2);
        const int y = label_index(model, samples[i].label);
        loss -= std::log(std::max(p[y], 1e-300)) * scale;

        Eigen::VectorXd dz = p * scale;
        dz[y] -= scale;
        grad.w2.noalias() += dz * h.transpose();
        grad.b2 += dz;
        const Eigen::VectorXd da =
            (model.w2.transpose() * dz).cwiseProduct((1.0 - h.array().square()).matrix());
        grad.w1.noalias() += da * x.transpose();
        grad.b1 += da;
    }
    return loss;
}

}  // namespace

TrainedClassifier train(const std::vector<TrainSample>& samples, const NetworkConfig& config) {
    if (config.input_dim < 1 || config.penultimate_dim < 2 || config.epochs < 1 ||
        config.batch_size < 1 || config.learning_rate <= 0.0 || config.l2_penalty < 0.0) {
        throw ParamError("invalid network configuration");
    }
    if (samples.empty()) throw TrainingError("no training samples");

    std::set<std::string> labels;
    for (const TrainSample& s : samples) {
        if (s.features.values.size() != config.input_dim) {
            throw ShapeError("sample '" + s.features.source_id + "' has dim " +
                             std::to_string(s.features.values.size()) + ", config expects " +
                             std::to_string(config.input_dim));
        }
        labels.insert(s.label);
    }
    if (labels.size() < 2) throw TrainingError("training needs at least 2 distinct labels");

    TrainedClassifier model;
    model.class_labels.assign(labels.begin(), labels.end());
    const int n_classes = static_cast<int>(model.class_labels.size());

    Rng rng(config.seed);
    const auto xavier = [&rng](Eigen::MatrixXd& w, int fan_in, int fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                w(r, c) = rng.uniform(-limit, limit);
            }
        }
    };
    model.w1.resize(config.penultimate_dim, config.input_dim);
    xavier(model.w1, config.input_dim, config.penultimate_dim);
    model.b1 = Eigen::VectorXd::Zero(config.penultimate_dim);
    model.w2.resize(n_classes, config.penultimate_dim);
    xavier(model.w2, config.penultimate_dim, n_classes);
    model.b2 = Eigen::VectorXd::Zero(n_classes);

    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    ParameterGradients grad;
    std::vector<std::size_t> batch;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int n_batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            const double ce = batch_ce_gradient(model, samples, batch, grad);
            epoch_loss += ce + 0.5 * config.l2_penalty *
                                   (model.w1.squaredNorm() + model.w2.squaredNorm());
            ++n_batches;
            model.w1 -= config.learning_rate * (grad.w1 + config.l2_penalty * model.w1);
            model.b1 -= config.learning_rate * grad.b1;
            model.w2 -= config.learning_rate * (grad.w2 + config.l2_penalty * model.w2);
            model.b2 -= config.learning_rate * grad.b2;
        }
        model.loss_history.push_back(epoch_loss / std::max(1, n_batches));
    }
    return model;
}

Prediction predict(const TrainedClassifier& model, const FeatureVector& fv) {
    check_dim(model, fv);
    const Eigen::VectorXd h = (model.w1 * fv.values + model.b1).array().tanh();
    Prediction out;
    out.probabilities = softmax(model.w2 * h + model.b2);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < out.probabilities.size(); ++i) {
        if (out.probabilities[i] > out.probabilities[best]) best = i;
    }
    out.label = model.class_labels[static_cast<std::size_t>(best)];
    return out;
}

FeatureVector penultimate(const TrainedClassifier& model, const FeatureVector& fv) {
    check_dim(model, fv);
    FeatureVector out;
    out.source_id = fv.source_id;
    out.values = (model.w1 * fv.values + model.b1).array().tanh();
    return out;
}

double training_objective(const TrainedClassifier& model,
                          const std::vector<TrainSample>& samples, double l2_penalty) {
    if (samples.empty()) throw TrainingError("no samples for objective");
    double loss = 0.0;
    for (const TrainSample& s : samples) {
        check_dim(model, s.features);
        const Eigen::VectorXd h = (model.w1 * s.features.values + model.b1).array().tanh();
        const Eigen::VectorXd p = softmax(model.w2 * h + model.b2);
        loss -= std::log(std::max(p[label_index(model, s.label)], 1e-300));
    }
    loss /= static_cast<double>(samples.size());
    return loss + 0.5 * l2_penalty * (model.w1.squaredNorm() + model.w2.squaredNorm());
}

ParameterGradients training_gradient(const TrainedClassifier& model,
                                     const std::vector<TrainSample>& samples,
                                     double l2_penalty) {
    if (samples.empty()) throw TrainingError("no samples for gradient");
    std::vector<std::size_t> all(samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    ParameterGradients grad;
    batch_ce_gradient(model, samples, all, grad);
    grad.w1 += l2_penalty * model.w1;
    grad.w2 += l2_penalty * model.w2;
    return grad;
}

namespace {

std::vector<double> flatten_row_major(const Eigen::MatrixXd& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    }
    return out;
}

Eigen::MatrixXd unflatten_row_major(const std::vector<double>& data, Eigen::Index rows,
                                    Eigen::Index cols, const char* name) {
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw FormatError(std::string("checkpoint: ") + name + " has wrong element count");
    }
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++];
    }
    return m;
}

Eigen::VectorXd vector_from(const std::vector<double>& data, Eigen::Index size,
                            const char* name) {
    if (static_cast<Eigen::Index>(data.size()) != size) {
        throw FormatError(std::string("checkpoint: ") + name + " has wrong element count");
    }
    return Eigen::Map<const Eigen::VectorXd>(data.data(), size);
}

}  // namespace

std::string to_checkpoint_json(const TrainedClassifier& model) {
    nlohmann::json j;
    j["format"] = "opensetiq-classifier";
    j["version"] = 1;
    j["input_dim"] = model.input_dim();
    j["penultimate_dim"] = model.penultimate_dim();
    j["class_labels"] = model.class_labels;
    j["w1"] = flatten_row_major(model.w1);
    j["b1"] = std::vector<double>(model.b1.data(), model.b1.data() + model.b1.size());
    j["w2"] = flatten_row_major(model.w2);
    j["b2"] = std::vector<double>(model.b2.data(), model.b2.data() + model.b2.size());
    j["loss_history"] = model.loss_history;
    return j.dump();
}

TrainedClassifier from_checkpoint_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint parse error: ") + e.what());
    }
    if (j.value("format", "") != "opensetiq-classifier" || j.value("version", 0) != 1) {
        throw FormatError("not a version-1 classifier checkpoint");
    }
    TrainedClassifier model;
    try {
        model.class_labels = j.at("class_labels").get<std::vector<std::string>>();
        const auto input_dim = j.at("input_dim").get<Eigen::Index>();
        const auto hidden = j.at("penultimate_dim").get<Eigen::Index>();
        const auto n_classes = static_cast<Eigen::Index>(model.class_labels.size());
        if (input_dim < 1 || hidden < 2 || n_classes < 2) {
            throw FormatError("checkpoint: invalid shapes");
        }
        model.w1 = unflatten_row_major(j.at("w1").get<std::vector<double>>(), hidden, input_dim, "w1");
        model.b1 = vector_from(j.at("b1").get<std::vector<double>>(), hidden, "b1");
        model.w2 = unflatten_row_major(j.at("w2").get<std::vector<double>>(), n_classes, hidden, "w2");
        model.b2 = vector_from(j.at("b2").get<std::vector<double>>(), n_classes, "b2");
        model.loss_history = j.at("loss_history").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint field error: ") + e.what());
    }
    return model;
}

void save_checkpoint(const std::string& path, const TrainedClassifier& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write checkpoint: " + path);
    out << to_checkpoint_json(model);
}

TrainedClassifier load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read checkpoint: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_checkpoint_json(buf.str());
}

}  // namespace osiq
