#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "opensetiq/features.hpp"

namespace osiq {

struct NetworkConfig {
    int input_dim = 2048;
    int penultimate_dim = 64;
    double learning_rate = 0.05;
    int epochs = 40;
    int batch_size = 32;
    double l2_penalty = 1e-4;
    std::uint64_t seed = 0;
};

struct TrainSample {
    FeatureVector features;
    std::string label;
};

/// Two-layer network: input -> dense(penultimate, tanh) -> dense(|classes|)
/// -> softmax. `class_labels` is sorted and fixes the logit order.
struct TrainedClassifier {
    Eigen::MatrixXd w1;  // penultimate_dim x input_dim
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // |classes| x penultimate_dim
    Eigen::VectorXd b2;
    std::vector<std::string> class_labels;
    std::vector<double> loss_history;  // per-epoch objective

    int input_dim() const { return static_cast<int>(w1.cols()); }
    int penultimate_dim() const { return static_cast<int>(w1.rows()); }
    int num_classes() const { return static_cast<int>(w2.rows()); }
};

struct Prediction {
    std::string label;
    Eigen::VectorXd probabilities;  // over class_labels, sums to 1
};

/// Gradient of the training objective w.r.t. every parameter block.
struct ParameterGradients {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;
};

/// Seeded mini-batch SGD on cross-entropy plus (l2/2)*||W||^2.
/// Deterministic: same samples, same config, same weights.
TrainedClassifier train(const std::vector<TrainSample>& samples, const NetworkConfig& config);

/// Argmax label (ties broken by lowest class index) plus the softmax vector.
Prediction predict(const TrainedClassifier& model, const FeatureVector& fv);

/// Hidden-layer activations; the geometry the outlier ensemble works in.
FeatureVector penultimate(const TrainedClassifier& model, const FeatureVector& fv);

/// Full-batch objective: mean cross-entropy + (l2/2)*(|w1|^2 + |w2|^2).
double training_objective(const TrainedClassifier& model,
                          const std::vector<TrainSample>& samples, double l2_penalty);

/// Analytic gradient of training_objective; the finite-difference oracle
/// in the tests checks this block by block.
ParameterGradients training_gradient(const TrainedClassifier& model,
                                     const std::vector<TrainSample>& samples,
                                     double l2_penalty);

/// Versioned JSON checkpoint; round-trip is bit-exact for every weight.
std::string to_checkpoint_json(const TrainedClassifier& model);
TrainedClassifier from_checkpoint_json(const std::string& json_text);
void save_checkpoint(const std::string& path, const TrainedClassifier& model);
TrainedClassifier load_checkpoint(const std::string& path);

}  // namespace osiq
