// One-hidden-layer pattern-recognition network (tanh hidden layer, softmax
// output, mean cross-entropy loss) trained by scaled conjugate gradient.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinlog/features.hpp"

namespace pinlog::classifier {

struct TrainConfig {
    std::uint64_t seed = 1;
    int max_epochs = 1000;
    int val_patience = 6;
    double scg_sigma = 5e-5;
    double scg_lambda0 = 5e-7;
    int hidden_dim = 1000;
    double min_grad = 1e-7;
};

void validate_config(const TrainConfig& cfg);

struct MlpModel {
    std::size_t input_dim = features::kFeatureCount;
    std::size_t hidden_dim = 0;
    std::size_t output_dim = 0;
    Eigen::MatrixXd w1;  // hidden x input
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // output x hidden
    Eigen::VectorXd b2;
    std::vector<double> norm_min;
    std::vector<double> norm_max;
    std::vector<std::string> label_space;
    TrainConfig config;

    std::size_t parameter_count() const {
        return hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim + output_dim;
    }
};

/// Zero weights and zero-range norm stats for the given shape.
MlpModel make_model(std::size_t input_dim, std::size_t hidden_dim, std::vector<std::string> label_space);

/// Uniform(-r, r) weights with r = 1/sqrt(fan-in), drawn from a seeded mt19937_64.
void init_weights(MlpModel& model, std::uint64_t seed);

/// Flattened parameters: W1 row-major, b1, W2 row-major, b2.
Eigen::VectorXd pack(const MlpModel& model);
void unpack(const Eigen::VectorXd& params, MlpModel& model);

/// Per-feature min/max over the rows of x.
void fit_normalizer(MlpModel& model, const Eigen::MatrixXd& x);

/// Maps to [-1, 1] with the model's training min/max; zero-range features map to 0.
Eigen::VectorXd normalize(std::span<const double> x, const MlpModel& model);
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& x, const MlpModel& model);

/// Class probabilities for one normalized input.
Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& x);

/// Normalized inputs (one row per sample) with label-space indices.
struct Batch {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

struct LossGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;  // same layout as pack()
};

LossGradient loss_and_gradient(const MlpModel& model, const Batch& batch);
double loss_only(const MlpModel& model, const Batch& batch);

enum class StopReason { max_epochs, val_patience, gradient_converged };
std::string_view to_string(StopReason r);

struct TrainHistory {
    std::vector<double> train_loss;  // entry 0 is the initial model
    std::vector<double> val_loss;
    StopReason stop_reason = StopReason::max_epochs;
    std::size_t best_iteration = 0;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, TrainHistory history)
        : std::runtime_error(what), history_(std::move(history)) {}
    const TrainHistory& history() const { return history_; }

private:
    TrainHistory history_;
};

struct TrainResult {
    MlpModel model;
    TrainHistory history;
};

/// Raw (unnormalized) inputs with label indices into label_space.
struct LabeledSet {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

LabeledSet to_labeled_set(const std::vector<features::FeatureVector>& rows,
                          const std::vector<std::string>& label_space);

/// Fits normalization on the training set, then runs full-batch SCG with
/// validation-based stopping. Returns the lowest-validation-loss model.
TrainResult train_scg(const LabeledSet& train, const LabeledSet& val,
                      const std::vector<std::string>& label_space, const TrainConfig& cfg);

/// Indices of the k largest probabilities, descending; ties by lower index.
std::vector<std::size_t> topk_indices(const Eigen::VectorXd& probs, std::size_t k);

/// Labels of the k most probable classes for a raw (unnormalized) input.
std::vector<std::string> predict_topk(const MlpModel& model, std::span<const double> x, std::size_t k);

std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(std::string_view text);

std::string history_to_json(const TrainHistory& h);

}  // namespace pinlog::classifier
