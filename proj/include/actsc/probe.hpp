#pragma once

#include <span>
#include <vector>

#include "actsc/activation_store.hpp"
#include "actsc/dsn.hpp"
#include "actsc/matrix.hpp"

namespace actsc {

/// Records kept for probe training and their binary labels (0 easy, 1 hard).
struct LabeledRecords {
    std::vector<ActivationRecord> kept;
    std::vector<int> labels;
};

/// d <= theta_easy -> 0, d >= theta_hard -> 1, anything between is dropped.
/// Throws if fewer than two records survive or only one class is present.
LabeledRecords make_labels(std::span<const ActivationRecord> records, int theta_easy, int theta_hard);

/// Row i, column j = records[i].activations[union_set[j]].
Matrix extract_features(std::span<const ActivationRecord> records, std::span<const std::uint32_t> union_set);

inline constexpr double kStdFloor = 1e-8;

struct Normalizer {
    std::vector<double> mean;
    std::vector<double> std;  // population std, floored at kStdFloor

    bool operator==(const Normalizer&) const = default;
};

Normalizer fit_normalizer(const Matrix& features);
Matrix apply_normalizer(const Normalizer& normalizer, const Matrix& features);

struct TrainConfig {
    double learning_rate = 0.1;
    int epochs = 500;
    double l2 = 0.0;
    double convergence_tol = 1e-7;

    void validate() const;
};

struct TrainMeta {
    double final_loss = 0.0;
    int epochs_run = 0;
    std::vector<double> loss_history;  // loss after each epoch; not persisted
};

struct ProbeTrainingSet {
    Matrix features;  // raw DSN activations, columns in union_set order
    std::vector<int> labels;
    DsnSelection dsn;
};

ProbeTrainingSet build_training_set(std::span<const ActivationRecord> records, const DsnSelection& dsn,
                                    int theta_easy, int theta_hard);

struct ProbeModel {
    std::vector<double> weights;
    double bias = 0.0;
    Normalizer normalizer;
    DsnSelection dsn;
    int theta_easy = 1;
    int theta_hard = 5;
    TrainConfig config;
    TrainMeta meta;

    /// All-zero model over `union_set`: every prediction is exactly 0.5.
    static ProbeModel zero(std::vector<std::uint32_t> union_set);
};

/// Mean binary cross-entropy of a linear-sigmoid model on normalized features,
/// plus (l2 / 2) * |w|^2.
class BceObjective {
public:
    BceObjective(const Matrix& features, std::span<const int> labels, double l2 = 0.0);

    double loss(std::span<const double> weights, double bias) const;

    /// Writes dL/dw into grad_w and returns dL/db.
    double gradient(std::span<const double> weights, double bias, std::span<double> grad_w) const;

private:
    const Matrix& x_;
    std::span<const int> y_;
    double l2_;
};

/// Full-batch gradient descent from zero on z-scored features.
ProbeModel train_probe(const ProbeTrainingSet& training_set, const TrainConfig& config);

struct ProbeOutput {
    double logit;
    double p_hard;
};

ProbeOutput probe_output(const ProbeModel& model, std::span<const float> activations);
double predict_p_hard(const ProbeModel& model, std::span<const float> activations);

struct ProbeEvaluation {
    double accuracy = 0.0;  // predicted hard iff p >= 0.5
    double mean_bce = 0.0;
    std::vector<double> logits;
};

ProbeEvaluation evaluate_probe(const ProbeModel& model, std::span<const ActivationRecord> records,
                               std::span<const int> labels);

} // namespace actsc
